"""CSV data exchange and versioned model documents.

Model documents are JSON objects of the form
``{"format": ..., "version": 1, "checksum": <sha256 of body>, "body": {...}}``
where the checksum covers the canonical serialisation of ``body``. Floats
are written with ``repr`` precision so coefficients reload bit-exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import tempfile

import numpy as np

from .baseline import GlmFit
from .data import Dataset
from .errors import ChecksumError, DataError, SerializationError, VersionError
from .moe import FittedModel, ModelSpec, NetworkSpec

FORMAT = "bgmoe-model"
VERSION = 1


# ---------------------------------------------------------------------------
# CSV


def _parse_float(text):
    try:
        v = float(text)
    except ValueError:
        return None
    return v


def load_csv(path, require_y=True) -> Dataset:
    """Read a comma-separated file with a header row.

    Columns ``y1`` and ``y2`` hold the responses. Every other column is
    numeric when all its cells parse as finite reals and categorical
    otherwise.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if not body:
        raise DataError(f"{path} has a header but no rows")
    if len(set(header)) != len(header):
        raise DataError(f"{path} has duplicate column names")
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DataError(f"row {i} has {len(r)} cells, expected {len(header)}")
    has_y = "y1" in header and "y2" in header
    if require_y and not has_y:
        missing = [c for c in ("y1", "y2") if c not in header]
        raise DataError(f"missing response column {missing[0]}")
    cols = {h: [r[j].strip() for r in body] for j, h in enumerate(header)}
    for h, vals in cols.items():
        for i, v in enumerate(vals, start=2):
            if v == "":
                raise DataError(f"empty cell at row {i}, column {h!r}")

    y = None
    if has_y:
        y = np.empty((len(body), 2))
        for j, h in enumerate(("y1", "y2")):
            for i, v in enumerate(cols[h]):
                f = _parse_float(v)
                if f is None or not math.isfinite(f):
                    raise DataError(f"unparseable value {v!r} at row {i + 2}, column {h!r}")
                if f <= 0:
                    raise DataError(f"non-positive response {v!r} at row {i + 2}, column {h!r}")
                y[i, j] = f
    cov = {}
    for h in header:
        if h in ("y1", "y2"):
            continue
        parsed = [_parse_float(v) for v in cols[h]]
        if all(p is not None for p in parsed):
            bad = [i for i, p in enumerate(parsed) if not math.isfinite(p)]
            if bad:
                raise DataError(f"unparseable value {cols[h][bad[0]]!r} at row {bad[0] + 2}, column {h!r}")
            cov[h] = np.array(parsed)
        else:
            cov[h] = np.array(cols[h], dtype=object).astype(str)
    return Dataset(y, cov)


def fmt(v) -> str:
    """Shortest round-tripping text for a number."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(c if isinstance(c, str) else fmt(c) for c in r))
    return "\n".join(lines) + "\n"


def dataset_csv(data: Dataset, extra=None) -> str:
    """CSV text for a dataset; ``extra`` adds named columns at the end."""
    header = ["y1", "y2"] + data.names + list((extra or {}).keys())
    cols = [data.y[:, 0], data.y[:, 1]] + [data.columns[n] for n in data.names]
    cols += list((extra or {}).values())
    rows = zip(*[[str(v) if isinstance(v, str) else v for v in c] for c in cols])
    return csv_text(header, rows)


def atomic_write(path, text: str):
    """Write ``text`` to ``path`` through a temporary file and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# model documents


def _net_dict(net: NetworkSpec):
    return {"kind": net.kind, "covariates": list(net.covariates)}


def _net(d) -> NetworkSpec:
    return NetworkSpec(d["kind"], tuple(d["covariates"]))


def spec_to_dict(spec: ModelSpec):
    return {
        "g": spec.g,
        "gating": _net_dict(spec.gating),
        "alpha": [_net_dict(a) for a in spec.alpha],
        "beta": _net_dict(spec.beta),
    }


def spec_from_dict(d) -> ModelSpec:
    return ModelSpec(
        g=int(d["g"]),
        gating=_net(d["gating"]),
        alpha=tuple(_net(a) for a in d["alpha"]),
        beta=_net(d["beta"]),
    )


def model_to_dict(model: FittedModel):
    return {
        "kind": "moe",
        "spec": spec_to_dict(model.spec),
        "name": model.spec.name,
        "coefficients": [np.asarray(c).tolist() for c in model.coefs],
        "design_labels": [list(lab) for lab in model.design_labels],
        "encodings": {k: list(v) for k, v in model.encodings.items()},
        "loglik": model.loglik,
        "n_params": model.n_params,
        "n_obs": model.n_obs,
        "converged": model.converged,
        "iterations": model.iterations,
    }


def model_from_dict(d) -> FittedModel:
    coefs = [np.array(c, dtype=float) for c in d["coefficients"]]
    return FittedModel(
        spec=spec_from_dict(d["spec"]),
        gating_coef=coefs[0],
        alpha_coef=tuple(coefs[1:4]),
        beta_coef=coefs[4],
        design_labels=tuple(tuple(lab) for lab in d["design_labels"]),
        encodings={k: list(v) for k, v in d["encodings"].items()},
        loglik=float(d["loglik"]),
        n_params=int(d["n_params"]),
        n_obs=int(d["n_obs"]),
        converged=bool(d["converged"]),
        iterations=int(d["iterations"]),
    )


def glm_to_dict(fits, covariates, labels, encodings):
    """Two independent margins fitted on the same design."""
    return {
        "kind": "glm",
        "covariates": list(covariates),
        "design_labels": list(labels),
        "encodings": {k: list(v) for k, v in encodings.items()},
        "margins": [
            {
                "coefficients": np.asarray(f.coefficients).tolist(),
                "dispersion": f.dispersion,
                "loglik": f.loglik,
                "deviance": f.deviance,
                "iterations": f.iterations,
            }
            for f in fits
        ],
    }


def glm_from_dict(d):
    fits = [
        GlmFit(
            coefficients=np.array(m["coefficients"], dtype=float),
            dispersion=float(m["dispersion"]),
            loglik=float(m["loglik"]),
            deviance=float(m["deviance"]),
            iterations=int(m["iterations"]),
        )
        for m in d["margins"]
    ]
    return fits, d


def _canonical(body) -> str:
    return json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=True)


def document_text(body) -> str:
    digest = hashlib.sha256(_canonical(body).encode()).hexdigest()
    doc = {"format": FORMAT, "version": VERSION, "checksum": digest, "body": body}
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=True) + "\n"


def read_document(path):
    """Parse and verify a model document; returns its body."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise SerializationError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChecksumError(f"{path} is truncated or corrupt") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise SerializationError(f"{path} is not a model document")
    if doc.get("version") != VERSION:
        raise VersionError(f"unsupported model document version {doc.get('version')!r}")
    body = doc.get("body")
    digest = hashlib.sha256(_canonical(body).encode()).hexdigest()
    if digest != doc.get("checksum"):
        raise ChecksumError(f"checksum mismatch in {path}")
    return body


def save_model(model: FittedModel, path):
    atomic_write(path, document_text(model_to_dict(model)))


def load_model(path) -> FittedModel:
    body = read_document(path)
    if body.get("kind") != "moe":
        raise SerializationError(f"{path} does not hold a mixture-of-experts model")
    return model_from_dict(body)
