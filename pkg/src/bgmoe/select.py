"""Information criteria and forward stepwise search over the model family."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset
from .em import EMConfig, fit
from .errors import BGMoEError, ParameterError
from .moe import NETWORKS, FittedModel, ModelSpec, NetworkSpec, build_designs

log = logging.getLogger(__name__)

IMPROVEMENT = 1e-6
CRITERIA = ("AIC", "BIC", "ICL")


def aic(loglik: float, k: int) -> float:
    return 2.0 * k - 2.0 * loglik


def bic(loglik: float, k: int, n: int) -> float:
    return k * np.log(n) - 2.0 * loglik


def icl(bic_value: float, z) -> float:
    """BIC plus twice the entropy of the responsibilities (``0 log 0 = 0``)."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = -np.where(z > 0, z * np.log(z), 0.0).sum()
    return bic_value + 2.0 * ent


def criterion_value(model: FittedModel, criterion: str) -> float:
    criterion = criterion.upper()
    if criterion == "AIC":
        return aic(model.loglik, model.n_params)
    b = bic(model.loglik, model.n_params, model.n_obs)
    if criterion == "BIC":
        return b
    if criterion == "ICL":
        return icl(b, model.responsibilities)
    raise ParameterError(f"unknown criterion {criterion!r}")


@dataclass(frozen=True)
class SearchConfig:
    """Stepwise search settings.

    ``candidate_covariates`` maps a network name (``gating``, ``alpha1``,
    ``alpha2``, ``alpha3``, ``beta``) to the columns it may receive; a plain
    list applies to every network.
    """

    max_g: int = 7
    criterion: str = "AIC"
    candidate_covariates: dict = field(default_factory=dict)
    max_steps: int = 100
    seed: int = 0

    def __post_init__(self):
        if int(self.max_g) < 1:
            raise ParameterError("max_g must be at least 1")
        if self.criterion.upper() not in CRITERIA:
            raise ParameterError(f"criterion must be one of {CRITERIA}")
        cands = self.candidate_covariates
        if not isinstance(cands, dict):
            cands = {nm: list(cands) for nm in NETWORKS}
        object.__setattr__(self, "candidate_covariates", {k: tuple(v) for k, v in cands.items()})
        object.__setattr__(self, "criterion", self.criterion.upper())

    def candidates(self, network: str):
        return self.candidate_covariates.get(network, ())


@dataclass(frozen=True)
class TraceRow:
    step: int
    move: str
    spec: str
    loglik: float
    value: float
    accepted: bool


@dataclass
class SearchTrace:
    rows: list = field(default_factory=list)

    def add(self, *args):
        self.rows.append(TraceRow(*args))

    def accepted(self):
        return [r for r in self.rows if r.accepted]

    def to_csv(self) -> str:
        lines = ["step,move,spec,loglik,criterion,accepted"]
        for r in self.rows:
            lines.append(
                f'{r.step},"{r.move}","{r.spec}",{r.loglik!r},{r.value!r},{int(r.accepted)}'
            )
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# neighbourhood


def _with(spec: ModelSpec, **kw) -> ModelSpec:
    return replace(spec, **kw)


def _set_alpha(spec, kind=None, k=None, add=None):
    nets = []
    for j, a in enumerate(spec.alpha):
        cov = a.covariates + ((add,) if j == k else ())
        nets.append(NetworkSpec(kind or a.kind, cov))
    return _with(spec, alpha=tuple(nets))


def neighbours(spec: ModelSpec, cfg: SearchConfig):
    """Candidate moves from ``spec`` as ``(description, new_spec, warm)`` tuples.

    ``warm`` is false for moves that add a component; those are fitted from
    fresh restarts.
    """
    out = []
    g = spec.g
    if g + 1 <= cfg.max_g:
        if g == 1:
            up = {"I": "C", "E": "V"}
            new = ModelSpec(
                g=2,
                gating=NetworkSpec("C"),
                alpha=tuple(NetworkSpec(up[a.kind], a.covariates) for a in spec.alpha),
                beta=NetworkSpec(up[spec.beta.kind], spec.beta.covariates),
            )
        else:
            new = _with(spec, g=g + 1)
        out.append((f"G {g}->{g + 1}", new, False))
    if g > 1:
        swap = {"C": "I", "I": "C", "V": "E", "E": "V"}
        ka = spec.alpha[0].kind
        out.append((f"alpha {ka}->{swap[ka]}", _set_alpha(spec, kind=swap[ka]), True))
        kb = spec.beta.kind
        out.append(
            (f"beta {kb}->{swap[kb]}", _with(spec, beta=NetworkSpec(swap[kb], spec.beta.covariates)), True)
        )
        kg = spec.gating.kind
        if kg in ("C", "E"):
            other = "E" if kg == "C" else "C"
            out.append((f"gating {kg}->{other}", _with(spec, gating=NetworkSpec(other)), True))
    regress = {"C": "V", "I": "E", "V": "V", "E": "E"}
    for k in range(3):
        net = spec.alpha[k]
        for c in cfg.candidates(NETWORKS[k + 1]):
            if c not in net.covariates:
                new = _set_alpha(spec, kind=regress[net.kind], k=k, add=c)
                out.append((f"alpha{k + 1} +{c}", new, True))
    for c in cfg.candidates("beta"):
        if c not in spec.beta.covariates:
            new = _with(spec, beta=NetworkSpec(regress[spec.beta.kind], spec.beta.covariates + (c,)))
            out.append((f"beta +{c}", new, True))
    if g > 1:
        for c in cfg.candidates("gating"):
            if c not in spec.gating.covariates:
                new = _with(spec, gating=NetworkSpec("V", spec.gating.covariates + (c,)))
                out.append((f"gating +{c}", new, True))
    return out


def warm_start(model: FittedModel, spec: ModelSpec, data: Dataset):
    """Starting coefficients for ``spec`` taken from a fitted neighbour.

    Columns are matched by design label; new columns start at zero. Moving a
    network from component-specific to shared averages its rows with the
    fitted component sizes as weights.
    """
    if spec.g != model.g:
        raise ParameterError("warm starts need the same number of components")
    _, labels = build_designs(data, spec, model.encodings)
    weights = model.responsibilities.sum(axis=0)
    weights = weights / weights.sum()
    coefs = []
    for j, (old, old_lab, new_lab, net) in enumerate(
        zip(model.coefs, model.design_labels, labels, spec.networks)
    ):
        new = np.zeros((spec.g, len(new_lab)))
        if j == 0:
            if net.kind != "E" and model.spec.gating.kind != "E":
                for c, lab in enumerate(new_lab):
                    if lab in old_lab:
                        new[:, c] = old[:, old_lab.index(lab)]
            coefs.append(new)
            continue
        for c, lab in enumerate(new_lab):
            if lab in old_lab:
                new[:, c] = old[:, old_lab.index(lab)]
        if not net.component_specific:
            new[:] = weights @ new
        coefs.append(new)
    return coefs


# ---------------------------------------------------------------------------
# search


def _fit_candidate(data, spec, em_cfg, q, start=None):
    if start is None:
        return fit(data, spec, em_cfg, q)
    return fit(data, spec, replace(em_cfg, restarts=1), q, start=start)


def stepwise(data: Dataset, cfg: SearchConfig | None = None, em_cfg: EMConfig | None = None, q=None):
    """Forward stepwise search starting from one component without covariates.

    Each step fits every neighbour of the incumbent and accepts the one with
    the lowest criterion if it improves by more than ``1e-6``. Candidate fit
    failures are logged and skipped. Returns ``(model, trace)``.
    """
    cfg = cfg or SearchConfig()
    em_cfg = em_cfg or EMConfig()
    trace = SearchTrace()
    for nm, cols in cfg.candidate_covariates.items():
        if nm not in NETWORKS:
            raise ParameterError(f"unknown network {nm!r} in candidate covariates")
        data.encodings(cols)
    start_spec = ModelSpec.from_name("II", 1)
    incumbent = fit(data, start_spec, replace(em_cfg, seed=cfg.seed), q)
    best_val = criterion_value(incumbent, cfg.criterion)
    trace.add(0, "start", incumbent.spec.describe(), incumbent.loglik, best_val, True)
    seen = {start_spec}
    for step in range(1, int(cfg.max_steps) + 1):
        step_cfg = replace(em_cfg, seed=cfg.seed + step)
        results = []
        for move, spec, warm in neighbours(incumbent.spec, cfg):
            if spec in seen:
                continue
            try:
                start = warm_start(incumbent, spec, data) if warm else None
                cand = _fit_candidate(data, spec, step_cfg, q, start)
            except (BGMoEError, np.linalg.LinAlgError) as exc:
                log.info("step %d move %s failed: %s", step, move, exc)
                trace.add(step, move + " (failed)", spec.describe(), float("nan"), float("nan"), False)
                continue
            val = criterion_value(cand, cfg.criterion)
            results.append((val, move, cand))
            log.info("step %d move %s %s %.4f", step, move, cfg.criterion, val)
        if not results:
            break
        best_idx = int(np.argmin([r[0] for r in results]))
        for idx, (val, move, cand) in enumerate(results):
            accept = idx == best_idx and val < best_val - IMPROVEMENT
            trace.add(step, move, cand.spec.describe(), cand.loglik, val, accept)
        val, move, cand = results[best_idx]
        if not val < best_val - IMPROVEMENT:
            break
        incumbent, best_val = cand, val
        seen.add(cand.spec)
    return incumbent, trace


__all__ = [
    "SearchConfig",
    "SearchTrace",
    "TraceRow",
    "aic",
    "bic",
    "criterion_value",
    "icl",
    "neighbours",
    "stepwise",
    "warm_start",
]
