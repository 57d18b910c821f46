"""Command-line interface: ``bgmoe <subcommand> [flags]``.

Subcommands are simulate, fit, select, predict, evaluate and density. Flags
may also come from a sectioned config file (``--config run.cfg``) whose
sections are named after subcommands; explicit flags win. Failures print one
line ``bgmoe: error code=<n> type=<Class> message=<text>`` to stderr and exit
with 2 (usage), 3 (data) or 4 (numerical).
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys

import numpy as np

from . import io
from .baseline import fit_gamma_glm, predict_glm
from .bgdist import BGParams, log_density_grid
from .em import EMConfig, e_step, fit
from .errors import BGMoEError, DataError, UsageError
from .metrics import glm_predictive_samples, mixture_samples, score
from .moe import ModelSpec, component_params, mixing_probs, model_designs
from .select import SearchConfig, stepwise
from .sim import simulate_study1, simulate_study2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _list(text):
    if text is None:
        return []
    return [t.strip() for t in str(text).split(",") if t.strip()]


class _Outputs:
    """Tracks written files so a failed run can remove them."""

    def __init__(self):
        self.paths = []

    def write(self, path, text):
        io.atomic_write(path, text)
        self.paths.append(path)

    def rollback(self):
        for p in self.paths:
            try:
                os.unlink(p)
            except OSError:
                pass


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args, out):
    gen = {1: simulate_study1, 2: simulate_study2}[args.study]
    sim = gen(args.n, args.seed)
    out.write(args.out, io.dataset_csv(sim.to_dataset(), {"true_label": sim.true_labels}))
    print(f"wrote {sim.responses.shape[0]} rows to {args.out}")


def _em_config(args):
    return EMConfig(
        tol=args.tol,
        max_iter=args.max_iter,
        restarts=args.restarts,
        seed=args.seed,
        use_aitken=args.aitken,
        verbose=args.verbose,
    )


def _trace_csv(model):
    header = ["iteration", "loglik", "rel_change", "gating", "alpha1", "alpha2", "alpha3", "beta"]
    return io.csv_text(header, model.trace)


def cmd_fit(args, out):
    data = io.load_csv(args.data)
    if args.family == "glm":
        covs = _list(args.covariates)
        x, labels = data.design(covs)
        fits = [fit_gamma_glm(data.y[:, j], x) for j in range(2)]
        body = io.glm_to_dict(fits, covs, labels, data.encodings(covs))
        out.write(args.out, io.document_text(body))
        print(f"glm loglik {fits[0].loglik + fits[1].loglik:.6f} -> {args.out}")
        return
    spec = ModelSpec.from_name(
        args.spec,
        args.g,
        gating=_list(args.gating),
        alpha1=_list(args.alpha1),
        alpha2=_list(args.alpha2),
        alpha3=_list(args.alpha3),
        beta=_list(args.beta),
    )
    data.encodings(spec.covariate_names())
    model = fit(data, spec, _em_config(args))
    out.write(args.out, io.document_text(io.model_to_dict(model)))
    out.write(args.trace or args.out + ".trace.csv", _trace_csv(model))
    k, ll, n = model.n_params, model.loglik, model.n_obs
    print(
        f"{spec.describe()} loglik {ll:.6f} params {k} "
        f"AIC {2 * k - 2 * ll:.4f} BIC {k * np.log(n) - 2 * ll:.4f} -> {args.out}"
    )


def cmd_select(args, out):
    data = io.load_csv(args.data)
    base = _list(args.candidates)
    cands = {}
    for net in ("gating", "alpha1", "alpha2", "alpha3", "beta"):
        own = getattr(args, "cand_" + net)
        cands[net] = _list(own) if own is not None else base
    cfg = SearchConfig(
        max_g=args.max_g,
        criterion=args.criterion,
        candidate_covariates=cands,
        max_steps=args.max_steps,
        seed=args.seed,
    )
    model, trace = stepwise(data, cfg, _em_config(args))
    out.write(args.out, io.document_text(io.model_to_dict(model)))
    if args.trace:
        out.write(args.trace, trace.to_csv())
    print(f"selected {model.spec.describe()} loglik {model.loglik:.6f} -> {args.out}")


def cmd_predict(args, out):
    body = io.read_document(args.model)
    data = io.load_csv(args.data, require_y=False)
    if body["kind"] == "glm":
        fits, meta = io.glm_from_dict(body)
        x, _ = data.design(meta["covariates"], meta["encodings"])
        mu = np.column_stack([predict_glm(f, x) for f in fits])
        header = ["yhat1", "yhat2", "yhat_sum", "mu1", "mu2", "shape1", "shape2"]
        rows = [
            (m1, m2, m1 + m2, m1, m2, 1.0 / fits[0].dispersion, 1.0 / fits[1].dispersion)
            for m1, m2 in mu
        ]
        out.write(args.out, io.csv_text(header, rows))
        print(f"wrote {len(rows)} predictions to {args.out}")
        return
    model = io.model_from_dict(body)
    designs = model_designs(model, data)
    alpha, beta = component_params(model, designs)
    tau = mixing_probs(model, designs)
    means = np.stack([(alpha[0] + alpha[2]) / beta, (alpha[1] + alpha[2]) / beta], axis=-1)
    yhat = np.einsum("ng,ngk->nk", tau, means)
    post = e_step(data, model).z if data.has_responses else tau
    label = np.argmax(post, axis=1) + 1
    g = model.g
    header = ["yhat1", "yhat2", "yhat_sum", "map"]
    header += [f"tau_{j}" for j in range(1, g + 1)] + [f"post_{j}" for j in range(1, g + 1)]
    for nm in ("a1", "a2", "a3", "b"):
        header += [f"{nm}_{j}" for j in range(1, g + 1)]
    rows = []
    for i in range(data.n):
        r = [yhat[i, 0], yhat[i, 1], yhat[i, 0] + yhat[i, 1], int(label[i])]
        r += list(tau[i]) + list(post[i])
        for k in range(3):
            r += list(alpha[k, i])
        r += list(beta[i])
        rows.append(r)
    out.write(args.out, io.csv_text(header, rows))
    print(f"wrote {len(rows)} predictions to {args.out}")


def _read_pred(path):
    pred = io.load_csv(path, require_y=False)
    cols = pred.columns
    if any(cols[c].dtype.kind not in "f" for c in cols):
        raise DataError(f"{path} has non-numeric prediction columns")
    return cols


def _pred_samples(cols, m, seed, path):
    mean = np.column_stack([cols["yhat1"], cols["yhat2"]])
    if "mu1" in cols:
        mu = np.column_stack([cols["mu1"], cols["mu2"]])
        phi = np.array([1.0 / cols["shape1"][0], 1.0 / cols["shape2"][0]])
        return mean, glm_predictive_samples(mu, phi, m, seed)
    g = sum(1 for c in cols if c.startswith("tau_"))
    if g == 0:
        raise DataError(f"{path} has neither mixture nor GLM parameter columns")
    tau = np.column_stack([cols[f"tau_{j}"] for j in range(1, g + 1)])
    alpha = np.stack([np.column_stack([cols[f"{nm}_{j}"] for j in range(1, g + 1)]) for nm in ("a1", "a2", "a3")])
    beta = np.column_stack([cols[f"b_{j}"] for j in range(1, g + 1)])
    return mean, mixture_samples(tau, alpha, beta, m, seed)


def cmd_evaluate(args, out):
    actual = io.load_csv(args.actual)
    rows = []
    for path in args.pred:
        cols = _read_pred(path)
        n = len(next(iter(cols.values())))
        if n != actual.n:
            raise DataError(f"{path} has {n} rows but {args.actual} has {actual.n}")
        mean, samples = _pred_samples(cols, args.samples, args.seed, path)
        label = os.path.splitext(os.path.basename(path))[0]
        rows.extend(score(mean, samples, actual.y).rows(label))
    rows.sort(key=lambda r: ("Y1", "Y2", "Sum").index(r[0]))
    header = ["target", "model", "CRPS", "rMSE", "Gini", "Wasserstein"]
    out.write(args.out, io.csv_text(header, rows))
    print(f"wrote scores for {len(args.pred)} model(s) to {args.out}")


def _grid_axis(text):
    try:
        lo, hi, steps = text.split(":")
        return np.linspace(float(lo), float(hi), int(steps))
    except ValueError as exc:
        raise UsageError(f"bad grid axis {text!r}; expected min:max:steps") from exc


def cmd_density(args, out):
    vals = [float(v) for v in _list(args.params)]
    if len(vals) != 4:
        raise UsageError("--params needs four values a1,a2,a3,b")
    p = BGParams(*vals)
    axes = args.grid.split(",")
    if len(axes) != 2:
        raise UsageError("--grid needs two axes")
    g1, g2 = (_grid_axis(a) for a in axes)
    y1, y2 = np.meshgrid(g1, g2, indexing="ij")
    dens = np.zeros_like(y1)
    inside = (y1 > 0) & (y2 > 0)
    ties = inside & (y1 == y2) & (p.alpha1 + p.alpha2 <= 1)
    ok = inside & ~ties
    dens[ok] = np.exp(log_density_grid(y1[ok], y2[ok], p))
    dens[ties] = np.inf
    rows = zip(y1.ravel(), y2.ravel(), dens.ravel())
    out.write(args.out, io.csv_text(["y1", "y2", "density"], rows))
    print(f"wrote {y1.size} grid points to {args.out}")


# ---------------------------------------------------------------------------
# parser


def _em_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--aitken", action="store_true")


def build_parser():
    parser = _Parser(prog="bgmoe", description="Bivariate gamma mixture-of-experts models")
    parser.add_argument("--config", help="sectioned key=value file; flags take precedence")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a simulation-study dataset")
    p.add_argument("--study", type=int, choices=(1, 2), required=True)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="fit one model type")
    p.add_argument("--data", required=True)
    p.add_argument("--family", choices=("bgmoe", "glm"), default="bgmoe")
    p.add_argument("--spec", default="CC")
    p.add_argument("--g", type=int, default=1)
    for net in ("gating", "alpha1", "alpha2", "alpha3", "beta"):
        p.add_argument(f"--{net}", default="")
    p.add_argument("--covariates", default="", help="GLM covariates")
    _em_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--trace")

    p = sub.add_parser("select", help="stepwise model search")
    p.add_argument("--data", required=True)
    p.add_argument("--candidates", default="")
    for net in ("gating", "alpha1", "alpha2", "alpha3", "beta"):
        p.add_argument(f"--cand-{net}", dest=f"cand_{net}", default=None)
    p.add_argument("--max-g", type=int, default=7)
    p.add_argument("--criterion", type=str.upper, choices=("AIC", "BIC", "ICL"), default="AIC")
    p.add_argument("--max-steps", type=int, default=100)
    _em_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--trace")

    p = sub.add_parser("predict", help="predict from a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="score predictions against actuals")
    p.add_argument("--pred", action="append", required=True)
    p.add_argument("--actual", required=True)
    p.add_argument("--samples", type=int, default=4096)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("density", help="write a density grid")
    p.add_argument("--params", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    return parser, sub


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "select": cmd_select,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "density": cmd_density,
}


def _apply_config(parser, sub, argv):
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = configparser.ConfigParser()
    if not cfg.read(known.config):
        raise UsageError(f"cannot read config file {known.config}")
    command = next((a for a in rest if a in COMMANDS), None)
    if command is None:
        return
    target = sub.choices[command]
    valid = {a.dest for a in target._actions}
    section = cfg[command] if cfg.has_section(command) else cfg.defaults()
    values = {}
    for key, val in section.items():
        dest = key.replace("-", "_")
        if dest not in valid:
            raise UsageError(f"unknown key {key!r} in section [{command}]")
        action = next(a for a in target._actions if a.dest == dest)
        if isinstance(action, argparse._StoreTrueAction):
            values[dest] = cfg.getboolean(section.name, key) if cfg.has_section(command) else val
        elif isinstance(action, argparse._AppendAction):
            values[dest] = _list(val)
        else:
            values[dest] = action.type(val) if action.type else val
        action.required = False
    target.set_defaults(**values)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    out = _Outputs()
    try:
        parser, sub = build_parser()
        _apply_config(parser, sub, argv)
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
        if not hasattr(args, "verbose"):
            args.verbose = False
        COMMANDS[args.command](args, out)
    except BGMoEError as exc:
        out.rollback()
        msg = " ".join(str(exc).split())
        print(f"bgmoe: error code={exc.exit_code} type={type(exc).__name__} message={msg}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        out.rollback()
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
