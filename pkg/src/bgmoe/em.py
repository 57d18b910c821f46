"""EM / ECM fitting of bivariate gamma mixture-of-experts models.

Each iteration runs the E-step (responsibilities and latent moments from the
quadrature kernel) followed by conditional maximisations in the fixed order
gating, alpha1, alpha2, alpha3, beta. Every conditional step maximises a
block of the expected complete-data log-likelihood; those block objectives
are exposed so tests can check gradients and curvature directly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.special import gammaln, logsumexp, polygamma, psi

from . import _quadrature as quad
from .bgdist import ALPHA3_FLOOR, DEFAULT_QUADRATURE, QuadratureConfig
from .data import Dataset
from .errors import FittingError, MonotonicityError, NumericalError, ParameterError
from .moe import (
    FittedModel,
    ModelSpec,
    build_designs,
    canonicalize,
    component_params,
    log_gating,
    param_count,
)

log = logging.getLogger(__name__)

RIDGE = 1e-10
INNER_MAX = 100


@dataclass(frozen=True)
class EMConfig:
    tol: float = 1e-5
    max_iter: int = 1000
    restarts: int = 5
    seed: int = 0
    allow_decrease: float = 1e-6
    use_aitken: bool = False
    init_sweeps: int = 3
    verbose: bool = False

    def __post_init__(self):
        if not self.tol >= 1e-8:
            raise ParameterError("tol must be at least 1e-8")
        if int(self.restarts) < 1:
            raise ParameterError("restarts must be at least 1")


@dataclass
class EStepCache:
    """Responsibilities and latent moments, all of shape (n, G)."""

    z: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    lx1: np.ndarray
    lx2: np.ndarray
    lx3: np.ndarray
    logf: np.ndarray
    loglik: float

    @property
    def lx(self):
        return (self.lx1, self.lx2, self.lx3)


# ---------------------------------------------------------------------------
# block objectives


def shape_objective(gamma, w, omega, a):
    """Weighted ``sum omega (alpha a - lgamma alpha)`` with ``alpha = exp(w gamma)``.

    Returns ``(value, gradient, hessian)`` in ``gamma``.
    """
    with np.errstate(over="ignore"):
        alpha = np.exp(w @ gamma)
    if not np.all(np.isfinite(alpha)):
        return -np.inf, None, None
    r = a - psi(alpha)
    val = float(np.sum(omega * (alpha * a - gammaln(alpha))))
    grad = w.T @ (omega * alpha * r)
    curv = omega * alpha * (r - alpha * polygamma(1, alpha))
    return val, grad, (w * curv[:, None]).T @ w


def shape_fisher(gamma, w, omega):
    """Expected information of the shape block; positive definite for full-rank ``w``."""
    alpha = np.exp(w @ gamma)
    return (w * (omega * alpha**2 * polygamma(1, alpha))[:, None]).T @ w


def rate_objective(gamma, w, omega, shape_sum, latent_sum):
    """``sum omega (A eta - exp(eta) X)`` with ``eta = w gamma``; concave."""
    eta = w @ gamma
    with np.errstate(over="ignore"):
        beta = np.exp(eta)
    if not np.all(np.isfinite(beta)):
        return -np.inf, None, None
    val = float(np.sum(omega * (shape_sum * eta - beta * latent_sum)))
    grad = w.T @ (omega * (shape_sum - beta * latent_sum))
    return val, grad, -(w * (omega * beta * latent_sum)[:, None]).T @ w


def gating_objective(theta, w0, z):
    """``sum z log softmax`` in the non-reference coefficients ``theta`` (flattened (G-1, d0))."""
    n, g = z.shape
    d = w0.shape[1]
    coef = np.vstack([theta.reshape(g - 1, d), np.zeros((1, d))])
    logp = log_gating(coef, w0)
    p = np.exp(logp)
    val = float(np.sum(z * logp))
    resid = (z - p)[:, : g - 1]
    grad = (resid.T @ w0).ravel()
    hess = np.zeros((g - 1, d, g - 1, d))
    for a in range(g - 1):
        for b in range(g - 1):
            c = p[:, a] * ((a == b) - p[:, b])
            hess[a, :, b, :] = -(w0 * c[:, None]).T @ w0
    return val, grad, hess.reshape((g - 1) * d, (g - 1) * d)


# ---------------------------------------------------------------------------
# solvers


def inverse_digamma(s, tol=1e-12, max_iter=50):
    """Solve ``psi(alpha) = s`` elementwise.

    Starts from the standard piecewise approximation and refines by Newton
    steps with the trigamma function; ``psi`` is increasing so the root is
    unique.
    """
    s = np.asarray(s, dtype=float)
    x = np.where(s >= -2.22, np.exp(s) + 0.5, -1.0 / (s - psi(1.0)))
    for _ in range(max_iter):
        step = (psi(x) - s) / polygamma(1, x)
        x_new = x - step
        x_new = np.where(x_new <= 0, x / 2, x_new)
        done = np.all(np.abs(x_new - x) <= tol * x)
        x = x_new
        if done:
            break
    return x


def _ascent(objective, x0, fallback=None, max_iter=INNER_MAX, ridge_on_fail=False):
    """Damped Newton ascent with step halving; never returns a worse point.

    ``fallback(x)`` supplies a positive definite matrix used when the negative
    Hessian is not positive definite. Returns ``(x, iterations, converged)``.
    """
    x = np.array(x0, dtype=float)
    val, grad, hess = objective(x)
    if not np.isfinite(val):
        raise NumericalError("starting point of a conditional maximisation is infeasible")
    for it in range(1, max_iter + 1):
        neg = -hess
        try:
            chol = np.linalg.cholesky(neg)
        except np.linalg.LinAlgError:
            chol = None
            if fallback is not None:
                try:
                    chol = np.linalg.cholesky(fallback(x))
                except np.linalg.LinAlgError:
                    chol = None
            if chol is None and ridge_on_fail:
                try:
                    chol = np.linalg.cholesky(neg + RIDGE * np.eye(len(x)))
                except np.linalg.LinAlgError:
                    chol = None
            if chol is None:
                sc = max(1.0, float(np.max(np.abs(np.diag(neg)))))
                chol = np.linalg.cholesky(
                    np.diag(np.maximum(np.abs(np.diag(neg)), 1e-8 * sc)) + RIDGE * np.eye(len(x))
                )
        step = np.linalg.solve(chol.T, np.linalg.solve(chol, grad))
        t = 1.0
        accepted = False
        for _ in range(60):
            cand = x + t * step
            cval, cgrad, chess = objective(cand)
            if np.isfinite(cval) and cval >= val:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            return x, it, True
        gain = cval - val
        x, val, grad, hess = cand, cval, cgrad, chess
        if gain <= 1e-14 * (1.0 + abs(val)) and np.max(np.abs(t * step)) <= 1e-8 * (
            1.0 + np.max(np.abs(x))
        ):
            return x, it, True
        if np.max(np.abs(t * step)) <= 1e-12 * (1.0 + np.max(np.abs(x))):
            return x, it, True
    return x, max_iter, False


# ---------------------------------------------------------------------------
# M-steps


def _row_mat(vec, g):
    return np.tile(np.asarray(vec, dtype=float), (g, 1))


def m_step_gating(kind, z, w0, coef):
    """Update the gating coefficient matrix ``(G, d0)``; returns ``(coef, iters, ok)``."""
    n, g = z.shape
    if g == 1 or kind == "E":
        return np.zeros((g, w0.shape[1])), 0, True
    if kind == "C":
        tau = z.sum(axis=0) / n
        with np.errstate(divide="ignore"):
            lt = np.log(tau)
        if not np.all(np.isfinite(lt)):
            raise NumericalError("a mixing weight collapsed to zero")
        new = np.zeros((g, 1))
        new[:, 0] = lt - lt[-1]
        return new, 0, True
    theta0 = (coef[:-1] - coef[-1]).ravel()
    theta, it, ok = _ascent(lambda t: gating_objective(t, w0, z), theta0, ridge_on_fail=True)
    new = np.vstack([theta.reshape(g - 1, -1), np.zeros((1, w0.shape[1]))])
    return new, it, ok


def shape_blocks(kind, z, log_beta, lx):
    """Weights and targets of each alpha block: list of ``(omega, a)``; one per component
    for C/V, a single shared block for E/I."""
    a = log_beta + lx
    if kind in ("C", "V"):
        return [(z[:, j], a[:, j]) for j in range(z.shape[1])]
    return [(np.ones(z.shape[0]), np.sum(z * a, axis=1))]


def rate_blocks(kind, z, shape_sum, latent_sum):
    if kind in ("C", "V"):
        return [(z[:, j], shape_sum[:, j], latent_sum[:, j]) for j in range(z.shape[1])]
    return [(np.ones(z.shape[0]), np.sum(z * shape_sum, axis=1), np.sum(z * latent_sum, axis=1))]


def m_step_alpha(kind, z, w, log_beta, lx, coef):
    """Update one alpha network; returns ``(coef, iters, ok)``."""
    g = z.shape[1]
    blocks = shape_blocks(kind, z, log_beta, lx)
    if kind in ("C", "I"):
        target = np.array([np.sum(om * a) / np.sum(om) for om, a in blocks])
        la = np.log(inverse_digamma(target))
        new = la[:, None] if kind == "C" else _row_mat(la, g)
        return new, 0, True
    rows, its, oks = [], 0, True
    starts = coef if kind == "V" else coef[:1]
    for (om, a), c0 in zip(blocks, starts):
        gam, it, ok = _ascent(
            lambda gm: shape_objective(gm, w, om, a), c0, fallback=lambda gm: shape_fisher(gm, w, om)
        )
        rows.append(gam)
        its = max(its, it)
        oks = oks and ok
    new = np.array(rows) if kind == "V" else _row_mat(rows[0], g)
    return new, its, oks


def m_step_beta(kind, z, w, shape_sum, latent_sum, coef):
    """Update the rate network; ``shape_sum = a1+a2+a3`` and ``latent_sum = x1+x2+x3``."""
    g = z.shape[1]
    blocks = rate_blocks(kind, z, shape_sum, latent_sum)
    if kind in ("C", "I"):
        lb = np.log(np.array([np.sum(om * s) / np.sum(om * x) for om, s, x in blocks]))
        new = lb[:, None] if kind == "C" else _row_mat(lb, g)
        return new, 0, True
    rows, its, oks = [], 0, True
    starts = coef if kind == "V" else coef[:1]
    for (om, s, x), c0 in zip(blocks, starts):
        gam, it, ok = _ascent(lambda gm: rate_objective(gm, w, om, s, x), c0)
        rows.append(gam)
        its = max(its, it)
        oks = oks and ok
    new = np.array(rows) if kind == "V" else _row_mat(rows[0], g)
    return new, its, oks


# ---------------------------------------------------------------------------
# E-step


def _params(coefs, designs):
    alpha = np.stack([np.exp(w @ c.T) for w, c in zip(designs[1:4], coefs[1:4])])
    beta = np.exp(designs[4] @ coefs[4].T)
    if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))):
        raise NumericalError("expert parameters overflowed")
    return alpha, beta


def _e_step(y, designs, coefs, q):
    alpha, beta = _params(coefs, designs)
    if np.any(alpha[2] <= ALPHA3_FLOOR):
        raise NumericalError("alpha3 fell to the numerical floor")
    out, status = quad.integrate_cells(
        y[:, :1], y[:, 1:], alpha[0], alpha[1], alpha[2], beta,
        tol=q.relative_tolerance, max_levels=int(q.max_levels),
    )
    if np.any(status != quad.OK):
        i, j = (int(v[0]) for v in np.nonzero(status != quad.OK))
        raise FittingError(
            f"quadrature failed for observation {i + 1}, component {j + 1}", cell=(i, j)
        )
    logf = out[..., quad.LOGF]
    joint = log_gating(coefs[0], designs[0]) + logf
    lse = logsumexp(joint, axis=1, keepdims=True)
    z = np.exp(joint - lse)
    z /= z.sum(axis=1, keepdims=True)
    x3 = out[..., quad.EX3]
    return EStepCache(
        z=z,
        x1=y[:, :1] - x3,
        x2=y[:, 1:] - x3,
        x3=x3,
        lx1=out[..., quad.ELX1],
        lx2=out[..., quad.ELX2],
        lx3=out[..., quad.ELX3],
        logf=logf,
        loglik=float(np.sum(lse)),
    )


def e_step(data: Dataset, model: FittedModel, q: QuadratureConfig | None = None) -> EStepCache:
    """Responsibilities, latent moments and log-likelihood under ``model``."""
    designs, _ = build_designs(data, model.spec, model.encodings)
    return _e_step(data.y, designs, list(model.coefs), q or DEFAULT_QUADRATURE)


def _m_sweep(spec, designs, coefs, cache):
    """One conditional-maximisation sweep; returns new coefs and inner iteration counts."""
    coefs = list(coefs)
    inner = []
    flags = []
    c, it, ok = m_step_gating(spec.gating.kind, cache.z, designs[0], coefs[0])
    coefs[0] = c
    inner.append(it)
    flags.append(ok)
    for k in range(3):
        log_beta = designs[4] @ coefs[4].T
        c, it, ok = m_step_alpha(spec.alpha[k].kind, cache.z, designs[k + 1], log_beta, cache.lx[k], coefs[k + 1])
        coefs[k + 1] = c
        inner.append(it)
        flags.append(ok)
    alpha, _ = _params(coefs, designs)
    c, it, ok = m_step_beta(
        spec.beta.kind, cache.z, designs[4], alpha.sum(axis=0), cache.x1 + cache.x2 + cache.x3, coefs[4]
    )
    coefs[4] = c
    inner.append(it)
    flags.append(ok)
    return coefs, inner, flags


# ---------------------------------------------------------------------------
# initialisation


def _pseudo_cache(y, z, x3):
    x1 = y[:, :1] - x3
    x2 = y[:, 1:] - x3
    return EStepCache(
        z=z, x1=x1, x2=x2, x3=x3, lx1=np.log(x1), lx2=np.log(x2), lx3=np.log(x3),
        logf=np.zeros_like(z), loglik=-np.inf,
    )


def _moment_start(spec, designs, z, x):
    """Log-scale starting coefficients from weighted gamma moment matches."""
    n, g = z.shape
    coefs = []
    tau = z.sum(axis=0) / n
    gate = np.zeros((g, designs[0].shape[1]))
    if spec.gating.kind != "E":
        gate[:, 0] = np.log(tau) - np.log(tau[-1])
    coefs.append(gate)
    log_alpha = np.zeros((3, g))
    log_beta = np.zeros(g)
    for j in range(g):
        om = z[:, j] / z[:, j].sum()
        mean = np.array([om @ xk[:, j] for xk in x])
        var = np.array([om @ (xk[:, j] - mk) ** 2 for xk, mk in zip(x, mean)])
        var = np.maximum(var, 1e-12 * mean**2 + 1e-300)
        b = float(np.exp(np.mean(np.log(mean / var))))
        log_beta[j] = math.log(b)
        log_alpha[:, j] = np.log(np.clip(mean * b, 1e-3, 1e3))
    for k, net in enumerate(spec.alpha):
        c = np.zeros((g, designs[k + 1].shape[1]))
        c[:, 0] = log_alpha[k] if net.component_specific else float(tau @ log_alpha[k])
        coefs.append(c)
    c = np.zeros((g, designs[4].shape[1]))
    c[:, 0] = log_beta if spec.beta.component_specific else float(tau @ log_beta)
    coefs.append(c)
    return coefs


def _min_size(designs):
    return max(w.shape[1] for w in designs) + 1


def initialize(data: Dataset, spec: ModelSpec, seed: int, restart: int = 0, sweeps: int = 3):
    """Starting coefficients for one restart.

    Hard memberships come from k-means on ``(log y1, log y2)`` (standardised);
    the latent ``x3`` is set to ``min(y1, y2) / 2`` on the first restart and
    drawn uniformly inside ``(0, min(y1, y2))`` on later ones. A few
    conditional-maximisation sweeps on this pseudo-complete data give the
    coefficients. Returns the list of five coefficient matrices.
    """
    designs, _ = build_designs(data, spec)
    return _initialize(data.y, spec, designs, seed, restart, sweeps)


def _initialize(y, spec, designs, seed, restart, sweeps):
    n = y.shape[0]
    g = spec.g
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(restart)])))
    if g == 1:
        z = np.ones((n, 1))
    else:
        feats = np.log(y)
        feats = (feats - feats.mean(axis=0)) / np.maximum(feats.std(axis=0), 1e-12)
        need = _min_size(designs)
        for _ in range(25):
            _, labels = kmeans2(feats, g, minit="++", rng=rng)
            counts = np.bincount(labels, minlength=g)
            if counts.min() >= need:
                break
        else:
            raise FittingError("k-means could not produce non-degenerate clusters")
        z = np.eye(g)[labels]
    m = np.minimum(y[:, 0], y[:, 1])[:, None]
    if restart == 0:
        x3 = np.repeat(m / 2.0, g, axis=1)
    else:
        x3 = m * rng.uniform(0.05, 0.95, size=(n, g))
    cache = _pseudo_cache(y, z, x3)
    coefs = _moment_start(spec, designs, z, (cache.x1, cache.x2, cache.x3))
    for _ in range(sweeps):
        coefs, _, _ = _m_sweep(spec, designs, coefs, cache)
    return coefs


# ---------------------------------------------------------------------------
# driver


def _run(y, spec, designs, coefs, cfg, q):
    cache = _e_step(y, designs, coefs, q)
    need = _min_size(designs) if spec.g > 1 else 0
    ll_hist = [cache.loglik]
    trace = []
    converged = False
    it = 0
    for it in range(1, int(cfg.max_iter) + 1):
        coefs, inner, flags = _m_sweep(spec, designs, coefs, cache)
        cache = _e_step(y, designs, coefs, q)
        ll_prev, ll = ll_hist[-1], cache.loglik
        if ll < ll_prev - cfg.allow_decrease * abs(ll_prev):
            raise MonotonicityError(
                f"log-likelihood fell from {ll_prev:.10g} to {ll:.10g} at iteration {it}"
            )
        if need and cache.z.sum(axis=0).min() < need:
            raise FittingError(f"a component emptied at iteration {it}")
        rel = abs(ll - ll_prev) / abs(ll)
        ll_hist.append(ll)
        trace.append((it, ll, rel) + tuple(inner))
        if cfg.verbose:
            log.info("iter %d loglik %.10f rel %.3e inner %s", it, ll, rel, inner)
        if cfg.use_aitken and len(ll_hist) >= 3:
            l0, l1, l2 = ll_hist[-3:]
            denom = l1 - l0
            acc = (l2 - l1) / denom if denom != 0 else 0.0
            if 0 < acc < 1:
                limit = l1 + (l2 - l1) / (1 - acc)
                converged = abs(limit - l2) < cfg.tol * abs(l2)
            else:
                converged = rel < cfg.tol
        else:
            converged = rel < cfg.tol
        if converged:
            break
    return coefs, cache, converged, it, tuple(trace)


def _finish(data, spec, designs, labels, coefs, cache, converged, it, trace):
    dims = [w.shape[1] for w in designs]
    model = FittedModel(
        spec=spec,
        gating_coef=coefs[0],
        alpha_coef=tuple(coefs[1:4]),
        beta_coef=coefs[4],
        design_labels=labels,
        encodings=data.encodings(spec.covariate_names()),
        loglik=cache.loglik,
        n_params=param_count(spec, dims),
        n_obs=data.n,
        responsibilities=cache.z,
        converged=bool(converged),
        iterations=int(it),
        trace=trace,
    )
    return canonicalize(model, designs)


def fit(
    data: Dataset,
    spec: ModelSpec,
    cfg: EMConfig | None = None,
    q: QuadratureConfig | None = None,
    start=None,
) -> FittedModel:
    """Fit ``spec`` by EM, keeping the best of ``cfg.restarts`` starts.

    ``start`` (a :class:`FittedModel` of the same spec, or a list of five
    coefficient matrices) replaces the random restarts by a single run from
    that point.
    """
    cfg = cfg or EMConfig()
    q = q or DEFAULT_QUADRATURE
    designs, labels = build_designs(data, spec)
    y = data.y
    if start is not None:
        coefs = list(start.coefs) if isinstance(start, FittedModel) else list(start)
        shapes = [(spec.g, w.shape[1]) for w in designs]
        if [np.shape(c) for c in coefs] != shapes:
            raise ParameterError("starting coefficients do not match the spec")
        starts = [("warm", [np.array(c, dtype=float) for c in coefs])]
    else:
        starts = [(r, None) for r in range(int(cfg.restarts))]

    best, best_ll, diagnostics = None, -np.inf, []
    for tag, coefs in starts:
        try:
            if coefs is None:
                coefs = _initialize(y, spec, designs, cfg.seed, tag, cfg.init_sweeps)
            res = _run(y, spec, designs, coefs, cfg, q)
        except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
            diagnostics.append(f"restart {tag}: {type(exc).__name__}: {exc}")
            log.debug("restart %s failed: %s", tag, exc)
            continue
        ll = res[1].loglik
        diagnostics.append(f"restart {tag}: loglik {ll:.6f} iterations {res[3]}")
        if best is None or ll > best_ll + 1e-9:
            best, best_ll = res, ll
    if best is None:
        raise FittingError(f"all starts failed for {spec.describe()}", diagnostics=diagnostics)
    return _finish(data, spec, designs, labels, *best)


# ---------------------------------------------------------------------------
# identifiability


@dataclass(frozen=True)
class BlockReport:
    network: str
    component: int | None
    min_eigenvalue: float
    max_eigenvalue: float
    ratio: float
    negative_definite: bool
    near_zero: bool


def block_objectives(model: FittedModel, data: Dataset, q: QuadratureConfig | None = None):
    """The expected complete-data objective split into coefficient blocks.

    Returns a list of ``(network, component, x0, fun)`` where ``fun(x)``
    returns ``(value, gradient, hessian)``. Component-specific networks give
    one block per component; shared networks one block.
    """
    spec = model.spec
    designs = model_designs_for(model, data)
    coefs = list(model.coefs)
    cache = _e_step(data.y, designs, coefs, q or DEFAULT_QUADRATURE)
    z = cache.z
    g = spec.g
    out = []
    if g > 1 and spec.gating.kind in ("C", "V"):
        w0 = designs[0]
        theta = (coefs[0][:-1] - coefs[0][-1]).ravel()
        out.append(("gating", None, theta, lambda t, w0=w0: gating_objective(t, w0, z)))
    alpha, beta = _params(coefs, designs)
    log_beta = np.log(beta)
    names = ("alpha1", "alpha2", "alpha3")
    for k in range(3):
        kind = spec.alpha[k].kind
        w = designs[k + 1]
        for j, (om, a) in enumerate(shape_blocks(kind, z, log_beta, cache.lx[k])):
            comp = j if kind in ("C", "V") else None
            out.append(
                (names[k], comp, coefs[k + 1][j].copy(),
                 lambda gm, w=w, om=om, a=a: shape_objective(gm, w, om, a))
            )
    kind = spec.beta.kind
    w = designs[4]
    for j, (om, s, x) in enumerate(rate_blocks(kind, z, alpha.sum(axis=0), cache.x1 + cache.x2 + cache.x3)):
        comp = j if kind in ("C", "V") else None
        out.append(
            ("beta", comp, coefs[4][j].copy(), lambda gm, w=w, om=om, s=s, x=x: rate_objective(gm, w, om, s, x))
        )
    return out


def model_designs_for(model, data):
    designs, _ = build_designs(data, model.spec, model.encodings)
    return designs


def check_identifiability(model: FittedModel, data: Dataset, q=None, h=1e-5, near_zero_ratio=1e-6):
    """Finite-difference Hessian of each block; all must be negative definite.

    The Hessian is assembled by central differences of the analytic block
    gradients. ``near_zero`` flags blocks whose smallest eigenvalue magnitude
    is below ``near_zero_ratio`` times the largest magnitude over all blocks.
    Returns ``(reports, passed)``.
    """
    blocks = block_objectives(model, data, q)
    eigs = []
    for name, comp, x0, fun in blocks:
        p = x0.size
        hess = np.zeros((p, p))
        for j in range(p):
            step = h * max(1.0, abs(x0[j]))
            e = np.zeros(p)
            e[j] = step
            gp = fun(x0 + e)[1]
            gm = fun(x0 - e)[1]
            hess[:, j] = (gp - gm) / (2 * step)
        hess = 0.5 * (hess + hess.T)
        eigs.append(np.linalg.eigvalsh(hess))
    scale = max(float(np.max(np.abs(ev))) for ev in eigs) if eigs else 1.0
    reports = []
    for (name, comp, _, _), ev in zip(blocks, eigs):
        top = float(np.max(ev))
        low = float(np.min(np.abs(ev)))
        reports.append(
            BlockReport(
                network=name,
                component=None if comp is None else comp + 1,
                min_eigenvalue=float(np.min(ev)),
                max_eigenvalue=top,
                ratio=low / scale,
                negative_definite=top < -near_zero_ratio * scale,
                near_zero=low < near_zero_ratio * scale,
            )
        )
    return reports, all(r.negative_definite for r in reports)
