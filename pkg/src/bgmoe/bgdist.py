"""Bivariate gamma distribution built by trivariate reduction.

``Y = (X1 + X3, X2 + X3)`` with independent ``Xk ~ Gamma(alpha_k, beta)``.
The density needs a one-dimensional integral over the shared latent ``X3``;
it is evaluated in log space by the double-exponential rule in
``_quadrature``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _quadrature as quad
from .errors import DomainError, NumericalError, ParameterError

ALPHA3_FLOOR = 1e-8


@dataclass(frozen=True)
class BGParams:
    """Shapes ``alpha1, alpha2, alpha3`` and common rate ``beta``."""

    alpha1: float
    alpha2: float
    alpha3: float
    beta: float

    def __post_init__(self):
        vals = self.as_tuple()
        if not all(math.isfinite(v) and v > 0 for v in vals):
            raise ParameterError(f"bivariate gamma parameters must be positive and finite: {vals}")
        if self.alpha3 <= ALPHA3_FLOOR:
            raise ParameterError(f"alpha3={self.alpha3} is at or below the floor {ALPHA3_FLOOR}")

    def as_tuple(self):
        return (float(self.alpha1), float(self.alpha2), float(self.alpha3), float(self.beta))


@dataclass(frozen=True)
class QuadratureConfig:
    relative_tolerance: float = 1e-10
    max_levels: int = 12
    scheme: str = "double-exponential"

    def __post_init__(self):
        if not 0 < self.relative_tolerance <= 1e-4:
            raise ParameterError("relative_tolerance must lie in (0, 1e-4]")
        if int(self.max_levels) < 4:
            raise ParameterError("max_levels must be at least 4")
        if self.scheme != "double-exponential":
            raise ParameterError(f"unknown quadrature scheme {self.scheme!r}")


@dataclass(frozen=True)
class ConditionalMoments:
    """Posterior expectations of the latent gammas given ``(y1, y2)``."""

    e_x3: float
    e_x1: float
    e_x2: float
    e_log_x3: float
    e_log_x1: float
    e_log_x2: float


DEFAULT_QUADRATURE = QuadratureConfig()
RATIO_AGREEMENT = 1e-8


def _check_y(y1, y2):
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    if not (np.all(np.isfinite(y1)) and np.all(np.isfinite(y2))):
        raise DomainError("responses must be finite")
    if np.any(y1 <= 0) or np.any(y2 <= 0):
        raise DomainError("bivariate gamma responses must be strictly positive")
    return y1, y2


def _raise_unconverged(out, status):
    bad = np.flatnonzero(np.ravel(status) != quad.OK)
    i = int(bad[0])
    flat = out.reshape(-1, quad.N_OUT)
    if np.ravel(status)[i] == quad.DIVERGENT:
        raise NumericalError("latent integral diverges at the tie y1 == y2", estimate=math.inf)
    raise NumericalError(
        f"quadrature did not reach tolerance after {int(flat[i, quad.LEVELS])} levels",
        estimate=float(flat[i, quad.LOGF]),
        error_bound=float(flat[i, quad.ERR]),
    )


def latent_integrals(y1, y2, a1, a2, a3, b, q: QuadratureConfig | None = None, moments=True):
    """Vectorised log density and latent moments for many cells.

    All arguments broadcast together. Returns a dict of arrays with keys
    ``logf`` and, when ``moments`` is true, ``e_x3, e_log_x1, e_log_x2,
    e_log_x3``. ``e_x3`` here is the direct quadrature ``m * E[t]``. Raises
    :class:`NumericalError` if any cell fails to converge.
    """
    q = q or DEFAULT_QUADRATURE
    out, status = quad.integrate_cells(
        y1, y2, a1, a2, a3, b, tol=q.relative_tolerance, max_levels=int(q.max_levels), moments=moments
    )
    if np.any(status != quad.OK):
        _raise_unconverged(out, status)
    res = {"logf": out[..., quad.LOGF]}
    if moments:
        res["e_x3"] = out[..., quad.EX3]
        res["e_log_x1"] = out[..., quad.ELX1]
        res["e_log_x2"] = out[..., quad.ELX2]
        res["e_log_x3"] = out[..., quad.ELX3]
    return res


def log_density(y1, y2, p: BGParams, q: QuadratureConfig | None = None) -> float:
    """Log of the bivariate gamma density at ``(y1, y2)``."""
    _check_y(y1, y2)
    return float(latent_integrals(y1, y2, *p.as_tuple(), q=q, moments=False)["logf"])


def log_density_grid(y1, y2, p: BGParams, q: QuadratureConfig | None = None):
    """Elementwise log density over broadcast arrays of responses."""
    y1, y2 = _check_y(y1, y2)
    return latent_integrals(y1, y2, *p.as_tuple(), q=q, moments=False)["logf"]


def conditional_moments(y1, y2, p: BGParams, q: QuadratureConfig | None = None) -> ConditionalMoments:
    """Posterior latent moments given one observation.

    ``e_x3`` is computed as ``(alpha3/beta) f(y; alpha3+1) / f(y; alpha3)``
    and cross-checked against direct quadrature of ``x3`` times the
    integrand; the two must agree to 1e-8 relative.
    """
    y1, y2 = _check_y(y1, y2)
    y1, y2 = float(y1), float(y2)
    a1, a2, a3, b = p.as_tuple()
    direct = latent_integrals(y1, y2, a1, a2, a3, b, q=q)
    shifted = latent_integrals(y1, y2, a1, a2, a3 + 1.0, b, q=q, moments=False)
    ratio = math.exp(float(shifted["logf"] - direct["logf"]))
    e_x3 = (a3 / b) * ratio
    e_direct = float(direct["e_x3"])
    if abs(e_x3 - e_direct) > RATIO_AGREEMENT * abs(e_direct):
        raise NumericalError(
            f"ratio and direct latent means disagree: {e_x3!r} vs {e_direct!r}",
            estimate=e_x3,
            error_bound=abs(e_x3 - e_direct),
        )
    m = min(y1, y2)
    e_x3 = min(max(e_x3, math.nextafter(0.0, 1.0)), math.nextafter(m, 0.0))
    return ConditionalMoments(
        e_x3=e_x3,
        e_x1=y1 - e_x3,
        e_x2=y2 - e_x3,
        e_log_x3=float(direct["e_log_x3"]),
        e_log_x1=float(direct["e_log_x1"]),
        e_log_x2=float(direct["e_log_x2"]),
    )


def sample(p: BGParams, n: int, seed: int):
    """Draw ``n`` pairs; returns an ``(n, 2)`` array."""
    if int(n) < 1:
        raise ParameterError("n must be at least 1")
    rng = np.random.Generator(np.random.Philox(seed))
    a1, a2, a3, b = p.as_tuple()
    x = rng.gamma(shape=[a1, a2, a3], scale=1.0 / b, size=(int(n), 3))
    return np.column_stack([x[:, 0] + x[:, 2], x[:, 1] + x[:, 2]])


def moments(p: BGParams):
    """Mean vector and covariance matrix."""
    a1, a2, a3, b = p.as_tuple()
    mean = np.array([(a1 + a3) / b, (a2 + a3) / b])
    cov = np.array([[a1 + a3, a3], [a3, a2 + a3]]) / b**2
    return mean, cov


def joint_rect_prob_mc(p: BGParams, c1: float, c2: float, n: int, seed: int):
    """Monte Carlo ``P(c1<=Y1<=c2, c1<=Y2<=c2)`` and the product of marginals.

    Both estimates come from the same sample.
    """
    if not c1 < c2:
        raise ParameterError("the window needs c1 < c2")
    if c1 < 0:
        raise ParameterError("c1 must be non-negative")
    if int(n) < 10_000:
        raise ParameterError("n must be at least 1e4")
    y = sample(p, n, seed)
    in1 = (y[:, 0] >= c1) & (y[:, 0] <= c2)
    in2 = (y[:, 1] >= c1) & (y[:, 1] <= c2)
    return float(np.mean(in1 & in2)), float(np.mean(in1) * np.mean(in2))
