"""Double-exponential quadrature of the bivariate gamma latent integral.

For each cell ``(y1, y2, a1, a2, a3, b)`` we integrate over the shared latent
``x3 = m * t`` with ``m = min(y1, y2)`` and ``t = 1 / (1 + exp(-pi sinh u))``.
The tanh-sinh Jacobian ``t (1 - t) pi cosh u`` is folded into the powers of
``t`` and ``1 - t`` so both endpoints are handled in log space, which keeps
shapes down to 1e-8 representable.

Two backends share this contract: the compiled kernel in ``_kernels`` and the
numpy implementation below. ``BACKEND`` names the one selected at import;
``BGMOE_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

U_MAX = 30.0
TAIL_MARGIN = 45.0
ROUNDING_FLOOR = 1e-14

# output columns
LOGF, EX3, ELX1, ELX2, ELX3, ERR, LEVELS = range(7)
N_OUT = 7

# status codes
OK, NOT_CONVERGED, DIVERGENT = 0, 1, 2


@lru_cache(maxsize=4)
def node_table(max_levels: int):
    """Node quantities on the finest grid ``h = 2**-max_levels``.

    Returns ``(logt, log1mt, t, omt, logw)``, indexed by ``center + k``.
    """
    h = 2.0 ** -max_levels
    kmax = int(round(U_MAX / h))
    u = np.arange(-kmax, kmax + 1, dtype=float) * h
    s = np.pi * np.sinh(u)
    logt = -np.logaddexp(0.0, -s)
    log1mt = -np.logaddexp(0.0, s)
    logw = np.log(np.pi) + np.abs(u) + np.log1p(np.exp(-2 * np.abs(u))) - math.log(2.0)
    tables = (logt, log1mt, np.exp(logt), np.exp(log1mt), logw)
    for a in tables:
        a.flags.writeable = False
    return tables


def tail_extent(shape):
    """Half-width in ``u`` beyond which ``(t or 1-t)**shape`` is negligible.

    Rounded up to a multiple of 1/2 so every level's grid nests exactly.
    """
    shape = np.asarray(shape, dtype=float)
    u = np.arcsinh(TAIL_MARGIN / (np.pi * shape))
    u = np.arcsinh((TAIL_MARGIN + np.minimum(u, U_MAX)) / (np.pi * shape))
    u = np.clip(u, 3.0, U_MAX)
    return np.ceil(2.0 * u) / 2.0


def _setup(y1, y2, a1, a2, a3, b):
    m = np.minimum(y1, y2)
    tie1 = y1 == m
    tie2 = y2 == m
    cr = 1.0 + np.where(tie1, a1 - 1.0, 0.0) + np.where(tie2, a2 - 1.0, 0.0)
    logm = np.log(m)
    const = (
        a3 * logm
        + np.where(tie1, (a1 - 1.0) * logm, 0.0)
        + np.where(tie2, (a2 - 1.0) * logm, 0.0)
    )
    prefactor = (
        (a1 + a2 + a3) * np.log(b) - b * (y1 + y2) - gammaln(a1) - gammaln(a2) - gammaln(a3)
    )
    ul = tail_extent(a3)
    ur = tail_extent(np.where(cr > 0, cr, 1.0))
    return m, logm, tie1, tie2, cr, const + prefactor, ul, ur


def _error_estimate(d, level):
    """Error bound from the change between successive levels.

    Under the doubly exponential convergence of the rule the error after a
    level is far below the change it produced, so the change itself is a
    conservative bound. Differences at rounding level count as converged.
    """
    if level < 2:
        return np.full_like(d, np.inf)
    return np.where(d <= ROUNDING_FLOOR, 0.0, d)


def integrate_python(y1, y2, a1, a2, a3, b, tol, max_levels, moments):
    """Vectorised numpy implementation; refines only unconverged cells."""
    n = y1.shape[0]
    out = np.full((n, N_OUT), np.nan)
    status = np.full(n, NOT_CONVERGED, dtype=np.int32)
    if n == 0:
        return out, status
    logt_t, log1mt_t, t_t, omt_t, logw_t = node_table(max_levels)
    center = (logt_t.shape[0] - 1) // 2
    m, logm, tie1, tie2, cr, offset, ul, ur = _setup(y1, y2, a1, a2, a3, b)
    d1 = y1 - m
    d2 = y2 - m
    bm = b * m

    status[cr <= 0] = DIVERGENT
    active = np.flatnonzero(cr > 0)
    shift = np.full(n, -np.inf)
    sums = np.zeros((n, 6))  # S0, St, S1mt, Sl1, Sl2, Sl3
    prev = np.full((n, 5), np.nan)

    for level in range(max_levels):
        if active.size == 0:
            break
        h = 0.5 ** (level + 1)
        stride = 1 << (max_levels - 1 - level)
        kl = int(round(ul[active].max() / h))
        kr = int(round(ur[active].max() / h))
        if level == 0:
            ks = np.arange(-kl, kr + 1)
        else:
            ks = np.arange(-kl + 1, kr + 1, 2)
        idx = center + ks * stride
        u = ks * h
        lt, l1t, tt, ot, lw = (arr[idx] for arr in (logt_t, log1mt_t, t_t, omt_t, logw_t))

        c = active
        inside = (u[None, :] >= -ul[c, None]) & (u[None, :] <= ur[c, None])
        ell = a3[c, None] * lt + cr[c, None] * l1t + lw + bm[c, None] * tt
        lx1 = np.where(
            tie1[c, None], logm[c, None] + l1t, np.log(d1[c, None] + m[c, None] * ot)
        )
        lx2 = np.where(
            tie2[c, None], logm[c, None] + l1t, np.log(d2[c, None] + m[c, None] * ot)
        )
        ell = ell + np.where(tie1[c, None], 0.0, (a1[c, None] - 1.0) * lx1)
        ell = ell + np.where(tie2[c, None], 0.0, (a2[c, None] - 1.0) * lx2)
        ell = np.where(inside, ell, -np.inf)

        new_shift = np.maximum(shift[c], ell.max(axis=1))
        rescale = np.exp(shift[c] - new_shift)
        e = np.exp(ell - new_shift[:, None])
        s = sums[c] * rescale[:, None]
        s[:, 0] += e.sum(axis=1)
        if moments:
            s[:, 1] += (e * tt).sum(axis=1)
            s[:, 2] += (e * ot).sum(axis=1)
            s[:, 3] += (e * np.where(inside, lx1, 0.0)).sum(axis=1)
            s[:, 4] += (e * np.where(inside, lx2, 0.0)).sum(axis=1)
            s[:, 5] += (e * np.where(inside, logm[c, None] + lt, 0.0)).sum(axis=1)
        sums[c] = s
        shift[c] = new_shift

        log_i = math.log(h) + new_shift + np.log(s[:, 0])
        cur = np.empty((c.size, 5))
        cur[:, 0] = log_i
        if moments:
            cur[:, 1] = s[:, 1] / s[:, 0]
            cur[:, 2:5] = s[:, 3:6] / s[:, 0, None]
        else:
            cur[:, 1:] = 0.0
        delta = np.abs(cur - prev[c])
        delta[:, 2:] /= 1.0 + np.abs(cur[:, 2:])
        d = np.max(delta, axis=1) if moments else delta[:, 0]
        d = np.where(np.isnan(d), np.inf, d)
        err = _error_estimate(d, level)
        prev[c] = cur
        out[c, ERR] = err
        out[c, LEVELS] = level + 1
        done = err <= tol
        status[c[done]] = OK
        active = c[~done]

    ok = status != DIVERGENT
    s = sums[ok]
    out[ok, LOGF] = prev[ok, 0] + offset[ok]
    if moments:
        mo = m[ok]
        frac_t = s[:, 1] / s[:, 0]
        frac_1mt = s[:, 2] / s[:, 0]
        ex3 = np.where(frac_t <= frac_1mt, mo * frac_t, mo - mo * frac_1mt)
        out[ok, EX3] = np.clip(ex3, np.nextafter(0.0, 1.0), np.nextafter(mo, 0.0))
        out[ok, ELX1:ELX3 + 1] = s[:, 3:6] / s[:, 0, None]
    out[~ok, LOGF] = np.inf
    return out, status


try:
    if os.environ.get("BGMOE_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure python requested")
    from . import _kernels
except ImportError:  # pragma: no cover - depends on build
    _kernels = None

BACKEND = "cython" if _kernels is not None else "python"


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("BGMOE_THREADS", "1")))
    except ValueError:
        return 1


def integrate_cells(y1, y2, a1, a2, a3, b, tol=1e-10, max_levels=12, moments=True, backend=None):
    """Integrate every cell; returns ``(out, status)``.

    ``out`` has columns ``LOGF, EX3, ELX1, ELX2, ELX3, ERR, LEVELS``.
    Inputs are broadcast to a common 1-D shape.
    """
    arrs = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (y1, y2, a1, a2, a3, b)))
    shape = arrs[0].shape
    y1, y2, a1, a2, a3, b = (np.ascontiguousarray(x.ravel()) for x in arrs)
    backend = backend or BACKEND
    if backend == "cython":
        if _kernels is None:
            raise RuntimeError("compiled kernel not available")
        n = y1.shape[0]
        out = np.full((n, N_OUT), np.nan)
        status = np.zeros(n, dtype=np.int32)
        tables = node_table(max_levels)
        workers = min(worker_count(), max(1, n // 64))

        def run(lo, hi):
            _kernels.integrate_cells(
                y1, y2, a1, a2, a3, b, tol, max_levels, moments, *tables, out, status, lo, hi
            )

        if workers == 1:
            run(0, n)
        else:
            bounds = np.linspace(0, n, workers + 1).astype(int)
            with ThreadPoolExecutor(workers) as pool:
                list(pool.map(run, bounds[:-1], bounds[1:]))
    else:
        out, status = integrate_python(y1, y2, a1, a2, a3, b, tol, max_levels, moments)
    return out.reshape(shape + (N_OUT,)), status.reshape(shape)
