"""Predictive scores and clustering agreement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ParameterError
from .moe import FittedModel, component_params, mixing_probs, model_designs
from .sim import observation_rng

TARGETS = ("Y1", "Y2", "Sum")


def crps_ensemble(samples, observations):
    """Sample CRPS ``mean|s - y| - mean|s - s'| / 2`` for each row.

    ``samples`` has shape (n, m) (or (m,) with a scalar observation). The
    pairwise term uses the sorted-sample identity
    ``sum_ij |s_i - s_j| = 2 sum_i (2i - m - 1) s_(i)``.
    """
    s = np.asarray(samples, dtype=float)
    y = np.asarray(observations, dtype=float)
    scalar = s.ndim == 1
    s = np.atleast_2d(s)
    y = np.reshape(y, (-1,))
    m = s.shape[1]
    if m < 2:
        raise ParameterError("CRPS needs at least two samples")
    srt = np.sort(s, axis=1)
    rank = 2.0 * np.arange(1, m + 1) - m - 1
    spread = 2.0 * (srt @ rank) / m**2
    out = np.mean(np.abs(s - y[:, None]), axis=1) - 0.5 * spread
    return float(out[0]) if scalar else out


def crps_empirical(predictive_samples, observation) -> float:
    return float(crps_ensemble(np.asarray(predictive_samples, dtype=float), observation))


def rmse(predictions, actuals) -> float:
    p = np.asarray(predictions, dtype=float)
    a = np.asarray(actuals, dtype=float)
    if p.shape != a.shape:
        raise ParameterError("predictions and actuals differ in length")
    return float(np.sqrt(np.mean((p - a) ** 2)))


def gini_ordered(predictions, actuals) -> float:
    """Twice the area between the diagonal and the ordered concentration curve.

    Observations are sorted by ascending prediction and actual shares are
    accumulated; tied predictions form one linear segment, which is the
    average over their orderings.
    """
    p = np.asarray(predictions, dtype=float)
    a = np.asarray(actuals, dtype=float)
    if p.shape != a.shape or p.size < 2:
        raise ParameterError("need at least two paired values")
    total = a.sum()
    if total == 0 or np.all(a == a[0]):
        return 0.0
    order = np.argsort(p, kind="stable")
    ps, as_ = p[order], a[order]
    ends = np.flatnonzero(np.r_[ps[1:] != ps[:-1], True]) + 1
    x = np.r_[0.0, ends / p.size]
    lor = np.r_[0.0, np.cumsum(as_)[ends - 1] / total]
    gap = x - lor
    return float(np.sum(np.diff(x) * (gap[1:] + gap[:-1])))


def wasserstein_1d(a, b) -> float:
    """Order-1 Wasserstein distance between two empirical samples.

    Integrates ``|Qa(u) - Qb(u)|`` over the merged quantile breakpoints
    ``k/n`` and ``k/m``, splitting mass where they interleave.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ParameterError("samples must be non-empty")
    u = np.union1d(np.arange(1, a.size + 1) / a.size, np.arange(1, b.size + 1) / b.size)
    u = np.r_[0.0, u]
    mid = 0.5 * (u[1:] + u[:-1])
    qa = a[np.minimum((mid * a.size).astype(int), a.size - 1)]
    qb = b[np.minimum((mid * b.size).astype(int), b.size - 1)]
    return float(np.sum(np.diff(u) * np.abs(qa - qb)))


def _contingency(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ParameterError("label vectors differ in length")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def adjusted_rand(labels_a, labels_b) -> float:
    """Adjusted Rand index from the pair-counting contingency table."""
    table = _contingency(labels_a, labels_b)
    n = table.sum()

    def pairs(x):
        x = np.asarray(x, dtype=float)
        return float(np.sum(x * (x - 1) / 2))

    index = pairs(table)
    rows = pairs(table.sum(axis=1))
    cols = pairs(table.sum(axis=0))
    total = n * (n - 1) / 2
    expected = rows * cols / total if total else 0.0
    top = 0.5 * (rows + cols)
    if top == expected:
        return 1.0
    return float((index - expected) / (top - expected))


def misclassification(labels_a, labels_b) -> float:
    """Smallest error rate over matchings of the two label sets."""
    table = _contingency(labels_a, labels_b)
    r, c = linear_sum_assignment(-table)
    return float(1.0 - table[r, c].sum() / table.sum())


# ---------------------------------------------------------------------------
# predictive distributions


def predictive_samples(model: FittedModel, data, m: int, seed: int):
    """``m`` draws of ``(y1, y2)`` for every covariate row; shape (n, m, 2).

    A component is drawn from the gating probabilities and the pair from its
    bivariate gamma. Row ``i`` uses the stream keyed by ``(seed, i)``.
    """
    designs = model_designs(model, data)
    alpha, beta = component_params(model, designs)
    return mixture_samples(mixing_probs(model, designs), alpha, beta, m, seed)


def mixture_samples(tau, alpha, beta, m: int, seed: int):
    """Predictive draws from per-row mixture parameters.

    ``tau`` and ``beta`` have shape (n, G), ``alpha`` (3, n, G).
    """
    tau = np.asarray(tau, dtype=float)
    n, g = tau.shape
    out = np.empty((n, int(m), 2))
    for i in range(n):
        rng = observation_rng(seed, i)
        comp = rng.choice(g, size=int(m), p=tau[i] / tau[i].sum())
        shapes = alpha[:, i, comp].T
        x = rng.standard_gamma(shapes) / beta[i, comp][:, None]
        out[i, :, 0] = x[:, 0] + x[:, 2]
        out[i, :, 1] = x[:, 1] + x[:, 2]
    return out


def glm_predictive_samples(mu, dispersion, m: int, seed: int):
    """Independent gamma draws per margin with mean ``mu`` and shape ``1/phi``.

    ``mu`` has shape (n, 2) and ``dispersion`` two entries; returns (n, m, 2).
    """
    mu = np.asarray(mu, dtype=float)
    phi = np.asarray(dispersion, dtype=float)
    n = mu.shape[0]
    out = np.empty((n, int(m), 2))
    shape = 1.0 / phi
    for i in range(n):
        rng = observation_rng(seed, i)
        out[i] = rng.standard_gamma(np.broadcast_to(shape, (int(m), 2))) * (mu[i] * phi)
    return out


@dataclass(frozen=True)
class ScoreReport:
    """Scores per target (``Y1``, ``Y2``, ``Sum``)."""

    crps: dict
    rmse: dict
    gini: dict
    wasserstein: dict

    def rows(self, label=""):
        out = []
        for t in TARGETS:
            out.append((t, label, self.crps[t], self.rmse[t], self.gini[t], self.wasserstein[t]))
        return out


def score(pred_mean, samples, actual) -> ScoreReport:
    """Score point predictions ``(n, 2)`` and predictive samples ``(n, m, 2)``.

    CRPS is averaged over rows; the Wasserstein distance compares the pooled
    predictive samples with the observed values.
    """
    pred_mean = np.asarray(pred_mean, dtype=float)
    samples = np.asarray(samples, dtype=float)
    actual = np.asarray(actual, dtype=float)
    views = {
        "Y1": (pred_mean[:, 0], samples[..., 0], actual[:, 0]),
        "Y2": (pred_mean[:, 1], samples[..., 1], actual[:, 1]),
        "Sum": (pred_mean.sum(axis=1), samples.sum(axis=2), actual.sum(axis=1)),
    }
    crps, rm, gi, ws = {}, {}, {}, {}
    for t, (p, s, a) in views.items():
        crps[t] = float(np.mean(crps_ensemble(s, a)))
        rm[t] = rmse(p, a)
        gi[t] = gini_ordered(p, a)
        ws[t] = wasserstein_1d(s.ravel(), a)
    return ScoreReport(crps, rm, gi, ws)
