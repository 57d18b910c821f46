"""Seeded generators for the two simulation designs and for fitted models.

Every observation ``i`` draws from its own Philox stream keyed by
``(seed, i)``, so output does not depend on generation order or on how the
work is split.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ParameterError
from .moe import FittedModel, component_params, mixing_probs, model_designs

COVARIATE_VAR = 0.3
COVARIATE_NAMES = ("w1", "w2", "w3")


@dataclass(frozen=True)
class SimOutput:
    """Simulated responses with their generating structure.

    ``true_alpha`` has shape (3, n, G) and ``true_beta`` (n, G); labels are
    1-based.
    """

    responses: np.ndarray
    covariates: np.ndarray
    true_labels: np.ndarray
    true_alpha: np.ndarray
    true_beta: np.ndarray
    covariate_names: tuple = COVARIATE_NAMES

    def to_dataset(self) -> Dataset:
        cov = {nm: self.covariates[:, j] for j, nm in enumerate(self.covariate_names)}
        return Dataset(self.responses, cov)


def observation_rng(seed: int, i: int) -> np.random.Generator:
    """Independent stream for observation ``i``."""
    mask = (1 << 64) - 1
    return np.random.Generator(np.random.Philox(key=[int(seed) & mask, int(i) & mask]))


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _draw_pair(rng, a1, a2, a3, b):
    x = rng.standard_gamma([a1, a2, a3]) / b
    return x[0] + x[2], x[1] + x[2]


def _simulate_covariate_mixture(n, seed, second_prob, params):
    """Shared driver: ``second_prob(w)`` gives P(component 2), ``params(w)`` a (2, 4) array."""
    if int(n) < 10:
        raise ParameterError("n must be at least 10")
    n = int(n)
    y = np.empty((n, 2))
    w = np.empty((n, 3))
    labels = np.empty(n, dtype=int)
    alpha = np.empty((3, n, 2))
    beta = np.empty((n, 2))
    sd = np.sqrt(COVARIATE_VAR)
    for i in range(n):
        rng = observation_rng(seed, i)
        wi = rng.normal(0.0, sd, size=3)
        par = params(wi)
        g = 1 if rng.random() < second_prob(wi) else 0
        y[i] = _draw_pair(rng, *par[g])
        w[i] = wi
        labels[i] = g + 1
        alpha[:, i, :] = par[:, :3].T
        beta[i] = par[:, 3]
    return SimOutput(y, w, labels, alpha, beta)


def simulate_study1(n: int, seed: int) -> SimOutput:
    """Two constant bivariate gamma components with a logistic gating on w.

    ``logit P(component 2) = 1 + 2 w1 - 2 w2 + 3 w3``; component 1 is
    BG(0.8, 7.9, 5, 1.9) and component 2 is BG(2.6, 2, 0.5, 1).
    """
    fixed = np.array([[0.8, 7.9, 5.0, 1.9], [2.6, 2.0, 0.5, 1.0]])
    return _simulate_covariate_mixture(
        n, seed, lambda w: _sigmoid(1 + 2 * w[0] - 2 * w[1] + 3 * w[2]), lambda w: fixed
    )


STUDY2_COEFS = np.array(
    [
        # component 1: alpha1, alpha2, alpha3, beta; columns intercept, w1, w2, w3
        [[1.0, 0.2, 0.2, 0.0], [0.1, 0.0, 0.1, 0.1], [0.5, 0.2, 0.2, 0.2], [0.2, 0.1, 0.1, 0.2]],
        # component 2
        [[0.1, 0.1, 0.1, 0.0], [2.0, 0.0, 0.3, 0.3], [1.5, 0.2, 0.1, 0.1], [0.7, 0.1, 0.1, 0.2]],
    ]
)
STUDY2_GATING = np.array([10.0, 40.0, 30.0, 100.0])


def simulate_study2(n: int, seed: int) -> SimOutput:
    """Log-linear experts in both components with a steep logistic gating.

    ``logit P(component 2) = 10 + 40 w1 + 30 w2 + 100 w3``.
    """

    def params(w):
        x = np.concatenate([[1.0], w])
        return np.exp(STUDY2_COEFS @ x)

    return _simulate_covariate_mixture(
        n, seed, lambda w: _sigmoid(STUDY2_GATING @ np.concatenate([[1.0], w])), params
    )


def simulate_from_model(model: FittedModel, data: Dataset, seed: int) -> SimOutput:
    """Draw responses for the covariate rows of ``data`` from ``model``.

    A component is drawn from the gating probabilities, then the pair from
    that component's parameters.
    """
    designs = model_designs(model, data)
    alpha, beta = component_params(model, designs)
    tau = mixing_probs(model, designs)
    cum = np.cumsum(tau, axis=1)
    n = data.n
    y = np.empty((n, 2))
    labels = np.empty(n, dtype=int)
    for i in range(n):
        rng = observation_rng(seed, i)
        g = min(int(np.searchsorted(cum[i], rng.random() * cum[i, -1], side="right")), model.g - 1)
        y[i] = _draw_pair(rng, alpha[0, i, g], alpha[1, i, g], alpha[2, i, g], beta[i, g])
        labels[i] = g + 1
    names = tuple(nm for nm in data.names if not data.is_categorical(nm))
    cov = np.column_stack([data.columns[nm] for nm in names]) if names else np.empty((n, 0))
    return SimOutput(y, cov, labels, alpha, beta, names)
