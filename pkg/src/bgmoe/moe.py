"""Bivariate gamma mixture-of-experts model family.

A model has a gating network for the mixing proportions and four expert
networks ``alpha1, alpha2, alpha3, beta`` with log links. Each network has a
kind:

``C``  component-specific constant
``V``  component-specific regression on covariates
``E``  regression shared by all components (for the gating: equal weights)
``I``  one constant shared by all components (experts only)

Every network is stored the same way, as a ``(G, d)`` matrix of log-scale
coefficients acting on a design matrix with a leading intercept. C and I
networks use the intercept column only; E and I networks have identical rows.
The gating matrix holds softmax scores with the last component as reference,
so its last row is zero.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .bgdist import BGParams
from .data import Dataset
from .errors import NumericalError, ParameterError

NETWORKS = ("gating", "alpha1", "alpha2", "alpha3", "beta")
GATING_KINDS = ("C", "V", "E")
EXPERT_KINDS = ("C", "V", "E", "I")


@dataclass(frozen=True)
class NetworkSpec:
    kind: str
    covariates: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if self.kind not in EXPERT_KINDS:
            raise ParameterError(f"unknown network kind {self.kind!r}")
        if self.kind in ("C", "I") and self.covariates:
            raise ParameterError(f"kind {self.kind} takes no covariates")
        if len(set(self.covariates)) != len(self.covariates):
            raise ParameterError("duplicate covariate in network")

    @property
    def component_specific(self) -> bool:
        return self.kind in ("C", "V")

    @property
    def uses_covariates(self) -> bool:
        return self.kind in ("V", "E")


@dataclass(frozen=True)
class ModelSpec:
    """One member of the model family.

    ``alpha`` holds three network specs sharing one kind but possibly
    different covariate lists. With ``g == 1`` the gating is irrelevant and
    expert kinds collapse (C to I, V to E), so the name has two letters.
    V and E networks may have empty covariate lists, which makes them
    intercept-only regressions equivalent to C and I.
    """

    g: int
    gating: NetworkSpec
    alpha: tuple
    beta: NetworkSpec

    def __post_init__(self):
        if int(self.g) < 1:
            raise ParameterError("g must be at least 1")
        object.__setattr__(self, "g", int(self.g))
        alpha = tuple(self.alpha)
        if len(alpha) != 3 or len({a.kind for a in alpha}) != 1:
            raise ParameterError("alpha networks must be three specs of one kind")
        gating, beta = self.gating, self.beta
        if self.g == 1:
            collapse = {"C": "I", "V": "E"}
            alpha = tuple(NetworkSpec(collapse.get(a.kind, a.kind), a.covariates) for a in alpha)
            beta = NetworkSpec(collapse.get(beta.kind, beta.kind), beta.covariates)
            gating = NetworkSpec("C")
        if gating.kind not in GATING_KINDS:
            raise ParameterError(f"gating kind {gating.kind!r} is not one of C, V, E")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gating", gating)

    @property
    def name(self) -> str:
        core = self.alpha[0].kind + self.beta.kind
        return core if self.g == 1 else self.gating.kind + core

    @property
    def networks(self):
        return (self.gating,) + self.alpha + (self.beta,)

    @classmethod
    def from_name(cls, name, g, gating=(), alpha1=(), alpha2=(), alpha3=(), beta=()):
        """Build from a type string such as ``"VVC"`` (or ``"EI"`` for one component)."""
        name = name.upper()
        if len(name) == 2:
            name = "C" + name
        if len(name) != 3:
            raise ParameterError(f"model type {name!r} must have two or three letters")
        kg, ka, kb = name

        def cov(kind, c):
            if kind in ("C", "I") and c:
                raise ParameterError(f"kind {kind} takes no covariates, got {list(c)}")
            return tuple(c)

        return cls(
            g=g,
            gating=NetworkSpec(kg, cov(kg, gating)),
            alpha=tuple(NetworkSpec(ka, cov(ka, c)) for c in (alpha1, alpha2, alpha3)),
            beta=NetworkSpec(kb, cov(kb, beta)),
        )

    def describe(self) -> str:
        parts = [f"{self.name} G={self.g}"]
        for nm, net in zip(NETWORKS, self.networks):
            if net.covariates:
                parts.append(f"{nm}={{{','.join(net.covariates)}}}")
        return " ".join(parts)

    def covariate_names(self):
        seen = []
        for net in self.networks:
            for c in net.covariates:
                if c not in seen:
                    seen.append(c)
        return seen


def param_count(spec: ModelSpec, dims) -> int:
    """Free parameters given each network's design width (intercept included)."""
    g = spec.g
    d0 = dims[0]
    k = {"V": (g - 1) * d0, "C": g - 1, "E": 0}[spec.gating.kind] if g > 1 else 0
    for net, d in zip(spec.networks[1:], dims[1:]):
        k += {"V": g * d, "E": d, "C": g, "I": 1}[net.kind]
    return k


def link_alpha(coefs, w):
    """``exp(coefs . w)`` with an overflow check."""
    with np.errstate(over="ignore"):
        val = np.exp(np.dot(coefs, w))
    if not np.all(np.isfinite(val)):
        raise NumericalError("log-link overflow")
    return val


def gating_probs(gating_coefs, w0):
    """Softmax mixing proportions; ``gating_coefs`` excludes the reference row.

    Parameters
    ----------
    gating_coefs : array_like, shape (G-1, d0)
    w0 : array_like, shape (d0,) or (n, d0)
    """
    coef = np.asarray(gating_coefs, dtype=float)
    coef = np.vstack([coef.reshape(-1, np.shape(w0)[-1]), np.zeros((1, np.shape(w0)[-1]))])
    scores = np.asarray(w0, dtype=float) @ coef.T
    return np.exp(scores - logsumexp(scores, axis=-1, keepdims=True))


def log_gating(coef, w0):
    scores = w0 @ coef.T
    return scores - logsumexp(scores, axis=1, keepdims=True)


@dataclass(frozen=True)
class FittedModel:
    """Estimated coefficients for every network plus fit diagnostics."""

    spec: ModelSpec
    gating_coef: np.ndarray
    alpha_coef: tuple
    beta_coef: np.ndarray
    design_labels: tuple
    encodings: dict = field(default_factory=dict)
    loglik: float = float("nan")
    n_params: int = 0
    n_obs: int = 0
    responsibilities: np.ndarray | None = None
    converged: bool = False
    iterations: int = 0
    trace: tuple = ()

    @property
    def g(self):
        return self.spec.g

    @property
    def coefs(self):
        """The five coefficient matrices in network order."""
        return (self.gating_coef,) + tuple(self.alpha_coef) + (self.beta_coef,)

    @property
    def weights(self):
        """Mixing weights when the gating has no covariates, else ``None``."""
        if self.spec.gating.kind == "V" and self.gating_coef.shape[1] > 1:
            return None
        return gating_probs(self.gating_coef[:-1, :1], np.ones(1))

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


def build_designs(data: Dataset, spec: ModelSpec, encodings=None):
    """Design matrices ``(w0, w1, w2, w3, w4)`` for a spec; returns ``(designs, labels)``."""
    designs, labels = [], []
    for net in spec.networks:
        if net.uses_covariates:
            x, lab = data.design(net.covariates, encodings)
        else:
            x, lab = np.ones((data.n, 1)), ["(intercept)"]
        designs.append(x)
        labels.append(tuple(lab))
    return designs, tuple(labels)


def model_designs(model: FittedModel, data: Dataset):
    designs, labels = build_designs(data, model.spec, model.encodings)
    if labels != tuple(model.design_labels):
        raise ParameterError("data columns do not match the model's design")
    return designs


def _exp_link(eta):
    with np.errstate(over="ignore"):
        val = np.exp(eta)
    if not np.all(np.isfinite(val)):
        raise NumericalError("log-link overflow in expert network")
    return val


def component_params(model: FittedModel, designs):
    """Per-observation parameters: ``alpha`` of shape (3, n, G), ``beta`` (n, G)."""
    alpha = np.stack([_exp_link(w @ c.T) for w, c in zip(designs[1:4], model.alpha_coef)])
    beta = _exp_link(designs[4] @ model.beta_coef.T)
    return alpha, beta


def mixing_probs(model: FittedModel, designs):
    return np.exp(log_gating(model.gating_coef, designs[0]))


def observation_params(model: FittedModel, data: Dataset, i: int):
    """Component parameter list for observation ``i``."""
    alpha, beta = component_params(model, model_designs(model, data))
    return [BGParams(alpha[0, i, g], alpha[1, i, g], alpha[2, i, g], beta[i, g]) for g in range(model.g)]


def component_means(alpha, beta):
    """Component means ``(n, G, 2)``."""
    return np.stack([(alpha[0] + alpha[2]) / beta, (alpha[1] + alpha[2]) / beta], axis=-1)


def predict_mean(model: FittedModel, data: Dataset):
    """Mixture expectation of ``(Y1, Y2)`` for every row; shape (n, 2)."""
    designs = model_designs(model, data)
    alpha, beta = component_params(model, designs)
    tau = mixing_probs(model, designs)
    return np.einsum("ng,ngk->nk", tau, component_means(alpha, beta))


def mixture_moments(components, weights):
    """Mean and covariance of a finite mixture of bivariate gammas.

    With ``theta_g = (a1, a2, a3) / b`` the latent ``X`` has second moment
    ``diag(a / b**2) + theta theta^T`` within a component, so
    ``Var(X) = sum_g w_g (diag + theta theta^T) - mean_theta mean_theta^T`` and
    ``Var(Y) = A Var(X) A^T`` with ``A = [[1, 0, 1], [0, 1, 1]]``.
    """
    w = np.asarray(weights, dtype=float)
    if abs(w.sum() - 1.0) > 1e-10 or np.any(w < 0):
        raise ParameterError("weights must be a probability vector")
    par = np.array([p.as_tuple() for p in components])
    theta = par[:, :3] / par[:, 3:4]
    second = np.einsum("g,gi,gj->ij", w, theta, theta) + np.diag(w @ (par[:, :3] / par[:, 3:4] ** 2))
    mt = w @ theta
    d = second - np.outer(mt, mt)
    a = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    return a @ mt, a @ d @ a.T


def classify(model: FittedModel):
    """MAP component labels (1-based); ties go to the lower index."""
    if model.responsibilities is None:
        raise ParameterError("model has no responsibilities")
    return np.argmax(model.responsibilities, axis=1) + 1


def canonical_order(alpha, beta):
    """Permutation sorting components by average fitted mean of ``Y1 + Y2``."""
    mean_sum = np.mean((alpha[0] + alpha[1] + 2 * alpha[2]) / beta, axis=0)
    return np.argsort(mean_sum, kind="stable")


def permute(model: FittedModel, perm) -> FittedModel:
    """Relabel components; the new last component becomes the gating reference."""
    perm = np.asarray(perm)
    gc = model.gating_coef[perm]
    gc = gc - gc[-1]
    z = None if model.responsibilities is None else model.responsibilities[:, perm]
    return model.replace(
        gating_coef=gc,
        alpha_coef=tuple(c[perm] for c in model.alpha_coef),
        beta_coef=model.beta_coef[perm],
        responsibilities=z,
    )


def canonicalize(model: FittedModel, designs) -> FittedModel:
    alpha, beta = component_params(model, designs)
    return permute(model, canonical_order(alpha, beta))
