"""Bivariate gamma mixture-of-experts regression."""

from ._quadrature import BACKEND
from .baseline import GlmFit, fit_gamma_glm, predict_glm
from .bgdist import (
    BGParams,
    ConditionalMoments,
    QuadratureConfig,
    conditional_moments,
    joint_rect_prob_mc,
    log_density,
    log_density_grid,
    moments,
    sample,
)
from .data import Dataset
from .em import EMConfig, check_identifiability, e_step, fit
from .errors import (
    BGMoEError,
    ChecksumError,
    DataError,
    DomainError,
    FittingError,
    MonotonicityError,
    NumericalError,
    ParameterError,
    SerializationError,
    UsageError,
    VersionError,
)
from .io import load_csv, load_model, save_model
from .metrics import (
    adjusted_rand,
    crps_empirical,
    gini_ordered,
    misclassification,
    predictive_samples,
    rmse,
    score,
    wasserstein_1d,
)
from .moe import FittedModel, ModelSpec, NetworkSpec, classify, mixture_moments, predict_mean
from .select import SearchConfig, aic, bic, icl, stepwise
from .sim import simulate_study1, simulate_study2

__version__ = "0.1.0"
