import numpy as np
import pytest

from bgmoe.baseline import fit_gamma_glm, gamma_deviance, predict_glm
from bgmoe.errors import DataError, ParameterError


def _data(seed, n=400):
    rng = np.random.default_rng(seed)
    x = np.column_stack([np.ones(n), rng.normal(size=n), rng.uniform(-1, 1, n)])
    mu = np.exp(x @ [0.5, 0.3, -0.8])
    y = rng.gamma(2.5, mu / 2.5)
    return x, y


def test_matches_statsmodels():
    sm = pytest.importorskip("statsmodels.api")
    x, y = _data(0)
    ours = fit_gamma_glm(y, x)
    ref = sm.GLM(y, x, family=sm.families.Gamma(sm.families.links.Log())).fit(tol=1e-12)
    np.testing.assert_allclose(ours.coefficients, ref.params, rtol=1e-7)
    np.testing.assert_allclose(ours.dispersion, ref.scale, rtol=1e-7)
    np.testing.assert_allclose(ours.deviance, ref.deviance, rtol=1e-9)


def test_score_equations_hold():
    x, y = _data(1)
    fit = fit_gamma_glm(y, x)
    mu = predict_glm(fit, x)
    np.testing.assert_allclose(x.T @ ((y - mu) / mu) / y.size, 0.0, atol=1e-7)


def test_deviance_never_increases():
    x, y = _data(2)
    trace = np.array(fit_gamma_glm(y, x).deviance_trace)
    assert np.all(np.diff(trace) <= 1e-12)


def test_intercept_only_is_sample_mean():
    _, y = _data(3)
    fit = fit_gamma_glm(y, np.ones((y.size, 1)))
    np.testing.assert_allclose(np.exp(fit.coefficients[0]), y.mean(), rtol=1e-12)
    assert gamma_deviance(y, np.full_like(y, y.mean())) == pytest.approx(fit.deviance)


def test_rank_deficient_design():
    x, y = _data(4)
    with pytest.raises(ParameterError):
        fit_gamma_glm(y, np.column_stack([x, x[:, 1]]))


def test_too_few_rows():
    with pytest.raises(DataError):
        fit_gamma_glm(np.ones(2), np.ones((2, 2)))


def test_zero_row_predicts_exp_intercept():
    x, y = _data(5)
    fit = fit_gamma_glm(y, x)
    assert predict_glm(fit, np.array([[1.0, 0.0, 0.0]]))[0] == np.exp(fit.coefficients[0])


def test_prediction_monotone_in_positive_coefficient():
    x, y = _data(6)
    fit = fit_gamma_glm(y, x)
    assert fit.coefficients[1] > 0
    grid = np.column_stack([np.ones(20), np.linspace(-2, 2, 20), np.zeros(20)])
    assert np.all(np.diff(predict_glm(fit, grid)) > 0)


def test_recovers_known_coefficients():
    truth = np.array([0.5, 0.3, -0.8])
    x, y = _data(7, n=5000)
    fit = fit_gamma_glm(y, x)
    # log link: Fisher information is X'X / dispersion
    se = np.sqrt(np.diag(fit.dispersion * np.linalg.inv(x.T @ x)))
    assert np.all(np.abs(fit.coefficients - truth) < 3 * se)
