import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import psi

from bgmoe.data import Dataset
from bgmoe.em import (
    EMConfig,
    check_identifiability,
    e_step,
    fit,
    initialize,
    inverse_digamma,
    m_step_alpha,
    m_step_beta,
    shape_fisher,
)
from bgmoe.errors import FittingError, ParameterError
from bgmoe.metrics import adjusted_rand
from bgmoe.bgdist import BGParams, log_density, sample
from bgmoe.moe import ModelSpec, classify, component_params, model_designs
from bgmoe.sim import simulate_study1
from oracles import central_gradient, gradient_cases


@pytest.fixture(scope="module")
def sim1():
    out = simulate_study1(300, 4)
    return out, out.to_dataset()


@pytest.fixture(scope="module")
def cc2(sim1):
    return fit(sim1[1], ModelSpec.from_name("CC", 2), EMConfig(restarts=2, seed=1))


@pytest.mark.parametrize("kind", ["shape", "rate", "gating"])
@pytest.mark.parametrize("seed", range(5))
def test_gradients_match_finite_differences(kind, seed):
    fun, x = gradient_cases(kind, seed)
    val, grad, hess = fun(x)
    fd = central_gradient(lambda t: fun(t)[0], x)
    np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-5 * max(1.0, np.abs(fd).max()))
    fd_h = np.column_stack([central_gradient(lambda t, j=j: fun(t)[1][j], x) for j in range(x.size)])
    np.testing.assert_allclose(hess, fd_h, rtol=1e-4, atol=1e-4 * max(1.0, np.abs(fd_h).max()))


def test_shape_fisher_is_positive_definite():
    rng = np.random.default_rng(0)
    w = np.column_stack([np.ones(30), rng.normal(size=30)])
    np.linalg.cholesky(shape_fisher(np.array([0.2, -0.3]), w, rng.uniform(0.1, 1, 30)))


@given(st.floats(-20.0, 5.0))
@settings(max_examples=60, deadline=None)
def test_inverse_digamma(s):
    a = inverse_digamma(np.array([s]))
    np.testing.assert_allclose(psi(a), s, rtol=1e-10, atol=1e-10)


def test_intercept_only_v_step_equals_closed_form():
    rng = np.random.default_rng(3)
    n, g = 200, 2
    z = rng.dirichlet(np.ones(g), n)
    lx = np.log(rng.gamma(2.0, 1.0, (n, g)))
    log_beta = np.log(rng.uniform(0.5, 2, (n, g)))
    w = np.ones((n, 1))
    closed, _, _ = m_step_alpha("C", z, w, log_beta, lx, np.zeros((g, 1)))
    newton, _, ok = m_step_alpha("V", z, w, log_beta, lx, np.zeros((g, 1)))
    assert ok
    np.testing.assert_allclose(newton, closed, atol=1e-8)
    shape_sum = rng.uniform(1, 5, (n, g))
    latent = rng.uniform(1, 9, (n, g))
    closed, _, _ = m_step_beta("C", z, w, shape_sum, latent, np.zeros((g, 1)))
    newton, _, _ = m_step_beta("V", z, w, shape_sum, latent, np.zeros((g, 1)))
    np.testing.assert_allclose(newton, closed, atol=1e-8)


def test_e_step_invariants(sim1, cc2):
    data = sim1[1]
    cache = e_step(data, cc2)
    np.testing.assert_allclose(cache.z.sum(axis=1), 1.0, atol=1e-12)
    m = np.minimum(data.y1, data.y2)[:, None]
    assert np.all(cache.x3 > 0) and np.all(cache.x3 < m)
    np.testing.assert_array_equal(cache.x1, data.y1[:, None] - cache.x3)
    np.testing.assert_array_equal(cache.x2, data.y2[:, None] - cache.x3)
    np.testing.assert_allclose(cache.loglik, cc2.loglik, rtol=1e-12)


def test_trace_is_monotone(cc2):
    ll = np.array([row[1] for row in cc2.trace])
    assert np.all(np.diff(ll) >= -1e-6 * np.abs(ll[:-1]))
    assert cc2.converged


def test_refit_from_solution_is_a_fixed_point(sim1, cc2):
    cfg = EMConfig(restarts=1, tol=1e-8, max_iter=20000)
    tight = fit(sim1[1], cc2.spec, cfg, start=cc2)
    again = fit(sim1[1], cc2.spec, cfg, start=tight)
    assert abs(again.loglik - tight.loglik) < 1e-8 * abs(tight.loglik)


def test_recovers_study1_clusters(sim1, cc2):
    out, _ = sim1
    assert adjusted_rand(classify(cc2), out.true_labels) > 0.5
    alpha, beta = component_params(cc2, model_designs(cc2, sim1[1]))
    # canonical order: ascending mean of Y1 + Y2
    means = ((alpha[0] + alpha[1] + 2 * alpha[2]) / beta).mean(axis=0)
    assert np.all(np.diff(means) > 0)


def test_empty_covariate_regressions_match_constant_family(sim1):
    data = sim1[1]
    cfg = EMConfig(restarts=1, seed=2)
    cc = fit(data, ModelSpec.from_name("CC", 2), cfg)
    vv = fit(data, ModelSpec.from_name("VVV", 2), cfg)
    np.testing.assert_allclose(vv.loglik, cc.loglik, rtol=0, atol=1e-6)
    ii = fit(data, ModelSpec.from_name("II", 1), cfg)
    ee = fit(data, ModelSpec.from_name("EE", 1), cfg)
    np.testing.assert_allclose(ee.loglik, ii.loglik, rtol=0, atol=1e-6)


def test_single_component_is_deterministic(sim1):
    data = sim1[1]
    a = fit(data, ModelSpec.from_name("II", 1), EMConfig(restarts=1, seed=0))
    b = fit(data, ModelSpec.from_name("II", 1), EMConfig(restarts=1, seed=9))
    assert a.loglik == b.loglik


def test_seeded_fits_are_reproducible(sim1):
    cfg = EMConfig(restarts=1, seed=5)
    a = fit(sim1[1], ModelSpec.from_name("CC", 2), cfg)
    b = fit(sim1[1], ModelSpec.from_name("CC", 2), cfg)
    for x, y in zip(a.coefs, b.coefs):
        np.testing.assert_array_equal(x, y)


def test_initialization_shapes(sim1):
    spec = ModelSpec.from_name("VVC", 3, gating=["w1"], alpha2=["w2", "w3"])
    coefs = initialize(sim1[1], spec, seed=0)
    assert [c.shape for c in coefs] == [(3, 2), (3, 1), (3, 3), (3, 1), (3, 1)]
    np.testing.assert_array_equal(coefs[0][-1], 0.0)


def test_identifiability_of_converged_fit(sim1, cc2):
    reports, passed = check_identifiability(cc2, sim1[1])
    assert passed
    assert {r.network for r in reports} == {"gating", "alpha1", "alpha2", "alpha3", "beta"}


def test_too_many_components_fail_cleanly():
    rng = np.random.default_rng(0)
    data = Dataset(rng.gamma(2, 1, (6, 2)))
    with pytest.raises(FittingError):
        fit(data, ModelSpec.from_name("CC", 4), EMConfig(restarts=1))


def test_bad_start_shape():
    rng = np.random.default_rng(0)
    data = Dataset(rng.gamma(2, 1, (30, 2)))
    with pytest.raises(ParameterError):
        fit(data, ModelSpec.from_name("CC", 2), start=[np.zeros((1, 1))] * 5)


def test_config_validation():
    with pytest.raises(ParameterError):
        EMConfig(restarts=0)
    with pytest.raises(ParameterError):
        EMConfig(tol=1e-9)


def _study1_truth():
    lg = lambda *v: np.log(np.array(v))[:, None]
    spec = ModelSpec.from_name("VCC", 2, gating=["w1", "w2", "w3"])
    from bgmoe.moe import FittedModel

    return FittedModel(
        spec=spec,
        gating_coef=np.array([[1.0, 2.0, -2.0, 3.0], [0.0, 0.0, 0.0, 0.0]]),
        alpha_coef=(lg(2.6, 0.8), lg(2.0, 7.9), lg(0.5, 5.0)),
        beta_coef=lg(1.0, 1.9),
        design_labels=(("(intercept)", "w1", "w2", "w3"),) + (("(intercept)",),) * 4,
    )


def test_e_step_single_component(sim1):
    data = sim1[1]
    p = BGParams(1.5, 2.0, 0.7, 0.9)
    lg = lambda v: np.array([[np.log(v)]])
    from bgmoe.moe import FittedModel

    model = FittedModel(
        spec=ModelSpec.from_name("II", 1),
        gating_coef=np.zeros((1, 1)),
        alpha_coef=(lg(p.alpha1), lg(p.alpha2), lg(p.alpha3)),
        beta_coef=lg(p.beta),
        design_labels=(("(intercept)",),) * 5,
    )
    cache = e_step(data, model)
    np.testing.assert_array_equal(cache.z, 1.0)
    direct = sum(log_density(a, b, p) for a, b in data.y)
    np.testing.assert_allclose(cache.loglik, direct, rtol=1e-12)


def test_e_step_identical_components_split_evenly(sim1):
    from bgmoe.moe import FittedModel

    par = np.log([[1.5, 2.0, 0.7, 0.9]] * 2)
    model = FittedModel(
        spec=ModelSpec.from_name("CC", 2),
        gating_coef=np.zeros((2, 1)),
        alpha_coef=tuple(par[:, [k]] for k in range(3)),
        beta_coef=par[:, [3]],
        design_labels=(("(intercept)",),) * 5,
    )
    np.testing.assert_allclose(e_step(sim1[1], model).z, 0.5, rtol=0, atol=1e-15)


@pytest.mark.slow
def test_study1_loglik_level():
    # the published figure is the two-component constant fit, which the
    # seed-averaged fit reproduces; the generating model scores higher
    fits, truths = [], []
    for seed in range(5):
        data = simulate_study1(500, seed).to_dataset()
        fits.append(fit(data, ModelSpec.from_name("CC", 2), EMConfig(restarts=2, seed=seed)).loglik)
        truths.append(e_step(data, _study1_truth()).loglik)
    assert abs(np.mean(fits) / -1969.98 - 1) < 0.01
    assert np.all(np.array(truths) > np.array(fits))


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="generating model loglik sits about 3.5% above the fitted constant model figure")
def test_study1_truth_loglik_matches_published_fit():
    truths = [e_step(simulate_study1(500, s).to_dataset(), _study1_truth()).loglik for s in range(5)]
    assert abs(np.mean(truths) / -1969.98 - 1) < 0.01


def test_constant_gating_gives_class_proportions():
    from bgmoe.em import m_step_gating

    cls = np.r_[np.zeros(30, int), np.ones(70, int)]
    z = np.eye(2)[cls]
    coef, _, ok = m_step_gating("C", z, np.ones((100, 1)), np.zeros((2, 1)))
    tau = np.exp(coef[:, 0]) / np.exp(coef[:, 0]).sum()
    np.testing.assert_allclose(tau, [0.3, 0.7], rtol=1e-12)


def test_separable_gating_stays_finite():
    from bgmoe.em import m_step_gating
    from bgmoe.moe import gating_probs

    w = np.linspace(-1, 1, 40)
    w0 = np.column_stack([np.ones(40), w])
    z = np.eye(2)[(w > 0).astype(int)]
    coef, _, _ = m_step_gating("V", z, w0, np.zeros((2, 2)))
    assert np.all(np.isfinite(coef))
    probs = gating_probs(coef[:-1], w0)
    assert np.all(probs[z == 1] >= 0.999)


@pytest.mark.slow
def test_study1_gating_signs_and_size():
    truth = np.array([1.0, 2.0, -2.0, 3.0])
    for seed in range(3):
        data = simulate_study1(500, seed).to_dataset()
        model = fit(data, ModelSpec.from_name("VCC", 2, gating=["w1", "w2", "w3"]), EMConfig(restarts=2, seed=seed))
        est = model.gating_coef[0]
        assert np.all(np.sign(est) == np.sign(truth))
        assert np.all(np.abs(est / truth - 1) <= 0.5)


@pytest.mark.slow
def test_single_distribution_recovery():
    # single draws put alpha1 anywhere in roughly 0.6 to 0.9, so the check
    # averages four replicates fitted to a tight tolerance
    p = BGParams(0.8, 7.9, 5.0, 1.9)
    est = []
    for seed in range(4):
        data = Dataset(sample(p, 2000, seed))
        model = fit(data, ModelSpec.from_name("II", 1), EMConfig(restarts=1, tol=1e-8, max_iter=20000))
        alpha, _ = component_params(model, model_designs(model, data))
        est.append([alpha[0][0, 0], alpha[1][0, 0], alpha[2][0, 0]])
    np.testing.assert_allclose(np.mean(est, axis=0), [0.8, 7.9, 5.0], rtol=0.15)


def test_rate_step_closed_form():
    rng = np.random.default_rng(0)
    n = 50
    shape_sum = rng.uniform(1, 5, (n, 1))
    latent_sum = rng.uniform(1, 9, (n, 1))
    z = np.ones((n, 1))
    coef, _, _ = m_step_beta("I", z, np.ones((n, 1)), shape_sum, latent_sum, np.zeros((1, 1)))
    np.testing.assert_allclose(np.exp(coef[0, 0]), shape_sum.sum() / latent_sum.sum(), rtol=1e-14)
    vcoef, _, _ = m_step_beta("V", z, np.ones((n, 1)), shape_sum, latent_sum, np.zeros((1, 1)))
    np.testing.assert_allclose(vcoef, coef, rtol=0, atol=1e-9)


def test_initialization_single_component_ignores_seed(sim1):
    spec = ModelSpec.from_name("II", 1)
    a = initialize(sim1[1], spec, seed=0)
    b = initialize(sim1[1], spec, seed=17)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_initialization_is_seeded(sim1):
    spec = ModelSpec.from_name("CC", 2)
    for x, y in zip(initialize(sim1[1], spec, seed=3), initialize(sim1[1], spec, seed=3)):
        np.testing.assert_array_equal(x, y)


@pytest.mark.slow
def test_restarts_mostly_agree():
    data = simulate_study1(500, 0).to_dataset()
    spec = ModelSpec.from_name("CC", 2)
    lls = [fit(data, spec, EMConfig(restarts=1), start=initialize(data, spec, seed=0, restart=r)).loglik for r in range(5)]
    assert np.sum(np.array(lls) > max(lls) - 1.0) >= 3


def test_duplicated_covariate_is_not_identifiable(sim1):
    out, _ = sim1
    data = Dataset(out.responses, {"w1": out.covariates[:, 0], "w1b": out.covariates[:, 0].copy()})
    spec = ModelSpec.from_name("VCC", 2, gating=["w1", "w1b"])
    model = fit(data, spec, EMConfig(restarts=1, seed=1, max_iter=50))
    reports, passed = check_identifiability(model, data)
    assert not passed
    assert any(r.near_zero for r in reports if r.network == "gating")


@pytest.mark.slow
def test_surplus_components_flatten_the_hessian(sim1, cc2):
    # spare components show up as gating blocks roughly ten times flatter
    # than the well-specified fit; the default flag only catches exact
    # rank loss, so a looser ratio is passed here
    g5 = fit(sim1[1], ModelSpec.from_name("CC", 5), EMConfig(restarts=2, seed=1))
    rep5, _ = check_identifiability(g5, sim1[1], near_zero_ratio=1e-2)
    rep2, _ = check_identifiability(cc2, sim1[1], near_zero_ratio=1e-2)
    assert any(r.near_zero for r in rep5)
    assert not any(r.near_zero for r in rep2)
