import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bgmoe.errors import ParameterError
from bgmoe.metrics import (
    adjusted_rand,
    crps_empirical,
    crps_ensemble,
    gini_ordered,
    misclassification,
    rmse,
    score,
    wasserstein_1d,
)
from oracles import crps_pairwise, gini_bruteforce, wasserstein_lp

finite = st.floats(-50, 50, allow_nan=False)


@pytest.mark.parametrize("seed", range(10))
def test_crps_matches_pairwise(seed):
    rng = np.random.default_rng(seed)
    s = rng.gamma(2, 1, int(rng.integers(2, 60)))
    y = rng.gamma(2, 1)
    np.testing.assert_allclose(crps_empirical(s, y), crps_pairwise(s, y), rtol=1e-12, atol=1e-14)


def test_crps_vectorised_rows():
    rng = np.random.default_rng(1)
    s = rng.normal(size=(5, 40))
    y = rng.normal(size=5)
    ref = [crps_pairwise(r, v) for r, v in zip(s, y)]
    np.testing.assert_allclose(crps_ensemble(s, y), ref, rtol=1e-12)


def test_crps_point_mass_is_absolute_error():
    assert crps_empirical([3.0, 3.0], 1.0) == pytest.approx(2.0)


@pytest.mark.parametrize("seed", range(10))
def test_gini_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    p = rng.integers(0, 5, n).astype(float)  # ties
    a = rng.gamma(1, 1, n)
    np.testing.assert_allclose(gini_ordered(p, a), gini_bruteforce(p, a), atol=1e-12)


def test_gini_perfect_ranking():
    a = np.array([1.0, 2.0, 3.0, 10.0])
    assert gini_ordered(a, a) > 0
    assert gini_ordered(-a, a) < 0
    assert gini_ordered(np.ones(4), a) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("seed", range(10))
def test_wasserstein_matches_lp(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=int(rng.integers(1, 12)))
    b = rng.normal(1, 2, size=int(rng.integers(1, 12)))
    np.testing.assert_allclose(wasserstein_1d(a, b), wasserstein_lp(a, b), rtol=1e-7, atol=1e-9)


def test_wasserstein_matches_scipy():
    from scipy.stats import wasserstein_distance

    rng = np.random.default_rng(3)
    a, b = rng.normal(size=300), rng.gamma(2, 1, 170)
    np.testing.assert_allclose(wasserstein_1d(a, b), wasserstein_distance(a, b), rtol=1e-10)


@given(arrays(float, st.integers(1, 20), elements=finite), arrays(float, st.integers(1, 20), elements=finite))
@settings(max_examples=60, deadline=None)
def test_wasserstein_is_a_metric(a, b):
    d = wasserstein_1d(a, b)
    assert d >= 0
    assert d == pytest.approx(wasserstein_1d(b, a), abs=1e-9)
    assert wasserstein_1d(a, a) == 0.0


def test_ari_matches_sklearn():
    sk = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.integers(0, 3, 50)
        b = rng.integers(0, 4, 50)
        np.testing.assert_allclose(adjusted_rand(a, b), sk.adjusted_rand_score(a, b), atol=1e-12)


@given(st.lists(st.integers(0, 3), min_size=2, max_size=30), st.randoms(use_true_random=False))
@settings(max_examples=60, deadline=None)
def test_ari_symmetric_and_permutation_invariant(a, rnd):
    a = np.array(a)
    b = np.array([rnd.randint(0, 2) for _ in a])
    relabel = np.array([2, 0, 3, 1])[a]
    assert adjusted_rand(a, b) == pytest.approx(adjusted_rand(b, a))
    assert adjusted_rand(relabel, b) == pytest.approx(adjusted_rand(a, b))
    assert adjusted_rand(a, relabel) == pytest.approx(1.0)


def test_misclassification():
    assert misclassification([1, 1, 2, 2], [2, 2, 1, 1]) == 0.0
    assert misclassification([1, 1, 2, 2], [1, 2, 2, 2]) == 0.25


def test_rmse_shapes():
    with pytest.raises(ParameterError):
        rmse([1.0, 2.0], [1.0])


def test_score_report_invariants():
    rng = np.random.default_rng(2)
    actual = rng.gamma(2, 1, (30, 2))
    samples = rng.gamma(2, 1, (30, 50, 2))
    rep = score(samples.mean(axis=1), samples, actual)
    rows = rep.rows("m")
    assert [r[0] for r in rows] == ["Y1", "Y2", "Sum"]
    for _, _, c, r, g, w in rows:
        assert c >= 0 and r >= 0 and w >= 0 and -1 <= g <= 1


def test_crps_two_point_example():
    assert crps_empirical([0.0, 2.0], 1.0) == pytest.approx(0.5, abs=1e-15)
    assert crps_empirical([4.0] * 5, 4.0) == 0.0


def test_rmse_examples():
    x = np.linspace(0, 3, 11)
    assert rmse(x, x) == 0.0
    assert rmse(x + 2.5, x) == pytest.approx(2.5, abs=1e-14)


@pytest.mark.parametrize("n", [2, 5, 40])
def test_gini_single_claim_perfect_ranking(n):
    actual = np.zeros(n)
    actual[-1] = 1.0
    np.testing.assert_allclose(gini_ordered(np.arange(n, dtype=float), actual), (n - 1) / n, atol=1e-12)


def test_wasserstein_translation_and_identity():
    a = np.random.default_rng(3).normal(size=25)
    assert wasserstein_1d(a, a[::-1]) == 0.0
    np.testing.assert_allclose(wasserstein_1d(a, a + 1.75), 1.75, atol=1e-12)


def test_ari_singletons_against_one_cluster():
    assert adjusted_rand(np.arange(12), np.zeros(12, int)) == pytest.approx(0.0, abs=1e-15)
    lab = [1, 1, 2, 3, 3]
    assert adjusted_rand(lab, lab) == 1.0 and misclassification(lab, lab) == 0.0


def _model(params, log_tau=None):
    from bgmoe.moe import FittedModel, ModelSpec

    par = np.log(np.array(params, dtype=float))
    g = len(params)
    gating = np.zeros((g, 1)) if log_tau is None else np.array(log_tau, dtype=float)[:, None]
    return FittedModel(
        spec=ModelSpec.from_name("CC", g),
        gating_coef=gating - gating[-1],
        alpha_coef=tuple(par[:, [k]] for k in range(3)),
        beta_coef=par[:, [3]],
        design_labels=(("(intercept)",),) * 5,
    )


@pytest.mark.parametrize(
    "params,log_tau",
    [([(1.5, 2.0, 0.7, 0.9)], None), ([(5, 1, 0.01, 1), (1, 5, 0.01, 1)], [0.3, 0.0])],
)
def test_predictive_mean_matches_mixture_mean(params, log_tau):
    from bgmoe.data import Dataset
    from bgmoe.metrics import predictive_samples
    from bgmoe.moe import predict_mean

    model = _model(params, log_tau)
    data = Dataset(np.ones((1, 2)))
    draws = predictive_samples(model, data, 100_000, 4)[0]
    se = draws.std(axis=0) / np.sqrt(draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - predict_mean(model, data)[0]) < 4 * se)


def test_single_component_draws_follow_the_distribution():
    from scipy.stats import ks_2samp

    from bgmoe.bgdist import BGParams, sample
    from bgmoe.data import Dataset
    from bgmoe.metrics import predictive_samples

    p = (1.5, 2.0, 0.7, 0.9)
    draws = predictive_samples(_model([p]), Dataset(np.ones((1, 2))), 20_000, 1)[0]
    ref = sample(BGParams(*p), 20_000, 2)
    for k in range(2):
        assert ks_2samp(draws[:, k], ref[:, k]).pvalue > 1e-3
