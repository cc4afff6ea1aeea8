import math
import pickle

import numpy as np
import pytest
from scipy.special import lambertw

from pricing_challenge.stochastic import (InsufficientDataError, MvnModel, NumericError,
                                          ParameterError, RngStream, dirichlet, exponential,
                                          fit_mvn, lambert_w, multinomial, poisson, sample_mvn,
                                          uniform)


# -- Lambert W ---------------------------------------------------------------

@pytest.mark.parametrize("x, w", [(0.0, 0.0), (math.e, 1.0), (2 * math.e ** 2, 2.0)])
def test_lambert_w_examples(x, w):
    assert lambert_w(x) == pytest.approx(w, rel=1e-14, abs=1e-15)


def test_lambert_w_grid_accuracy():
    xs = np.logspace(-8, 8, 2001)
    ws = np.array([lambert_w(x) for x in xs])
    rel = np.abs(ws * np.exp(ws) - xs) / xs
    assert rel.max() <= 1e-12
    assert np.all(np.diff(ws) > 0)
    np.testing.assert_allclose(ws, lambertw(xs).real, rtol=1e-13)


def test_lambert_w_rejects_negative_and_nan():
    with pytest.raises(ParameterError):
        lambert_w(-1e-3)
    with pytest.raises(ParameterError):
        lambert_w(float("nan"))


# -- streams -------------------------------------------------------------------

def test_stream_reproducible_by_path():
    a = RngStream(42, ("sim", 3)).child("duopoly", 0, 1).generator.random(10_000)
    b = RngStream(42).child("sim", 3).child("duopoly", 0, 1).generator.random(10_000)
    assert np.array_equal(a, b)


def test_stream_survives_pickling_as_path():
    s = RngStream(7, ("sim", 1, "demand"))
    s.generator.random(5)  # advance the live generator; the path is what travels
    clone = pickle.loads(pickle.dumps(s))
    assert np.array_equal(clone.generator.random(100),
                          RngStream(7, ("sim", 1, "demand")).generator.random(100))


def test_sibling_streams_independent():
    root = RngStream(0, ("sim", 0))
    draws = [root.child("strategy", k).generator.random(100_000) for k in range(3)]
    draws.append(RngStream(1, ("sim", 0, "strategy", 0)).generator.random(100_000))
    corr = np.corrcoef(draws)
    off = corr[~np.eye(len(draws), dtype=bool)]
    assert np.abs(off).max() <= 0.01
    assert not np.array_equal(draws[0], draws[1])


def test_string_and_integer_labels_differ():
    a = RngStream(0, ("1",)).generator.random(4)
    b = RngStream(0, (1,)).generator.random(4)
    assert not np.array_equal(a, b)


def test_negative_seed_or_label_rejected():
    with pytest.raises(ParameterError):
        RngStream(-1)
    with pytest.raises(ParameterError):
        RngStream(0, (-2,)).generator


# -- distributions -------------------------------------------------------------

def test_poisson_zero_is_degenerate():
    assert np.all(poisson(RngStream(1), 0.0, size=1000) == 0)


def test_multinomial_degenerate():
    assert multinomial(RngStream(1), 10, (1, 0, 0)).tolist() == [10, 0, 0]


def test_exponential_mean():
    x = exponential(RngStream(3), 10.0, size=1_000_000)
    assert 9.95 <= x.mean() <= 10.05


def test_uniform_and_dirichlet_moments():
    g = RngStream(4).generator
    u = uniform(g, 2.0, 4.0, size=200_000)
    assert u.min() >= 2.0 and u.max() < 4.0
    assert u.mean() == pytest.approx(3.0, abs=0.01)
    d = dirichlet(g, [1.0, 1.0, 1.0], size=100_000)
    np.testing.assert_allclose(d.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(d.mean(axis=0), 1 / 3, atol=0.005)


@pytest.mark.parametrize("call", [
    lambda g: poisson(g, -1.0),
    lambda g: poisson(g, math.inf),
    lambda g: multinomial(g, 5, (0.5, 0.4)),
    lambda g: multinomial(g, -1, (0.5, 0.5)),
    lambda g: multinomial(g, 5, (1.5, -0.5)),
    lambda g: exponential(g, 0.0),
    lambda g: uniform(g, 3.0, 3.0),
    lambda g: dirichlet(g, [1.0, 0.0]),
])
def test_invalid_parameters_rejected(call):
    with pytest.raises(ParameterError):
        call(np.random.default_rng(0))


def test_multinomial_tolerates_rounding():
    p = np.full(7, 1 / 7)
    assert multinomial(np.random.default_rng(0), 70, p).sum() == 70


# -- multivariate normal -------------------------------------------------------

def test_fit_mvn_identical_samples():
    v = np.array([3.0, 4.0, 5.0])
    model = fit_mvn(np.tile(v, (6, 1)), ridge=1e-6)
    np.testing.assert_array_equal(model.mean, v)
    np.testing.assert_allclose(model.cov, 1e-6 * np.eye(3), atol=1e-18)


def test_fit_mvn_hand_example():
    model = fit_mvn([(0.0, 0.0), (2.0, 2.0)], ridge=0.0)
    np.testing.assert_allclose(model.mean, [1.0, 1.0])
    np.testing.assert_allclose(model.cov, [[2.0, 2.0], [2.0, 2.0]])
    model.factor()  # singular but PSD


def test_fit_mvn_default_ridge_scales_with_variance():
    model = fit_mvn([(0.0, 0.0), (2.0, 2.0)])
    assert model.ridge == pytest.approx(2e-6)
    assert np.linalg.eigvalsh(model.cov)[0] > 0


def test_fit_mvn_needs_two_samples():
    with pytest.raises(InsufficientDataError):
        fit_mvn([(1.0, 2.0)])
    with pytest.raises(ParameterError):
        fit_mvn([(1.0, 2.0), (3.0, 4.0)], ridge=-1.0)


def test_fit_mvn_recovers_known_mean():
    g = np.random.default_rng(5)
    mean = np.array([10.0, 20.0])
    cov = np.array([[4.0, 1.5], [1.5, 9.0]])
    x = g.multivariate_normal(mean, cov, size=5000)
    model = fit_mvn(x)
    se = np.sqrt(np.diag(cov) / len(x))
    assert np.all(np.abs(model.mean - mean) <= 3 * se)


def test_sample_mvn_zero_covariance_returns_mean():
    model = MvnModel(np.array([1.0, 2.0]), np.zeros((2, 2)))
    draws = sample_mvn(model, 50, RngStream(0))
    assert np.all(draws == model.mean)


def test_sample_mvn_covariance():
    cov = np.array([[4.0, 1.5], [1.5, 9.0]])
    model = MvnModel(np.zeros(2), cov)
    draws = sample_mvn(model, 1000, RngStream(9))
    emp = np.cov(draws.T)
    scale = np.sqrt(np.outer(np.diag(cov), np.diag(cov)))
    assert np.all(np.abs(emp - cov) / scale <= 0.2)


def test_sample_mvn_symmetry():
    draws = sample_mvn(MvnModel(np.zeros(3), np.eye(3)), 4000, RngStream(11))
    assert abs((draws[:, 0] > 0).mean() - 0.5) <= 0.05


def test_sample_mvn_errors():
    bad = MvnModel(np.zeros(2), np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(NumericError):
        sample_mvn(bad, 3, RngStream(0))
    with pytest.raises(ParameterError):
        sample_mvn(MvnModel(np.zeros(2), np.eye(2)), 0, RngStream(0))
