import math

import numpy as np
import pytest
from scipy.stats import norm

from cmes import gp
from cmes.baselines import (Incumbent, ap_impute, ap_score, cei_score, expected_improvement,
                            feasible_prob, random_candidate)
from cmes.constraint import real_valued
from cmes.gp import KernelParams
from cmes.space import Categorical, Continuous, Integer, SearchSpace


def test_ei_hand_values():
    assert expected_improvement(0.0, 1.0, 0.0) == pytest.approx(norm.pdf(0), rel=1e-15)
    assert expected_improvement(0.0, 1.0, 0.0) == pytest.approx(0.398942, abs=1e-6)
    assert expected_improvement(1.0, 0.0, 0.5) == 0.0
    assert expected_improvement(-1.0, 0.0, 0.5) == 1.5
    with pytest.raises(ValueError):
        expected_improvement(0.0, -1.0, 0.0)


def test_ei_monte_carlo():
    y = np.random.default_rng(0).normal(-1.0, 2.0, size=1_000_000)
    imp = np.maximum(0.0 - y, 0.0)
    se = imp.std() / math.sqrt(imp.size)
    assert abs(expected_improvement(-1.0, 2.0, 0.0) - imp.mean()) < 3 * se


def test_ei_positive_homogeneity():
    mu, sd = np.array([0.3, -0.2, 1.0]), np.array([0.5, 1.0, 2.0])
    a = expected_improvement(mu, sd, 0.1)
    b = expected_improvement(7 * mu, 7 * sd, 0.7)
    assert np.allclose(b, 7 * a, rtol=1e-12)


def models():
    X = np.array([[0.1], [0.4], [0.8]])
    params = KernelParams(np.array([0.3]), 1.0, 1e4)
    obj = gp.fit_posterior(X, np.array([1.0, 0.2, 0.5]), params)
    con = real_valued(gp.fit_posterior(X, np.array([-1.0, -0.5, 2.0]), params))
    return obj, con


def test_cei_is_product_and_fallback():
    obj, con = models()
    Xs = np.linspace(0, 1, 11)[:, None]
    pf = feasible_prob(Xs, con, 0.0)
    mu, var = gp.predict_marginal(obj, Xs)
    ei = expected_improvement(mu, np.sqrt(var), 0.2)
    assert np.allclose(cei_score(Xs, obj, con, Incumbent(0.2)), pf * ei, rtol=1e-14)
    assert np.array_equal(cei_score(Xs, obj, con, Incumbent()), pf)
    assert np.all(cei_score(Xs, obj, con, Incumbent(0.2)) >= 0)
    assert isinstance(cei_score(Xs[0], obj, con, Incumbent(0.2)), float)


def test_cei_zero_where_surely_infeasible():
    obj, con = models()
    assert cei_score(np.array([0.8]), obj, con, Incumbent(0.2), delta=-50.0) == 0.0


def test_feasible_prob_real_valued_is_phi():
    _, con = models()
    x = np.array([[0.55]])
    mu, var = gp.predict_marginal(con.gp_post, x)
    assert feasible_prob(x, con, 0.3)[0] == pytest.approx(norm.cdf((0.3 - mu[0]) / math.sqrt(var[0])), rel=1e-12)


def test_ap_impute_rules():
    z = [1.0, None, 2.0, 3.0, None]
    feas = [True, False, True, True, False]
    assert ap_impute(z, feas, 100).tolist() == [1, 3, 2, 3, 3]
    assert ap_impute(z, feas, 50).tolist() == [1, 2, 2, 3, 2]
    assert ap_impute([1.0, 2.0], [True, True]).tolist() == [1.0, 2.0]
    with pytest.raises(ValueError):
        ap_impute([None, None], [False, False])
    with pytest.raises(ValueError):
        ap_impute(z, feas, 40)


def test_ap_imputation_raises_mean_near_infeasible_point():
    X = np.array([[0.1], [0.5], [0.9]])
    params = KernelParams(np.array([0.2]), 1.0, 1e4)
    z = ap_impute([0.0, None, 1.0], [True, False, True], 100)
    with_imp = gp.fit_posterior(X, z, params)
    without = gp.fit_posterior(X[[0, 2]], z[[0, 2]], params)
    x = np.array([[0.5]])
    assert gp.predict_marginal(with_imp, x)[0][0] > gp.predict_marginal(without, x)[0][0]


def test_ap_score_is_plain_ei_without_infeasible_points():
    obj, _ = models()
    Xs = np.linspace(0, 1, 7)[:, None]
    mu, var = gp.predict_marginal(obj, Xs)
    assert np.allclose(ap_score(Xs, obj, 0.2), expected_improvement(mu, np.sqrt(var), 0.2))


def test_random_candidate_uniformity():
    space = SearchSpace([Continuous(-1, 3), Integer(1, 5), Categorical(("x", "y"))])
    rng = np.random.default_rng(0)
    draws = [random_candidate(space, rng) for _ in range(100_000)]
    cont = np.array([d[0] for d in draws])
    assert abs(cont.mean() - 1.0) < 3 * (4 / math.sqrt(12)) / math.sqrt(cont.size)
    ints = np.array([d[1] for d in draws])
    freq = np.bincount(ints, minlength=6)[1:] / ints.size
    assert np.all(np.abs(freq - 0.2) <= 0.01)
    cats = [d[2] for d in draws]
    assert abs(cats.count("x") / len(cats) - 0.5) < 0.01
    a = random_candidate(space, np.random.default_rng(4))
    assert a == random_candidate(space, np.random.default_rng(4))
