import numpy as np
import pytest

from cmes.problems import PROBLEMS, branin, get_problem, hartmann3, make_blackbox, toy2d


def test_toy2d_centres():
    v, f = toy2d(-0.7, 0.5)
    assert v == pytest.approx(0.3, abs=1e-12) and f
    v, f = toy2d(0.5, 0.3)
    assert v == pytest.approx(0.6, abs=1e-12) and f


def test_toy2d_corner_infeasible():
    v, f = toy2d(1.0, -1.0)
    assert v == pytest.approx(0.9 + (1.3 ** 2 + 0.7 ** 2) / 0.6, rel=1e-12)
    assert not f


def test_toy2d_out_of_box():
    with pytest.raises(ValueError):
        toy2d(1.5, 0.0)


def test_reference_minima():
    assert branin(np.pi, 2.275) == pytest.approx(0.397887, abs=1e-6)
    assert hartmann3([0.114614, 0.555649, 0.852547]) == pytest.approx(-3.86278, abs=1e-5)


def test_constraints_exclude_some_optima():
    assert get_problem("hartmann3").feasible([0.2, 0.5, 0.5])
    assert not get_problem("hartmann3").feasible([0.114614, 0.555649, 0.852547])
    assert get_problem("branin").feasible((np.pi, 2.275))
    assert not get_problem("branin").feasible((-np.pi, 12.275))


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_blackbox_contract(name):
    prob = get_problem(name)
    rng = np.random.default_rng(0)
    from cmes.baselines import random_candidate
    for _ in range(50):
        x = random_candidate(prob.space, rng)
        obj, con = prob.evaluate(x)
        zy, zc = make_blackbox(prob, "binary_unobserved")(x)
        assert zc in (-1.0, 1.0)
        assert (zy is None) == (zc > 0)
        assert make_blackbox(prob, "binary_observed")(x) == (obj, zc)
        assert make_blackbox(prob, "real_valued")(x) == (obj, con)


def test_unknown_problem():
    with pytest.raises(ValueError):
        get_problem("nope")
