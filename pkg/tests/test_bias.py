import numpy as np
import pytest
from scipy import stats

from cmes.bias import bias_study, toy2d_posterior


@pytest.fixture(scope="module")
def posterior():
    return toy2d_posterior()


@pytest.fixture(scope="module")
def report(posterior):
    return bias_study([200, 2000], n_draws=5000, seed=0, posterior=posterior, keep_samples=True)


def test_fixed_posterior_is_reproducible(posterior):
    again = toy2d_posterior()
    assert np.array_equal(posterior.X, again.X)
    assert posterior.delta == pytest.approx(np.log(9))
    assert posterior.obj.n < len(posterior.X)   # objective only seen where feasible


def test_marginal_sampler_drifts_down(report):
    assert report.marginal[2000].mean < report.marginal[200].mean
    assert report.divergence < 0 and report.divergence_p < 0.01


def test_joint_sampler_is_stable(report):
    assert report.joint_shift < 0.1 * report.posterior_range
    assert report.joint_shift_fraction < 0.1


def test_marginal_below_joint(report):
    a, b = report.samples["marginal"][2000], report.samples["joint"][2000]
    assert stats.ttest_ind(a, b, equal_var=False, alternative="less").pvalue < 0.01


def test_histograms_share_edges(report):
    for name in ("joint", "marginal"):
        for m in (200, 2000):
            assert sum(getattr(report, name)[m].hist_counts) == 5000
    d = report.to_dict()
    assert len(d["bin_edges"]) == 41 and set(d["joint"]) == {"200", "2000"}


def test_single_m_has_no_statistic(posterior):
    r = bias_study([100], n_draws=50, posterior=posterior)
    assert r.divergence is None and r.joint_shift is None
    assert list(r.joint) == [100] and list(r.marginal) == [100]


def test_bad_m_values(posterior):
    with pytest.raises(ValueError):
        bias_study([2000, 200], posterior=posterior)
    with pytest.raises(ValueError):
        bias_study([0, 10], posterior=posterior)
