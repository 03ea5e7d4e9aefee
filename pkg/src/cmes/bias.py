"""How the discretization size shifts sampled constrained minima.

Independent ("mean-field") draws over a growing discretization push the
sampled minimum towards minus infinity, while joint sample paths settle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import gp
from .constraint import fit_classifier
from .problems import get_problem
from .thompson import sample_ystar_joint, sample_ystar_marginal, sobol_points

N_FIXED = 20
DESIGN_SEED = 20200


@dataclass
class FixedPosterior:
    obj: gp.GpPosterior
    con: object
    X: np.ndarray
    delta: float


def toy2d_posterior(n: int = N_FIXED, p: float = 0.9, seed: int = DESIGN_SEED) -> FixedPosterior:
    """Objective GP and binary EP classifier on a fixed random toy2d design.

    The objective is only seen at feasible points, as in the unobserved
    scenario.
    """
    prob = get_problem("toy2d")
    rng = np.random.default_rng(seed)
    U = rng.uniform(size=(n, 2))
    pts = [(-1 + 2 * u[0], -1 + 2 * u[1]) for u in U]
    vals = [prob.evaluate(x) for x in pts]
    feas = np.array([c <= 0 for _, c in vals])
    zc = np.where(feas, -1.0, 1.0)
    zy = np.array([v for v, _ in vals])
    fit_rng = np.random.default_rng([seed, 1])
    obj = gp.fit_gp(U[feas], zy[feas], fit_rng)
    con = fit_classifier(U, zc, rng=fit_rng)
    return FixedPosterior(obj, con, U, math.log(p / (1 - p)))


@dataclass
class SamplerSummary:
    mean: float
    std: float
    hist_counts: list
    fallback_count: int


@dataclass
class BiasReport:
    m_values: list
    n_draws: int
    bin_edges: list
    joint: dict = field(default_factory=dict)       # m -> SamplerSummary
    marginal: dict = field(default_factory=dict)
    posterior_range: float = float("nan")
    divergence: float | None = None
    divergence_p: float | None = None
    joint_shift: float | None = None
    joint_shift_fraction: float | None = None
    samples: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        def summ(d):
            return {str(m): vars(s) for m, s in d.items()}
        return {
            "m_values": self.m_values, "n_draws": self.n_draws, "bin_edges": self.bin_edges,
            "joint": summ(self.joint), "marginal": summ(self.marginal),
            "posterior_range": self.posterior_range, "divergence": self.divergence,
            "divergence_p": self.divergence_p, "joint_shift": self.joint_shift,
            "joint_shift_fraction": self.joint_shift_fraction,
        }


def _draw_chunked(fn, post, Xhat, k, rng, chunk):
    vals, fallback = [], 0
    done = 0
    while done < k:
        c = min(chunk, k - done)
        ys = fn(post.obj, post.con, Xhat, post.delta, c, rng)
        vals.append(ys.values)
        fallback += ys.fallback_count
        done += c
    return np.concatenate(vals), fallback


def bias_study(m_values, n_draws: int = 5000, seed: int = 0, posterior: FixedPosterior | None = None,
               bins: int = 40, chunk: int = 1000, keep_samples: bool = False) -> BiasReport:
    """Sample y* under both samplers for every discretization size in ``m_values``.

    The divergence statistic is the marginal-sampler mean at the largest m
    minus the one at the smallest m, with a one-sided Welch p-value for it
    being negative. The joint shift is the absolute change of the joint mean
    between the same two sizes, also as a fraction of the range of the
    posterior mean of y over the largest discretization.
    """
    m_values = [int(m) for m in m_values]
    if not m_values or any(m < 1 for m in m_values):
        raise ValueError("m_values must be positive counts")
    if m_values != sorted(m_values):
        raise ValueError("m_values must be sorted ascending")
    post = posterior or toy2d_posterior()
    rng = np.random.default_rng(seed)
    samples = {"joint": {}, "marginal": {}}
    fallbacks = {"joint": {}, "marginal": {}}
    for m in m_values:
        Xhat = sobol_points(2, m, shift_rng=np.random.default_rng([seed, m]))
        for name, fn in (("joint", sample_ystar_joint), ("marginal", sample_ystar_marginal)):
            v, fb = _draw_chunked(fn, post, Xhat, n_draws, rng, chunk)
            samples[name][m] = v
            fallbacks[name][m] = fb

    every = np.concatenate([v for d in samples.values() for v in d.values()])
    edges = np.histogram_bin_edges(every, bins=bins)
    report = BiasReport(m_values, n_draws, [float(e) for e in edges])
    for name in ("joint", "marginal"):
        target = getattr(report, name)
        for m in m_values:
            v = samples[name][m]
            counts, _ = np.histogram(v, bins=edges)
            target[m] = SamplerSummary(float(v.mean()), float(v.std(ddof=1)) if len(v) > 1 else 0.0,
                                       [int(c) for c in counts], fallbacks[name][m])

    mu, _ = gp.predict_marginal(post.obj, sobol_points(2, m_values[-1],
                                                       shift_rng=np.random.default_rng([seed, m_values[-1]])))
    report.posterior_range = float(np.ptp(mu))
    if len(m_values) > 1:
        lo, hi = m_values[0], m_values[-1]
        a, b = samples["marginal"][hi], samples["marginal"][lo]
        report.divergence = float(a.mean() - b.mean())
        report.divergence_p = float(stats.ttest_ind(a, b, equal_var=False, alternative="less").pvalue)
        report.joint_shift = float(abs(samples["joint"][hi].mean() - samples["joint"][lo].mean()))
        report.joint_shift_fraction = (report.joint_shift / report.posterior_range
                                       if report.posterior_range > 0 else float("inf"))
    if keep_samples:
        report.samples = samples
    return report
