"""Competing strategies: constrained EI, adaptive percentile, random search."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from . import gp
from .constraint import ConstraintPosterior, predict_constraint_marginal, predict_infeasible_prob
from .numerics import log_phi
from .space import Categorical, Integer, SearchSpace


@dataclass(frozen=True)
class Incumbent:
    value: Optional[float] = None

    @property
    def exists(self) -> bool:
        return self.value is not None


def expected_improvement(mu, sigma, incumbent):
    """EI for minimization: E[max(incumbent - y, 0)], y ~ N(mu, sigma^2)."""
    mu, sigma = np.broadcast_arrays(np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float))
    if np.any(sigma < 0):
        raise ValueError("sigma must be nonnegative")
    diff = np.atleast_1d(incumbent - mu)
    sigma = np.atleast_1d(sigma)
    out = np.maximum(diff, 0.0)
    pos = sigma > 0
    u = diff[pos] / sigma[pos]
    out[pos] = diff[pos] * norm.cdf(u) + sigma[pos] * norm.pdf(u)
    out = np.maximum(out, 0.0).reshape(np.shape(mu))
    return out if out.ndim else float(out)


def feasible_prob(X, con: ConstraintPosterior, delta: float = 0.0):
    """P(feasible | x): Phi((delta - mu_c)/sigma_c) for real feedback, moderated Q(z_c=-1) for binary."""
    if con.mode == "real_valued":
        mu, var = predict_constraint_marginal(con, X)
        sd = np.sqrt(np.maximum(var, 1e-300))
        return np.exp(log_phi((delta - np.asarray(mu)) / sd))
    return 1.0 - predict_infeasible_prob(con, X)


def cei_score(X, obj: gp.GpPosterior, con: ConstraintPosterior, inc: Incumbent, delta: float = 0.0):
    """P(feasible) * EI against the feasible incumbent; P(feasible) alone before one exists."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X2 = X.reshape(1, -1) if single else X
    pf = np.asarray(feasible_prob(X2, con, delta), dtype=float)
    if inc.exists:
        mu, var = gp.predict_marginal(obj, X2)
        score = pf * expected_improvement(mu, np.sqrt(var), inc.value)
    else:
        score = pf
    return float(score[0]) if single else score


def ap_impute(z_y, feasible=None, perc: float = 100.0) -> np.ndarray:
    """Replace unfeasible targets by the ``perc`` percentile of all observed values.

    ``z_y`` holds one entry per record (NaN/None where unobserved), or is a
    trajectory whose observations carry both fields. Feasible records keep
    their value.
    """
    if not 50 <= perc <= 100:
        raise ValueError("perc must lie in [50, 100]")
    if hasattr(z_y, "observations"):
        obs = z_y.observations
        z_y, feasible = [o.z_y for o in obs], [o.feasible for o in obs]
    z = np.array([np.nan if v is None else v for v in z_y], dtype=float)
    feasible = np.asarray(feasible, dtype=bool)
    observed = z[~np.isnan(z)]
    if observed.size == 0:
        raise ValueError("no observed objective values to impute from")
    fill = float(np.percentile(observed, perc))
    out = z.copy()
    out[~feasible] = fill
    return out


def ap_score(X, single_gp: gp.GpPosterior, inc: float):
    """EI on the single GP fitted to imputed targets."""
    X = np.asarray(X, dtype=float)
    mu, var = gp.predict_marginal(single_gp, X)
    return expected_improvement(mu, np.sqrt(var), inc)


def random_candidate(space: SearchSpace, rng: np.random.Generator) -> tuple:
    out = []
    for d in space.dims:
        if isinstance(d, Categorical):
            out.append(d.levels[int(rng.integers(len(d.levels)))])
        elif isinstance(d, Integer):
            out.append(int(rng.integers(d.lo, d.hi + 1)))
        else:
            out.append(float(rng.uniform(d.lo, d.hi)))
    return tuple(out)
