"""Sampling the constrained minimum y* over a Sobol discretization."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from . import gp
from .constraint import ConstraintPosterior, predict_constraint_joint, predict_constraint_marginal

MAX_SOBOL_DIM = 21201
MAX_RETRIES = 10


@dataclass(frozen=True)
class YstarSet:
    values: np.ndarray
    sampler: str
    discretization_size: int
    fallback_count: int = 0
    clipped_count: int = 0

    def __len__(self):
        return len(self.values)


def sobol_points(dim: int, m: int, shift_rng: np.random.Generator | None = None) -> np.ndarray:
    """First ``m`` points of the unscrambled Sobol sequence (Joe-Kuo directions).

    With ``shift_rng`` a random digital shift (XOR of the 32-bit mantissa) is
    applied, so repeated calls cover the cube differently.
    """
    if dim < 1 or m < 1:
        raise ValueError("dim and m must be >= 1")
    if dim > MAX_SOBOL_DIM:
        raise ValueError(f"Sobol direction numbers only cover {MAX_SOBOL_DIM} dimensions")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pts = qmc.Sobol(d=dim, scramble=False).random(m)
    if shift_rng is not None:
        ints = np.floor(pts * 2.0 ** 32).astype(np.uint64)
        shift = shift_rng.integers(0, 2 ** 32, size=dim, dtype=np.uint64)
        pts = (ints ^ shift).astype(float) / 2.0 ** 32
    return pts


def _constrained_min(y, c, delta):
    """Column-wise min of y over rows with c <= delta; NaN where none feasible."""
    masked = np.where(c <= delta, y, np.inf)
    out = masked.min(axis=0)
    out[~np.isfinite(out)] = np.nan
    return out


def _clip(values, clip_at, clip_range):
    if clip_at is None:
        return values, 0
    ceiling = clip_at - 1e-8 * (clip_range if clip_range and clip_range > 0 else 1.0)
    over = values > ceiling
    return np.where(over, ceiling, values), int(over.sum())


def _sample(draw_pair, k, delta, rng, sampler, m, clip_at, clip_range):
    y, c = draw_pair(k, rng)
    ystar = _constrained_min(y, c, delta)
    unconstrained = y.min(axis=0)
    for _ in range(MAX_RETRIES):
        empty = np.isnan(ystar)
        if not empty.any():
            break
        y2, c2 = draw_pair(int(empty.sum()), rng)
        ystar[empty] = _constrained_min(y2, c2, delta)
        unconstrained[empty] = y2.min(axis=0)
    empty = np.isnan(ystar)
    ystar[empty] = unconstrained[empty]
    values, n_clipped = _clip(ystar, clip_at, clip_range)
    return YstarSet(values, sampler, m, int(empty.sum()), n_clipped)


def sample_ystar_joint(obj: gp.GpPosterior, con: ConstraintPosterior, Xhat, delta: float, k: int,
                       rng: np.random.Generator, clip_at: float | None = None,
                       clip_range: float | None = None) -> YstarSet:
    """Draw ``k`` constrained minima from joint sample paths of y and c over ``Xhat``.

    If ``clip_at`` (the incumbent) is given, samples above it are clipped to
    ``clip_at - 1e-8 * clip_range``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    Xhat = np.atleast_2d(np.asarray(Xhat, dtype=float))
    by = gp.predict_joint(obj, Xhat)
    ly = _factor(by)
    if np.isposinf(delta):
        lc = None
    else:
        bc = predict_constraint_joint(con, Xhat)
        lc = _factor(bc)

    def draw_pair(count, r):
        y = _draw(by, ly, count, r)
        c = np.full_like(y, -np.inf) if lc is None else _draw(bc, lc, count, r)
        return y, c

    return _sample(draw_pair, k, delta, rng, "joint", Xhat.shape[0], clip_at, clip_range)


def _factor(belief):
    if not np.any(np.diag(belief.covariance) > 0):
        return None
    return gp.jittered_cholesky(belief.covariance, "joint covariance")


def _draw(belief, L, count, rng):
    noise = rng.standard_normal((belief.mean.shape[0], count))
    if L is None:
        return np.repeat(belief.mean[:, None], count, axis=1)
    return L @ noise + belief.mean[:, None]


def sample_ystar_marginal(obj: gp.GpPosterior, con: ConstraintPosterior, Xhat, delta: float, k: int,
                          rng: np.random.Generator, clip_at: float | None = None,
                          clip_range: float | None = None) -> YstarSet:
    """Mean-field variant: every y(x), c(x) on ``Xhat`` drawn independently."""
    if k < 1:
        raise ValueError("k must be >= 1")
    Xhat = np.atleast_2d(np.asarray(Xhat, dtype=float))
    mu_y, var_y = gp.predict_marginal(obj, Xhat)
    sd_y = np.sqrt(var_y)
    if np.isposinf(delta):
        mu_c = sd_c = None
    else:
        mu_c, var_c = predict_constraint_marginal(con, Xhat)
        sd_c = np.sqrt(var_c)

    def draw_pair(count, r):
        y = mu_y[:, None] + sd_y[:, None] * r.standard_normal((len(mu_y), count))
        if mu_c is None:
            return y, np.full_like(y, -np.inf)
        c = mu_c[:, None] + sd_c[:, None] * r.standard_normal((len(mu_c), count))
        return y, c

    return _sample(draw_pair, k, delta, rng, "marginal", Xhat.shape[0], clip_at, clip_range)


def sample_ystar(sampler: str, *args, **kwargs) -> YstarSet:
    if sampler == "joint":
        return sample_ystar_joint(*args, **kwargs)
    if sampler == "marginal":
        return sample_ystar_marginal(*args, **kwargs)
    raise ValueError(f"unknown sampler {sampler!r}")
