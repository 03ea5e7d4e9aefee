"""Closed-form entropy differences for constrained max-value entropy search.

All scores are vectorized over numpy arrays. Wherever a ratio of CDFs would
overflow, the prefactor is folded into an exponent so that every input with
|gamma| <= 100 yields a finite score.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gp
from .constraint import (ConstraintPosterior, FeasibilityStats, LocalConstraintApprox,
                         feasibility_stats, local_laplace, predict_constraint_marginal)
from .numerics import hazard, log1mexp, log_phi

DEGENERATE_LOG_Z = -1e-12
MODES = ("real_valued", "binary", "binary_unobserved_mixture")


@dataclass(frozen=True)
class StandardizedInputs:
    gamma_y: np.ndarray
    gamma_c: np.ndarray
    log_Zy: np.ndarray
    log_Zc: np.ndarray

    @classmethod
    def from_gammas(cls, gamma_y, gamma_c):
        gamma_y = np.asarray(gamma_y, dtype=float)
        gamma_c = np.asarray(gamma_c, dtype=float)
        return cls(gamma_y, gamma_c, log_phi(gamma_y), log_phi(gamma_c))


@dataclass(frozen=True)
class NoisyAdjustment:
    rho_y: np.ndarray
    rho_c: np.ndarray


def noise_rho(sigma, noise_precision):
    """rho = sigma sqrt(alpha) / sqrt(1 + sigma^2 alpha)."""
    t = np.asarray(sigma, dtype=float) * np.sqrt(noise_precision)
    return t / np.sqrt(1.0 + t * t)


def noisy_gamma(gamma, adj_rho):
    adj_rho = np.asarray(adj_rho, dtype=float)
    if np.any(~(adj_rho > 0)) or np.any(adj_rho > 1):
        raise ValueError("rho must lie in (0, 1]")
    return np.asarray(gamma, dtype=float) / adj_rho


def _finish(score, degenerate, return_degenerate):
    score = np.where(degenerate, 0.0, score)
    score = score if score.ndim else float(score)
    if return_degenerate:
        return score, degenerate
    return score


def _log_z_and_weight(log_a, log_b):
    """log Z for Z = 1 - a b, and log B for B = a b / Z; flags a b ~ 1."""
    s = log_a + log_b
    degenerate = s > DEGENERATE_LOG_Z
    s_safe = np.minimum(s, DEGENERATE_LOG_Z)
    log_z = log1mexp(s_safe)
    return log_z, s_safe - log_z, degenerate


def entropy_diff_real(s: StandardizedInputs, return_degenerate=False):
    """H[P(y, c)] - H[P(y, c | y*)] for real-valued constraint feedback."""
    log_z, log_b, degenerate = _log_z_and_weight(s.log_Zy, s.log_Zc)
    num = s.gamma_c * hazard(-s.gamma_c) + s.gamma_y * hazard(-s.gamma_y)
    score = -log_z - 0.5 * np.exp(log_b) * num
    return _finish(np.asarray(score), degenerate, return_degenerate)


def entropy_diff_binary(gamma_y, log_Zy, local: LocalConstraintApprox, fs: FeasibilityStats,
                        return_degenerate=False):
    """H[P(y)] + H[Q(z_c)] - H[P(y, z_c | y*)] under the local Laplace factorization.

    ``gamma_y``/``log_Zy`` may carry extra leading axes (e.g. one per y*
    sample) that broadcast against the per-point constraint quantities.
    """
    gamma_y = np.asarray(gamma_y, dtype=float)
    log_Zy = np.asarray(log_Zy, dtype=float)
    log_zt = fs.log_Ztilde
    log_z, log_b, degenerate = _log_z_and_weight(log_Zy, log_zt)
    # B / Z~_c folded into the exponents of the per-outcome weights
    log_bz = (log_Zy - log_z)[..., None]
    log_q = local.log_q
    with np.errstate(under="ignore"):
        e_term = (np.exp(log_bz + fs.log_F) - np.exp(log_b)[..., None]) * log_q \
            - np.exp(log_bz + fs.log_1mF) * fs.log_1mF
        e_term = np.sum(np.exp(log_q) * e_term, axis=-1)
    score = -log_z - 0.5 * np.exp(log_b) * gamma_y * hazard(-gamma_y) - e_term
    return _finish(np.asarray(score), degenerate, return_degenerate)


def entropy_diff_marginal_y(gamma_y_tilde, log_Ztilde_y, log_Zc, return_degenerate=False):
    """H[P(z_y)] - H[P(z_y | y*)], scoring an objective-only evaluation."""
    g = np.asarray(gamma_y_tilde, dtype=float)
    log_zy = np.asarray(log_Ztilde_y, dtype=float)
    log_zc = np.asarray(log_Zc, dtype=float)
    log_z, log_b, degenerate = _log_z_and_weight(log_zy, log_zc)
    log_1mzc = log1mexp(np.minimum(log_zc, 0.0))
    with np.errstate(under="ignore", invalid="ignore"):
        ent = np.where(np.isfinite(log_1mzc), np.exp(log_1mzc) * log_1mzc, 0.0)
    score = -log_z - 0.5 * np.exp(log_b) * g * hazard(-g) + np.exp(log_zy - log_z) * ent
    return _finish(np.asarray(score), degenerate, return_degenerate)


def entropy_diff_marginal_zc(log_Zy, local: LocalConstraintApprox, fs: FeasibilityStats,
                             return_degenerate=False):
    """H[Q(z_c)] - H[P(z_c | y*)], scoring a constraint-only binary evaluation."""
    log_Zy = np.asarray(log_Zy, dtype=float)
    log_z, log_b, degenerate = _log_z_and_weight(log_Zy, fs.log_Ztilde)
    log_kappa = log1mexp(np.minimum(log_Zy[..., None] + fs.log_F, 0.0))
    q = np.exp(local.log_q)
    with np.errstate(under="ignore", invalid="ignore"):
        k_ent = np.sum(q * np.where(np.isfinite(log_kappa), np.exp(log_kappa) * log_kappa, 0.0),
                       axis=-1)
        f_dev = np.exp(fs.log_F) - np.exp(fs.log_Ztilde)[..., None]
        q_term = np.sum(q * f_dev * local.log_q, axis=-1)
    score = -log_z + np.exp(-log_z) * k_ent - np.exp(log_Zy - log_z) * q_term
    return _finish(np.asarray(score), degenerate, return_degenerate)


def mixture_score_unobserved(joint_score, marginal_zc_score, local: LocalConstraintApprox):
    """Q(z_c=-1) * joint score + Q(z_c=+1) * constraint-only score."""
    q = np.exp(local.log_q)
    return q[..., 0] * np.asarray(joint_score) + q[..., 1] * np.asarray(marginal_zc_score)


def cmes_score(X, obj: gp.GpPosterior, con: ConstraintPosterior, ystars, delta: float,
               mode: str = "binary", noisy: bool = False, newton_steps: int | None = 1):
    """Monte-Carlo cMES over the sampled constrained minima.

    ``X`` is one point or an (m, p) batch; returns a float or an (m,) array.
    Constraint-side terms are computed once per point and shared across y*.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    ys = np.asarray(getattr(ystars, "values", ystars), dtype=float).ravel()
    if ys.size == 0:
        raise ValueError("need at least one y* sample")
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = X.reshape(1, -1) if single else X
    mu_y, var_y = gp.predict_marginal(obj, X)
    sd_y = np.sqrt(np.maximum(var_y, 1e-300))
    gamma_y = (ys[:, None] - mu_y[None, :]) / sd_y[None, :]
    if noisy:
        noise_prec = obj.params.noise_precision / obj.target_scale ** 2
        gamma_y = noisy_gamma(gamma_y, noise_rho(sd_y, noise_prec)[None, :])
    log_zy = log_phi(gamma_y)
    mu_c, var_c = predict_constraint_marginal(con, X)
    var_c = np.maximum(var_c, 1e-12 * con.prior_variance)

    if mode == "real_valued":
        if con.mode != "real_valued":
            raise ValueError("real_valued mode needs a real-valued constraint posterior")
        sd_c = np.sqrt(var_c)
        gamma_c = (delta - mu_c) / sd_c
        if noisy:
            cp = con.gp_post
            gamma_c = noisy_gamma(gamma_c, noise_rho(sd_c, cp.params.noise_precision / cp.target_scale ** 2))
        s = StandardizedInputs(gamma_y, np.broadcast_to(gamma_c, gamma_y.shape), log_zy,
                               np.broadcast_to(log_phi(gamma_c), gamma_y.shape))
        scores = entropy_diff_real(s)
    else:
        local = local_laplace(mu_c, var_c, newton_steps)
        fs = feasibility_stats(local, delta)
        scores = entropy_diff_binary(gamma_y, log_zy, local, fs)
        if mode == "binary_unobserved_mixture":
            marg = entropy_diff_marginal_zc(log_zy, local, fs)
            scores = mixture_score_unobserved(scores, marg, local)
    out = np.mean(np.atleast_2d(scores), axis=0)
    return float(out[0]) if single else out
