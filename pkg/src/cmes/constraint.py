"""Posterior over the latent constraint function c(x).

Binary feedback z_c in {-1, +1} with P(z_c | c) = sigmoid(z_c * c) is handled
by expectation propagation (sequential, damped site updates, Gauss-Hermite
tilted moments). A Laplace-mode fit is available both as an explicit choice
and as the fallback when EP breaks down. Real-valued feedback wraps a plain
:class:`~cmes.gp.GpPosterior`.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize
from scipy.special import logsumexp

from . import gp
from .gp import GpPosterior, JointBelief, KernelParams
from .numerics import log_phi, log_sigmoid, sigmoid

_GH_T, _GH_W = np.polynomial.hermite.hermgauss(32)
_GH_LOGW = np.log(_GH_W) - 0.5 * np.log(np.pi)


def tilted_moments(z, mu, var):
    """log Z, mean and variance of sigmoid(z c) N(c | mu, var), 32-node Gauss-Hermite."""
    z, mu, var = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (z, mu, var)))
    c = mu[..., None] + np.sqrt(2.0 * var)[..., None] * _GH_T
    logw = _GH_LOGW + log_sigmoid(z[..., None] * c)
    log_z = logsumexp(logw, axis=-1)
    w = np.exp(logw - log_z[..., None])
    mean = np.sum(w * c, axis=-1)
    m2 = np.sum(w * (c - mean[..., None]) ** 2, axis=-1)
    return log_z, mean, m2


def _tilted_scalar(z, mu, var):
    # hot path of the sequential EP sweep; same quadrature as tilted_moments
    c = mu + np.sqrt(2.0 * var) * _GH_T
    logw = _GH_LOGW - np.logaddexp(0.0, -z * c)
    top = logw.max()
    w = np.exp(logw - top)
    w /= w.sum()
    mean = w @ c
    d = c - mean
    return mean, w @ (d * d)


@dataclass(frozen=True)
class ConstraintPosterior:
    """Gaussian posterior over c(.).

    ``mode`` is ``"real_valued"`` (``gp_post`` set) or ``"binary"``. In the
    binary case the posterior is represented through Gaussian sites with
    precisions ``site_precision`` and natural means ``site_nu``, plus the
    cached factor ``chol_b`` of B = I + S^1/2 K S^1/2 and weight vector
    ``alpha`` (posterior mean at x is k(x)^T alpha).
    """
    mode: str
    gp_post: GpPosterior | None = None
    train_inputs: np.ndarray | None = None
    labels: np.ndarray | None = None
    params: KernelParams | None = None
    site_precision: np.ndarray | None = None
    site_nu: np.ndarray | None = None
    chol_b: np.ndarray | None = None
    alpha: np.ndarray | None = None
    method: str = "ep"
    converged: bool = True
    sweeps: int = 0
    log_evidence: float = float("nan")

    @property
    def n(self) -> int:
        if self.mode == "real_valued":
            return self.gp_post.n
        return self.train_inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.gp_post.dim if self.mode == "real_valued" else self.params.dim

    @property
    def prior_variance(self) -> float:
        if self.mode == "real_valued":
            return self.gp_post.params.amplitude * self.gp_post.target_scale ** 2
        return self.params.amplitude


def real_valued(post: GpPosterior) -> ConstraintPosterior:
    return ConstraintPosterior("real_valued", gp_post=post)


def _site_factor(K, tau):
    n = K.shape[0]
    s = np.sqrt(tau)
    B = np.eye(n) + s[:, None] * K * s[None, :]
    L = sla.cholesky(B, lower=True, check_finite=False)
    return s, L


def _posterior_from_sites(K, tau, nu):
    """Sigma = (K^-1 + S)^-1 and mu = Sigma nu, plus the B factor and alpha."""
    s, L = _site_factor(K, tau)
    V = sla.solve_triangular(L, s[:, None] * K, lower=True, check_finite=False)
    Sigma = K - V.T @ V
    mu = Sigma @ nu
    Knu = K @ nu
    alpha = nu - s * sla.cho_solve((L, True), s * Knu, check_finite=False)
    return Sigma, mu, L, alpha


def _ep_log_evidence(K, labels, tau, nu, Sigma, mu, L):
    d = np.diag(Sigma)
    tau_cav = 1.0 / d - tau
    nu_cav = mu / d - nu
    var_cav = 1.0 / tau_cav
    mu_cav = nu_cav * var_cav
    log_zhat, _, _ = tilted_moments(labels, mu_cav, var_cav)
    quad = 0.5 * nu @ Sigma @ nu + 0.5 * np.sum(
        (mu_cav ** 2 * tau * tau_cav - 2.0 * mu_cav * nu * tau_cav - nu ** 2) / (tau_cav + tau))
    return float(np.sum(log_zhat) - np.sum(np.log(np.diag(L)))
                 + 0.5 * np.sum(np.log1p(tau / tau_cav)) + quad)


def fit_ep(X, zc, params: KernelParams, *, damping=0.5, tol=1e-6, max_sweeps=100,
           rng: np.random.Generator | None = None, init_sites=None) -> ConstraintPosterior:
    """Expectation propagation for GP classification with a logistic likelihood.

    Sites are updated sequentially in a random order each sweep with damping
    on the natural parameters. Convergence is declared when the largest
    change of any site natural parameter within a sweep drops below ``tol``.
    """
    X = np.asarray(X, dtype=float).reshape(-1, params.dim)
    labels = np.asarray(zc, dtype=float).ravel()
    n = X.shape[0]
    if n == 0:
        return empty_binary(params)
    if not np.all(np.isin(labels, (-1.0, 1.0))):
        raise ValueError("binary labels must be -1 or +1")
    rng = rng if rng is not None else np.random.default_rng(0)
    K = gp.kernel_matrix(X, X, params)
    K[np.diag_indices(n)] += 1e-10 * params.amplitude
    if init_sites is not None and len(init_sites[0]) == n:
        tau, nu = (np.array(a, dtype=float) for a in init_sites)
    else:
        tau, nu = np.zeros(n), np.zeros(n)
    Sigma, mu, _, _ = _posterior_from_sites(K, tau, nu)

    converged = False
    stuck_sweeps = 0
    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        max_delta = 0.0
        skipped = 0
        for i in rng.permutation(n):
            tau_cav = 1.0 / Sigma[i, i] - tau[i]
            nu_cav = mu[i] / Sigma[i, i] - nu[i]
            if tau_cav <= 0:
                skipped += 1
                continue
            m_hat, v_hat = _tilted_scalar(labels[i], nu_cav / tau_cav, 1.0 / tau_cav)
            tau_new = max(1.0 / v_hat - tau_cav, 0.0)
            nu_new = m_hat / v_hat - nu_cav
            tau_new = (1.0 - damping) * tau[i] + damping * tau_new
            nu_new = (1.0 - damping) * nu[i] + damping * nu_new
            d_tau = tau_new - tau[i]
            max_delta = max(max_delta, abs(d_tau), abs(nu_new - nu[i]))
            tau[i], nu[i] = tau_new, nu_new
            si = Sigma[:, i].copy()
            Sigma -= (d_tau / (1.0 + d_tau * si[i])) * np.outer(si, si)
            mu = Sigma @ nu
        Sigma, mu, _, _ = _posterior_from_sites(K, tau, nu)
        stuck_sweeps = stuck_sweeps + 1 if skipped else 0
        if stuck_sweeps >= 5:
            break
        if max_delta < tol and not skipped:
            converged = True
            break

    if stuck_sweeps >= 5 or not np.all(np.isfinite(mu)):
        warnings.warn("EP diverged (negative cavity variances); falling back to Laplace",
                      RuntimeWarning)
        post = fit_laplace(X, labels, params)
        return replace(post, method="laplace_fallback")
    if not converged:
        warnings.warn(f"EP did not converge in {max_sweeps} sweeps", RuntimeWarning)
    Sigma, mu, L, alpha = _posterior_from_sites(K, tau, nu)
    lz = _ep_log_evidence(K, labels, tau, nu, Sigma, mu, L)
    return ConstraintPosterior("binary", train_inputs=X, labels=labels, params=params,
                               site_precision=tau, site_nu=nu, chol_b=L, alpha=alpha,
                               method="ep", converged=converged, sweeps=sweep, log_evidence=lz)


def fit_laplace(X, zc, params: KernelParams, tol=1e-10, max_iter=100) -> ConstraintPosterior:
    """Laplace-mode GP classification (Newton iterations on the latent mode)."""
    X = np.asarray(X, dtype=float).reshape(-1, params.dim)
    labels = np.asarray(zc, dtype=float).ravel()
    n = X.shape[0]
    if n == 0:
        return empty_binary(params)
    K = gp.kernel_matrix(X, X, params)
    f = np.zeros(n)
    obj_old = -np.inf
    for _ in range(max_iter):
        pi = sigmoid(f)
        W = pi * (1.0 - pi)
        grad = (labels + 1.0) / 2.0 - pi
        s, L = _site_factor(K, W)
        b = W * f + grad
        a = b - s * sla.cho_solve((L, True), s * (K @ b), check_finite=False)
        f = K @ a
        obj = -0.5 * a @ f + np.sum(log_sigmoid(labels * f))
        if abs(obj - obj_old) < tol:
            break
        obj_old = obj
    pi = sigmoid(f)
    W = pi * (1.0 - pi)
    grad = (labels + 1.0) / 2.0 - pi
    s, L = _site_factor(K, W)
    lz = float(-0.5 * a @ f + np.sum(log_sigmoid(labels * f)) - np.sum(np.log(np.diag(L))))
    return ConstraintPosterior("binary", train_inputs=X, labels=labels, params=params,
                               site_precision=W, site_nu=W * f + grad, chol_b=L, alpha=grad,
                               method="laplace", converged=True, log_evidence=lz)


def empty_binary(params: KernelParams) -> ConstraintPosterior:
    p = params.dim
    return ConstraintPosterior("binary", train_inputs=np.zeros((0, p)), labels=np.zeros(0),
                               params=params, site_precision=np.zeros(0), site_nu=np.zeros(0),
                               chol_b=np.zeros((0, 0)), alpha=np.zeros(0), log_evidence=0.0)


def _binary_cross(post, Xs):
    Ks = gp.kernel_matrix(Xs, post.train_inputs, post.params)
    if post.n == 0:
        return Ks, Ks @ post.alpha, np.zeros((Xs.shape[0], 0))
    s = np.sqrt(post.site_precision)
    V = sla.solve_triangular(post.chol_b, (s[None, :] * Ks).T, lower=True, check_finite=False).T
    return Ks, Ks @ post.alpha, V


def predict_constraint_marginal(post: ConstraintPosterior, X):
    """Latent mean and variance of c at one point or a batch of points."""
    if post.mode == "real_valued":
        return gp.predict_marginal(post.gp_post, X)
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    Xs = X.reshape(1, -1) if single else X
    if Xs.shape[1] != post.dim:
        raise ValueError("dimension mismatch")
    _, mu, V = _binary_cross(post, Xs)
    var = post.params.amplitude - np.einsum("ij,ij->i", V, V)
    var = np.clip(var, 1e-12 * post.params.amplitude, post.params.amplitude)
    if single:
        return float(mu[0]), float(var[0])
    return mu, var


def predict_constraint_joint(post: ConstraintPosterior, Xhat) -> JointBelief:
    if post.mode == "real_valued":
        return gp.predict_joint(post.gp_post, Xhat)
    Xhat = np.atleast_2d(np.asarray(Xhat, dtype=float))
    _, mu, V = _binary_cross(post, Xhat)
    cov = gp.kernel_matrix(Xhat, Xhat, post.params) - V @ V.T
    cov = 0.5 * (cov + cov.T)
    return JointBelief(mu, cov, Xhat)


def moderation(var):
    """Probit-style moderation factor (1 + pi var / 8)^-1/2."""
    return 1.0 / np.sqrt(1.0 + np.pi * np.asarray(var, dtype=float) / 8.0)


def predict_infeasible_prob(post: ConstraintPosterior, X, *, exact=False):
    """P(z_c = +1 | x). Moderated sigmoid by default, Gauss-Hermite with ``exact``."""
    mu, var = predict_constraint_marginal(post, X)
    if exact:
        return np.exp(tilted_moments(1.0, mu, var)[0])
    return sigmoid(mu * moderation(var))


@dataclass(frozen=True)
class LocalConstraintApprox:
    """Q(z_c) Q(c | z_c) ~ P(z_c | c) P(c), arrays indexed [..., 0] for z_c=-1, [..., 1] for +1."""
    log_q: np.ndarray
    cond_mean: np.ndarray
    cond_var: np.ndarray

    @property
    def q(self):
        return np.exp(self.log_q)


@dataclass(frozen=True)
class FeasibilityStats:
    log_F: np.ndarray
    log_1mF: np.ndarray
    log_Ztilde: np.ndarray


_ZC = np.array([-1.0, 1.0])


def local_laplace(mu_c, var_c, newton_steps: int | None = 1) -> LocalConstraintApprox:
    """Per-point Laplace factorization of sigmoid(z c) N(c | mu_c, var_c).

    One Newton step from c = mu_c gives the conditional mean; the conditional
    variance is the inverse negative Hessian at that point. ``newton_steps``
    of ``None`` iterates to convergence instead.
    """
    mu = np.asarray(mu_c, dtype=float)[..., None]
    var = np.asarray(var_c, dtype=float)[..., None]
    if np.any(~(var > 0)):
        raise ValueError("var_c must be positive")
    z = _ZC
    c = np.broadcast_to(mu, mu.shape[:-1] + (2,)).copy()
    steps = newton_steps if newton_steps is not None else 100
    for _ in range(steps):
        p = sigmoid(c)
        grad = z * sigmoid(-z * c) - (c - mu) / var
        neg_hess = p * (1.0 - p) + 1.0 / var
        step = grad / neg_hess
        c = c + step
        if newton_steps is None and np.all(np.abs(step) < 1e-12):
            break
    p = sigmoid(c)
    cond_var = 1.0 / (p * (1.0 - p) + 1.0 / var)
    if np.any(~(cond_var > 0)):
        warnings.warn("non-positive Laplace variance clamped", RuntimeWarning)
        cond_var = np.maximum(np.nan_to_num(cond_var, nan=1e-12), 1e-12)
    log_q = log_sigmoid(z * mu * moderation(var))
    return LocalConstraintApprox(log_q, c, cond_var)


def feasibility_stats(local: LocalConstraintApprox, delta) -> FeasibilityStats:
    """log F(z_c), log(1 - F(z_c)) and log Z~_c = log E_Q[F]."""
    delta = np.asarray(delta, dtype=float)[..., None] if np.ndim(delta) else delta
    gamma = (delta - local.cond_mean) / np.sqrt(local.cond_var)
    log_F = log_phi(gamma)
    log_1mF = log_phi(-gamma)
    log_zt = logsumexp(local.log_q + log_F, axis=-1)
    return FeasibilityStats(log_F, log_1mF, log_zt)


def default_classifier_params(dim: int) -> KernelParams:
    return KernelParams(np.full(dim, 0.2), 10.0, 1e6)


@dataclass(frozen=True)
class ClassifierBounds:
    lengthscale: tuple = (0.02, 10.0)
    amplitude: tuple = (0.1, 50.0)
    # log-normal hyperprior around the defaults; a handful of labels rarely pins
    # the evidence down, and unregularized maxima run to the box edges
    prior_sd: float = 1.0


def ep_log_evidence_grad(post: ConstraintPosterior) -> np.ndarray:
    """Gradient of the EP evidence in (log lengthscales, log amplitude) at the fixed point."""
    X = post.train_inputs
    s = np.sqrt(post.site_precision)
    L = post.chol_b
    R = s[:, None] * sla.cho_solve((L, True), np.diag(s), check_finite=False)
    b = post.alpha
    W = np.outer(b, b) - R
    return np.array([0.5 * np.sum(W * dK) for dK in gp.kernel_log_grads(X, post.params)])


def fit_classifier(X, zc, init: KernelParams | None = None, bounds: ClassifierBounds | None = None,
                   optimize=True, maxiter=30, rng=None, method="ep") -> ConstraintPosterior:
    """Fit EP (or Laplace) with kernel hyperparameters chosen by maximizing the evidence."""
    X = np.asarray(X, dtype=float)
    zc = np.asarray(zc, dtype=float).ravel()
    p = X.shape[1]
    params = init if init is not None and init.dim == p else default_classifier_params(p)
    fit = fit_ep if method == "ep" else fit_laplace
    if len(zc) == 0:
        return empty_binary(params)
    # a single observed class makes the evidence favour an ever larger constant
    # offset, so hyperparameters stay put until both labels have been seen
    single_class = np.all(zc == zc[0])
    if not optimize or single_class or method != "ep":
        return fit(X, zc, params) if method != "ep" else fit_ep(X, zc, params, rng=rng)
    bounds = bounds or ClassifierBounds()
    lo = np.concatenate([np.full(p, np.log(bounds.lengthscale[0])), [np.log(bounds.amplitude[0])]])
    hi = np.concatenate([np.full(p, np.log(bounds.lengthscale[1])), [np.log(bounds.amplitude[1])]])
    cache = {"sites": None, "best": None, "best_val": np.inf}
    d0 = default_classifier_params(p)
    prior_mu = np.concatenate([np.log(d0.lengthscales), [np.log(d0.amplitude)]])
    prior_prec = 1.0 / bounds.prior_sd ** 2 if bounds.prior_sd else 0.0

    def objective(theta):
        kp = KernelParams(np.exp(theta[:p]), float(np.exp(theta[p])), 1e6)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            post = fit_ep(X, zc, kp, init_sites=cache["sites"], rng=np.random.default_rng(0))
        if post.method != "ep":
            return 1e10, np.zeros_like(theta)
        cache["sites"] = (post.site_precision, post.site_nu)
        dev = theta - prior_mu
        val = -post.log_evidence + 0.5 * prior_prec * float(dev @ dev)
        if val < cache["best_val"]:
            cache["best"], cache["best_val"] = post, val
        return val, -ep_log_evidence_grad(post) + prior_prec * dev

    theta0 = np.clip(np.concatenate([np.log(params.lengthscales), [np.log(params.amplitude)]]), lo, hi)
    minimize(objective, theta0, jac=True, method="L-BFGS-B", bounds=list(zip(lo, hi)),
             options={"maxiter": maxiter})
    best = cache["best"]
    if best is None:
        return fit_ep(X, zc, params, rng=rng)
    return best
