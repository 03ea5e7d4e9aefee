"""Exact Gaussian-process regression with a Matern-5/2 ARD kernel.

Posteriors are immutable. Training targets may be standardized internally
(``fit_gp``); every public prediction is returned in original units.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

SQRT5 = np.sqrt(5.0)
JITTER_START = 1e-10
JITTER_MAX = 1e-4


class NumericalError(RuntimeError):
    """A matrix could not be factorized even after maximal jitter."""


@dataclass(frozen=True)
class KernelParams:
    lengthscales: np.ndarray
    amplitude: float
    noise_precision: float
    kind: str = "matern52"

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        if ls.ndim != 1 or np.any(~(ls > 0)):
            raise ValueError("lengthscales must be a positive vector")
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")
        if not self.noise_precision > 0:
            raise ValueError("noise_precision must be positive")
        if self.kind not in ("matern52", "se"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return self.lengthscales.shape[0]

    @property
    def noise_variance(self) -> float:
        return 1.0 / self.noise_precision

    def to_log_vector(self) -> np.ndarray:
        return np.concatenate([np.log(self.lengthscales),
                               [np.log(self.amplitude), np.log(self.noise_variance)]])

    @classmethod
    def from_log_vector(cls, theta, kind="matern52") -> "KernelParams":
        theta = np.asarray(theta, dtype=float)
        return cls(np.exp(theta[:-2]), float(np.exp(theta[-2])),
                   float(np.exp(-theta[-1])), kind)


def _check_dims(X, params):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != params.dim:
        raise ValueError(f"input has {X.shape[1]} columns, kernel expects {params.dim}")
    return X


def _from_sq_dist(d2, params):
    if params.kind == "se":
        return params.amplitude * np.exp(-0.5 * d2)
    r = np.sqrt(np.maximum(d2, 0.0))
    return params.amplitude * (1.0 + SQRT5 * r + (5.0 / 3.0) * d2) * np.exp(-SQRT5 * r)


def kernel_matrix(X1, X2, params: KernelParams) -> np.ndarray:
    X1 = _check_dims(X1, params) / params.lengthscales
    X2 = _check_dims(X2, params) / params.lengthscales
    return _from_sq_dist(cdist(X1, X2, "sqeuclidean"), params)


def kernel_diag(X, params: KernelParams) -> np.ndarray:
    X = _check_dims(X, params)
    return np.full(X.shape[0], params.amplitude)


def matern52_ard(x, x2, params: KernelParams) -> float:
    """Kernel value k(x, x2) for two single points."""
    x = np.asarray(x, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x.shape != x2.shape or x.shape[0] != params.dim:
        raise ValueError("point dimensions do not match the kernel lengthscales")
    d2 = float(np.sum(((x - x2) / params.lengthscales) ** 2))
    return float(_from_sq_dist(np.array(d2), params))


def kernel_log_grads(X, params: KernelParams) -> list[np.ndarray]:
    """dK/d(log lengthscale_j) for each j, then dK/d(log amplitude)."""
    Xs = X / params.lengthscales
    d2 = cdist(Xs, Xs, "sqeuclidean")
    K = _from_sq_dist(d2, params)
    if params.kind == "se":
        base = K
    else:
        r = np.sqrt(d2)
        base = params.amplitude * (5.0 / 3.0) * (1.0 + SQRT5 * r) * np.exp(-SQRT5 * r)
    grads = [base * (Xs[:, j, None] - Xs[None, :, j]) ** 2 for j in range(X.shape[1])]
    grads.append(K)
    return grads


def jittered_cholesky(A: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor with jitter escalation (1e-10 .. 1e-4 of mean diag)."""
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    scale = float(np.mean(np.diag(A)))
    if not np.isfinite(scale):
        raise NumericalError(f"{what} has non-finite diagonal")
    scale = max(scale, 1e-300)
    jitter = JITTER_START * scale
    idx = np.diag_indices(n)
    while jitter <= JITTER_MAX * scale * (1 + 1e-9):
        B = A.copy()
        B[idx] += jitter
        try:
            return sla.cholesky(B, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    mineig = float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])
    raise NumericalError(
        f"{what} ({n}x{n}) not positive definite after jitter {JITTER_MAX:g}*mean(diag); "
        f"smallest eigenvalue {mineig:.3e}, mean diagonal {scale:.3e}")


@dataclass(frozen=True)
class GpPosterior:
    train_inputs: np.ndarray
    chol_factor: np.ndarray
    representer: np.ndarray
    params: KernelParams
    target_mean: float = 0.0
    target_scale: float = 1.0

    @property
    def n(self) -> int:
        return self.train_inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.params.dim


@dataclass(frozen=True)
class JointBelief:
    mean: np.ndarray
    covariance: np.ndarray
    points: np.ndarray


def fit_posterior(X, z, params: KernelParams, target_mean=0.0, target_scale=1.0) -> GpPosterior:
    """Condition a zero-mean GP on ``z`` observed at ``X``.

    ``target_mean``/``target_scale`` describe a standardization already applied
    to ``z``; predictions are mapped back through it.
    """
    X = np.asarray(X, dtype=float).reshape(-1, params.dim)
    z = np.asarray(z, dtype=float).ravel()
    if X.shape[0] != z.shape[0]:
        raise ValueError("X and z have different lengths")
    K = kernel_matrix(X, X, params)
    K[np.diag_indices_from(K)] += params.noise_variance
    L = jittered_cholesky(K, "kernel matrix")
    p = sla.solve_triangular(L, z, lower=True, check_finite=False) if len(z) else z.copy()
    return GpPosterior(X, L, p, params, float(target_mean), float(target_scale))


def _cross_solve(post: GpPosterior, Xs):
    Ks = kernel_matrix(Xs, post.train_inputs, post.params)
    if post.n == 0:
        return Ks, np.zeros((Xs.shape[0], 0))
    # rows of M = K_{*,.} L^{-T}
    M = sla.solve_triangular(post.chol_factor, Ks.T, lower=True, check_finite=False).T
    return Ks, M


def predict_marginal(post: GpPosterior, X):
    """Posterior mean and variance at one point or a batch of points."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    Xs = _check_dims(X.reshape(1, -1) if single else X, post.params)
    _, M = _cross_solve(post, Xs)
    mu = M @ post.representer
    var = kernel_diag(Xs, post.params) - np.einsum("ij,ij->i", M, M)
    var = np.clip(var, 0.0, post.params.amplitude)
    mu = post.target_mean + post.target_scale * mu
    var = post.target_scale ** 2 * var
    if single:
        return float(mu[0]), float(var[0])
    return mu, var


def predict_joint(post: GpPosterior, Xhat) -> JointBelief:
    Xhat = _check_dims(Xhat, post.params)
    _, M = _cross_solve(post, Xhat)
    Kss = kernel_matrix(Xhat, Xhat, post.params)
    cov = Kss - M @ M.T
    cov = 0.5 * (cov + cov.T)
    # the diagonal is computed exactly as in predict_marginal
    cov[np.diag_indices_from(cov)] = np.clip(
        kernel_diag(Xhat, post.params) - np.einsum("ij,ij->i", M, M), 0.0, post.params.amplitude)
    mean = post.target_mean + post.target_scale * (M @ post.representer)
    return JointBelief(mean, post.target_scale ** 2 * cov, Xhat)


def sample_joint(belief: JointBelief, k: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``k`` joint samples; returns an m x k matrix, one draw per column."""
    if k < 1:
        raise ValueError("k must be >= 1")
    m = belief.mean.shape[0]
    if m == 0:
        return np.zeros((0, k))
    noise = rng.standard_normal((m, k))
    if not np.any(np.diag(belief.covariance) > 0):
        return np.repeat(belief.mean[:, None], k, axis=1)
    L = jittered_cholesky(belief.covariance, "joint covariance")
    return L @ noise + belief.mean[:, None]


def _neg_lml_and_grad(theta, X, z, kind):
    params = KernelParams.from_log_vector(theta, kind)
    n = X.shape[0]
    K = kernel_matrix(X, X, params)
    K[np.diag_indices(n)] += params.noise_variance
    L = jittered_cholesky(K, "kernel matrix")
    alpha = sla.cho_solve((L, True), z, check_finite=False)
    lml = -0.5 * z @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * np.log(2 * np.pi)
    W = np.outer(alpha, alpha) - sla.cho_solve((L, True), np.eye(n), check_finite=False)
    grads = kernel_log_grads(X, params)
    g = [0.5 * np.sum(W * dK) for dK in grads]
    g.append(0.5 * params.noise_variance * np.trace(W))
    return -lml, -np.asarray(g)


def log_marginal_likelihood(X, z, params: KernelParams, return_grad=False):
    """GP evidence log p(z | X, params).

    With ``return_grad`` the gradient with respect to
    (log lengthscales, log amplitude, log noise variance) is returned too.
    """
    X = _check_dims(X, params)
    z = np.asarray(z, dtype=float).ravel()
    f, g = _neg_lml_and_grad(params.to_log_vector(), X, z, params.kind)
    return (-f, -g) if return_grad else -f


@dataclass(frozen=True)
class HyperBounds:
    """Log-space box, relative to input range and target variance."""
    lengthscale: tuple = (1e-3, 1e3)
    amplitude: tuple = (1e-4, 1e4)
    noise_variance: tuple = (1e-8, 1.0)

    def log_box(self, X, z):
        span = np.ptp(X, axis=0) if X.shape[0] > 1 else np.ones(X.shape[1])
        span = np.where(span > 0, span, 1.0)
        var = float(np.var(z)) if np.var(z) > 0 else 1.0
        lo = np.concatenate([np.log(self.lengthscale[0] * span),
                             [np.log(self.amplitude[0] * var), np.log(self.noise_variance[0] * var)]])
        hi = np.concatenate([np.log(self.lengthscale[1] * span),
                             [np.log(self.amplitude[1] * var), np.log(self.noise_variance[1] * var)]])
        return lo, hi


def heuristic_params(X, z, kind="matern52") -> KernelParams:
    """Median pairwise distance per dimension; amplitude from target variance."""
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    if X.shape[0] > 1:
        ls = np.array([np.median(np.abs(X[:, j, None] - X[None, :, j])[np.triu_indices(len(X), 1)])
                       for j in range(p)])
        ls = np.where(ls > 0, ls, 1.0)
    else:
        ls = np.full(p, 0.5)
    var = float(np.var(z)) if len(z) > 1 and np.var(z) > 0 else 1.0
    return KernelParams(ls, var, 1.0 / (1e-2 * var), kind)


def optimize_hyperparameters(X, z, bounds: HyperBounds | None = None, restarts: int = 5,
                             rng: np.random.Generator | None = None, init: KernelParams | None = None,
                             kind: str = "matern52") -> KernelParams:
    """Empirical Bayes: multi-start L-BFGS-B on the log evidence in log space.

    The first start is ``init`` (or the median-distance heuristic); the others
    are drawn log-uniformly from a central sub-box of the bounds.
    """
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float).ravel()
    if X.shape[0] < 2:
        raise ValueError("need at least two observations to fit hyperparameters")
    bounds = bounds or HyperBounds()
    rng = rng if rng is not None else np.random.default_rng(0)
    lo, hi = bounds.log_box(X, z)
    first = init if init is not None and init.dim == X.shape[1] else heuristic_params(X, z, kind)
    starts = [np.clip(first.to_log_vector(), lo, hi)]
    p = X.shape[1]
    log_span = lo[:p] - np.log(bounds.lengthscale[0])
    mid = 0.5 * (lo + hi)
    half = 0.25 * (hi - lo)
    for _ in range(restarts - 1):
        s = rng.uniform(mid - half, mid + half)
        # random lengthscales between 5% and 200% of the input span
        s[:p] = log_span + rng.uniform(np.log(0.05), np.log(2.0), size=p)
        starts.append(s)

    best_theta, best_f = None, np.inf
    for s in starts:
        try:
            f0, _ = _neg_lml_and_grad(s, X, z, kind)
        except NumericalError:
            continue
        if f0 < best_f:
            best_theta, best_f = s.copy(), f0
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = minimize(_neg_lml_and_grad, s, args=(X, z, kind), jac=True,
                               method="L-BFGS-B", bounds=list(zip(lo, hi)))
        except NumericalError:
            continue
        if np.isfinite(res.fun) and res.fun < best_f:
            best_theta, best_f = res.x.copy(), float(res.fun)
    if best_theta is None:
        warnings.warn("all hyperparameter restarts failed; using median-distance heuristic",
                      RuntimeWarning)
        return heuristic_params(X, z, kind)
    return KernelParams.from_log_vector(best_theta, kind)


def fit_gp(X, z, rng=None, restarts=5, init: KernelParams | None = None,
           bounds: HyperBounds | None = None, kind="matern52",
           default: KernelParams | None = None) -> GpPosterior:
    """Standardize targets, fit hyperparameters and return the posterior.

    With fewer than two observations hyperparameters are not fitted;
    ``default`` (or unit lengthscales 0.5) is used instead.
    """
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float).ravel()
    p = X.shape[1]
    mean = float(np.mean(z)) if len(z) else 0.0
    scale = float(np.std(z)) if len(z) > 1 else 1.0
    if not scale > 0:
        scale = 1.0
    zs = (z - mean) / scale
    if len(z) >= 2:
        params = optimize_hyperparameters(X, zs, bounds, restarts, rng, init, kind)
    else:
        params = default or KernelParams(np.full(p, 0.5), 1.0, 1e4, kind)
    return fit_posterior(X, zs, params, mean, scale)


def empty_posterior(dim: int, params: KernelParams | None = None, target_mean=0.0,
                    target_scale=1.0) -> GpPosterior:
    params = params or KernelParams(np.full(dim, 0.5), 1.0, 1e4)
    return fit_posterior(np.zeros((0, dim)), np.zeros(0), params, target_mean, target_scale)
