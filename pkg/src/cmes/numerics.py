"""Robust scalar primitives: log of the standard normal CDF and its hazard."""
import numpy as np
from scipy.special import erfc, erfcx

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)


def log_phi(x):
    """log Phi(x), finite down to at least x = -1e150.

    For x < 0 the scaled complementary error function is used,
    Phi(x) = erfcx(-x/sqrt2)/2 * exp(-x^2/2), so no underflow occurs.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    neg = x < 0
    xn = x[neg]
    out[neg] = np.log(0.5 * erfcx(-xn / np.sqrt(2.0))) - 0.5 * xn * xn
    xp = x[~neg]
    out[~neg] = np.log1p(-0.5 * erfc(xp / np.sqrt(2.0)))
    return out if out.ndim else float(out)


def log_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return -0.5 * x * x - LOG_SQRT_2PI


def hazard(x, dtype=np.float64):
    """h(x) = N(x) / Phi(-x), the inverse Mills ratio of -x.

    Below x ~ -37.5 the value drops under the float64 normal range; pass
    ``dtype=np.longdouble`` to keep it representable (the log is formed in
    float64 either way, so the relative error stays near 1e-13).
    """
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape, dtype=dtype)
    pos = x >= 0
    out[pos] = SQRT_2_OVER_PI / erfcx(x[pos] / np.sqrt(2.0))
    log_h = log_normal_pdf(x[~pos]) - log_phi(-x[~pos])
    out[~pos] = np.exp(log_h.astype(dtype))
    return out if out.ndim else out[()]


def log1mexp(a):
    """log(1 - exp(a)) for a <= 0."""
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(a > -np.log(2.0), np.log(-np.expm1(a)), np.log1p(-np.exp(a)))
    return out if out.ndim else float(out)


def log_sigmoid(t):
    return -np.logaddexp(0.0, -np.asarray(t, dtype=float))


def sigmoid(t):
    t = np.asarray(t, dtype=float)
    return np.exp(log_sigmoid(t))
