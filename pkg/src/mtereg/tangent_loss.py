"""Tangent log-likelihood, its derivatives, and the composite MTE loss.

Below the threshold ``t`` the logarithm is replaced by its order-``p``
Taylor polynomial about ``t``.  Writing ``q = 1 - u/t`` the polynomial is

    ln_t(u) = ln(t) - sum_{k=1..p} q**k / k

so that ``u * d/du ln_t(u) = 1 - q**p``, which is the observation weight.
The residual density is Gaussian with externally supplied scale ``sigma_r``.
"""
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LossParams",
    "residual_density",
    "density_max",
    "ln_t",
    "ln_t_prime",
    "ln_t_second",
    "weight",
    "mte_loss",
    "residual_loss",
    "mte_gradient",
    "observation_scores",
    "observation_hessian_factors",
]

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class LossParams:
    """Tangent-likelihood configuration.

    Attributes
    ----------
    t : float
        Density threshold, in density units of the N(0, sigma_r**2) residual
        law.  ``t = 0`` recovers the ordinary Gaussian log-likelihood.
    p : int
        Taylor order of the tangent extension (1 is the tangent line).
    sigma_r : float
        Residual scale.
    """

    t: float = 0.0
    p: int = 1
    sigma_r: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.t) or self.t < 0:
            raise ValueError(f"t must be finite and >= 0, got {self.t}")
        if int(self.p) != self.p or self.p < 0:
            raise ValueError(f"p must be a non-negative integer, got {self.p}")
        if not np.isfinite(self.sigma_r) or self.sigma_r <= 0:
            raise ValueError(f"sigma_r must be > 0, got {self.sigma_r}")
        object.__setattr__(self, "p", int(self.p))

    def replace(self, **changes):
        fields = {"t": self.t, "p": self.p, "sigma_r": self.sigma_r}
        fields.update(changes)
        return LossParams(**fields)


def residual_density(r, sigma_r):
    """N(0, sigma_r**2) density evaluated at residual(s) ``r``."""
    if not np.isfinite(sigma_r) or sigma_r <= 0:
        raise ValueError(f"sigma_r must be > 0, got {sigma_r}")
    r = np.asarray(r, dtype=float)
    if np.any(np.isnan(r)):
        raise ValueError("residuals must not be NaN")
    z = r / sigma_r
    out = np.exp(-0.5 * z * z) / (sigma_r * _SQRT_2PI)
    return out if out.ndim else float(out)


def density_max(sigma_r):
    """Peak of the residual density, ``1 / (sigma_r * sqrt(2 pi))``."""
    return 1.0 / (sigma_r * _SQRT_2PI)


def _check_u(u):
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(np.isnan(u)):
        raise ValueError("density values must be >= 0")
    return u


def ln_t(u, params):
    """Tangent logarithm of density value(s) ``u``.

    Exactly ``np.log(u)`` above the knot ``t``; the order-``p`` Taylor
    polynomial of the log about ``t`` on ``[0, t]``.
    """
    u = _check_u(u)
    t, p = params.t, params.p
    if t == 0.0:
        if np.any(u == 0):
            raise ValueError("ln_t(0) is -inf when t = 0")
        out = np.log(u)
        return out if out.ndim else float(out)
    above = u > t
    out = np.empty_like(u)
    out[above] = np.log(u[above])
    q = 1.0 - u[~above] / t
    poly = np.zeros_like(q)
    qk = np.ones_like(q)
    for k in range(1, p + 1):
        qk = qk * q
        poly += qk / k
    out[~above] = np.log(t) - poly
    return out if out.ndim else float(out)


def ln_t_prime(u, params):
    """First derivative of ``ln_t`` in ``u`` (one-sided from above at the knot)."""
    scalar = np.ndim(u) == 0
    u = np.atleast_1d(_check_u(u))
    t, p = params.t, params.p
    with np.errstate(divide="ignore", over="ignore"):
        out = 1.0 / u
    if t > 0:
        below = u < t
        q = 1.0 - u[below] / t
        s = np.zeros_like(q)
        qk = np.ones_like(q)
        for _ in range(p):
            s += qk
            qk = qk * q
        out[below] = s / t
    return float(out[0]) if scalar else out


def ln_t_second(u, params):
    """Second derivative of ``ln_t`` in ``u``."""
    scalar = np.ndim(u) == 0
    u = np.atleast_1d(_check_u(u))
    t, p = params.t, params.p
    with np.errstate(divide="ignore", over="ignore"):
        out = -1.0 / (u * u)
    if t > 0:
        below = u < t
        q = 1.0 - u[below] / t
        s = np.zeros_like(q)
        qk = np.ones_like(q)
        for k in range(2, p + 1):
            s += (k - 1) * qk
            qk = qk * q
        out[below] = s / (t * t)
    return float(out[0]) if scalar else out


def weight(u, params):
    """Observation weight ``1 - (1 - u/t)**p`` below ``t``, 1 at or above it.

    For p = 1 this is ``min(1, u/t)``; for p = 0 the hard indicator
    ``u >= t``.  With ``t = 0`` every weight is 1.
    """
    u = _check_u(u)
    out = np.ones_like(u)
    if params.t > 0:
        below = u < params.t
        out[below] = 1.0 - (1.0 - u[below] / params.t) ** params.p
    return out if out.ndim else float(out)


def _residuals(beta, X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[1] != beta.shape[0]:
        raise ValueError(
            f"dimension mismatch: X {X.shape}, y {y.shape}, beta {beta.shape}"
        )
    return y - X @ beta


def residual_loss(r, params):
    """``-(1/n) sum ln_t(f(r_i))`` for a residual vector."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if params.t == 0.0:
        # closed form avoids log(0) for far-out residuals
        s = params.sigma_r
        return float(np.mean(0.5 * (r / s) ** 2 + np.log(s * _SQRT_2PI)))
    f = np.atleast_1d(residual_density(r, params.sigma_r))
    return float(-np.mean(ln_t(f, params)))


def mte_loss(beta, X, y, params):
    """Average negative tangent log-likelihood ``-(1/n) sum ln_t(f(r_i))``."""
    return residual_loss(_residuals(beta, X, y), params)


def mte_gradient(beta, X, y, params):
    """Gradient of :func:`mte_loss`; the weighted Gaussian score."""
    X = np.asarray(X, dtype=float)
    r = _residuals(beta, X, y)
    w = weight(np.atleast_1d(residual_density(r, params.sigma_r)), params)
    return -(X.T @ (w * r)) / (len(r) * params.sigma_r ** 2)


def observation_scores(r, X, params):
    """Per-observation gradients of ``ln_t(f(r_i))`` w.r.t. beta, shape (n, d)."""
    w = weight(np.atleast_1d(residual_density(r, params.sigma_r)), params)
    return (w * r / params.sigma_r ** 2)[:, None] * X


def observation_hessian_factors(r, params):
    """Scalars ``h_i`` with per-observation Hessian ``h_i * x_i x_i^T``.

    With ``u = f(r)``, ``w = u ln_t'(u)``:
    ``h = ln_t''(u) u^2 r^2 / s^4 + w (r^2 / s^4 - 1 / s^2)``.
    Above the knot this is exactly ``-1 / s^2``.
    """
    s2 = params.sigma_r ** 2
    r = np.atleast_1d(np.asarray(r, dtype=float))
    u = np.atleast_1d(residual_density(r, params.sigma_r))
    h = np.full_like(r, -1.0 / s2)
    if params.t > 0:
        below = u < params.t
        ub, rb = u[below], r[below]
        wb = weight(ub, params)
        d2 = ln_t_second(ub, params)
        h[below] = d2 * ub * ub * rb * rb / s2 ** 2 + wb * (rb * rb / s2 ** 2 - 1.0 / s2)
    return h
