"""Cyclic coordinate descent for the weighted least-squares + l1 problem.

Solves

    min_{b0, beta}  (1/2n) sum_i w_i (y_i - b0 - x_i' beta)^2 + sum_j lam_j |beta_j|

where ``n`` counts all observations, including zero-weight ones.  The
intercept ``b0`` is optional and never penalized.
"""
from dataclasses import dataclass, field

import numba
import numpy as np

__all__ = [
    "soft_threshold",
    "WeightedLassoProblem",
    "LassoSolution",
    "weighted_lasso_objective",
    "solve_weighted_lasso",
    "lambda_max",
    "Standardization",
    "standardize",
    "destandardize",
]


def soft_threshold(z, gamma):
    """``sign(z) * max(|z| - gamma, 0)``."""
    if np.any(np.asarray(gamma) < 0):
        raise ValueError("threshold must be >= 0")
    out = np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)
    return out if np.ndim(out) else float(out)


@dataclass
class WeightedLassoProblem:
    X: np.ndarray
    y: np.ndarray
    w: np.ndarray = None
    lam: np.ndarray = 0.0
    beta_start: np.ndarray = None
    intercept: bool = False
    intercept_start: float = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        n, d = self.X.shape
        if self.y.shape != (n,):
            raise ValueError(f"y has shape {self.y.shape}, expected ({n},)")
        self.w = np.ones(n) if self.w is None else np.asarray(self.w, dtype=float)
        if self.w.shape != (n,):
            raise ValueError("w must have one entry per observation")
        if np.any(self.w < 0) or np.any(self.w > 1) or not np.any(self.w > 0):
            raise ValueError("weights must lie in [0, 1] with at least one > 0")
        self.lam = np.broadcast_to(np.asarray(self.lam, dtype=float), (d,)).copy()
        if np.any(self.lam < 0):
            raise ValueError("penalty levels must be >= 0")
        if self.beta_start is None:
            self.beta_start = np.zeros(d)
        self.beta_start = np.asarray(self.beta_start, dtype=float).copy()
        if self.beta_start.shape != (d,):
            raise ValueError("beta_start must have length d")
        if self.intercept_start is None:
            self.intercept_start = 0.0


@dataclass
class LassoSolution:
    beta: np.ndarray
    intercept: float
    converged: bool
    n_sweeps: int
    trace: np.ndarray = field(default=None, repr=False)


def weighted_lasso_objective(beta, X, y, w, lam, intercept=0.0):
    r = y - intercept - X @ beta
    return float(0.5 * np.mean(w * r * r) + np.sum(lam * np.abs(beta)))


@numba.njit(cache=True)
def _objective(X, r, w, lam, beta, n_total):
    s = 0.0
    for i in range(r.shape[0]):
        s += w[i] * r[i] * r[i]
    s = 0.5 * s / n_total
    for j in range(beta.shape[0]):
        s += lam[j] * abs(beta[j])
    return s


@numba.njit(cache=True)
def _update(j, X, r, w, lam, beta, xsq, n_total):
    # returns |delta beta_j|
    if xsq[j] == 0.0:
        return 0.0
    n = r.shape[0]
    bj = beta[j]
    z = 0.0
    for i in range(n):
        z += w[i] * X[i, j] * r[i]
    z = z / n_total + xsq[j] * bj
    if z > lam[j]:
        new = (z - lam[j]) / xsq[j]
    elif z < -lam[j]:
        new = (z + lam[j]) / xsq[j]
    else:
        new = 0.0
    delta = new - bj
    if delta != 0.0:
        for i in range(n):
            r[i] -= delta * X[i, j]
        beta[j] = new
    return abs(delta)


@numba.njit(cache=True)
def _update_intercept(r, w, sw):
    n = r.shape[0]
    m = 0.0
    for i in range(n):
        m += w[i] * r[i]
    m /= sw
    if m != 0.0:
        for i in range(n):
            r[i] -= m
    return m


@numba.njit(cache=True, nogil=True)
def _cd(X, y, w, lam, beta, b0, fit_b0, tol, max_iter, n_total, trace):
    n, d = X.shape
    r = y - b0
    for i in range(n):
        for j in range(d):
            r[i] -= X[i, j] * beta[j]
    xsq = np.zeros(d)
    for j in range(d):
        s = 0.0
        for i in range(n):
            s += w[i] * X[i, j] * X[i, j]
        xsq[j] = s / n_total
    sw = 0.0
    for i in range(n):
        sw += w[i]
    record = trace.shape[0] > 0
    k = 0
    sweeps = 0
    converged = False
    full = True
    active = np.zeros(d, dtype=np.bool_)
    for j in range(d):
        active[j] = beta[j] != 0.0
    while sweeps < max_iter:
        sweeps += 1
        dmax = 0.0
        if fit_b0:
            m = _update_intercept(r, w, sw)
            b0 += m
            if abs(m) > dmax:
                dmax = abs(m)
            if record and k < trace.shape[0]:
                trace[k] = _objective(X, r, w, lam, beta, n_total)
                k += 1
        for j in range(d):
            if not full and not active[j]:
                continue
            dj = _update(j, X, r, w, lam, beta, xsq, n_total)
            if dj > dmax:
                dmax = dj
            if record and k < trace.shape[0]:
                trace[k] = _objective(X, r, w, lam, beta, n_total)
                k += 1
        if full:
            changed = False
            for j in range(d):
                nz = beta[j] != 0.0
                if nz and not active[j]:
                    changed = True
                active[j] = nz
            if dmax <= tol and not changed:
                converged = True
                break
            full = False
        elif dmax <= tol:
            # active set settled; verify with one full sweep
            full = True
    return b0, sweeps, converged, k


def solve_weighted_lasso(problem, tol=1e-7, max_iter=10_000, record_trace=False):
    """Coordinate descent with active-set cycling and a full-sweep KKT check.

    Parameters
    ----------
    problem : WeightedLassoProblem
    tol : float
        Convergence when the largest coordinate change in a full sweep is
        at most ``tol`` and the active set did not change.
    max_iter : int
        Maximum number of sweeps (full or active-set).
    record_trace : bool
        Store the objective after every coordinate update (slow; for tests).

    Returns
    -------
    LassoSolution
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    pr = problem
    keep = pr.w > 0
    X = np.asfortranarray(pr.X[keep])
    y = np.ascontiguousarray(pr.y[keep])
    w = np.ascontiguousarray(pr.w[keep])
    beta = pr.beta_start.copy()
    n_total = float(pr.X.shape[0])
    trace = np.empty(min(max_iter * (pr.X.shape[1] + 1), 1_000_000) if record_trace else 0)
    b0, sweeps, converged, k = _cd(
        X, y, w, pr.lam, beta, float(pr.intercept_start) if pr.intercept else 0.0,
        bool(pr.intercept), float(tol), int(max_iter), n_total, trace)
    if record_trace:
        r0 = pr.y - (pr.intercept_start if pr.intercept else 0.0) - pr.X @ pr.beta_start
        start = 0.5 * np.mean(pr.w * r0 * r0) + np.sum(pr.lam * np.abs(pr.beta_start))
        trace = np.concatenate([[start], trace[:k]])
    else:
        trace = None
    return LassoSolution(beta=beta, intercept=float(b0), converged=bool(converged),
                         n_sweeps=int(sweeps), trace=trace)


def lambda_max(X, y, w=None, intercept=False):
    """Smallest common penalty at which the all-zero slope vector is optimal."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones(len(y)) if w is None else np.asarray(w, dtype=float)
    r = y - (np.sum(w * y) / np.sum(w) if intercept else 0.0)
    # a few ulps of headroom so the solver's own summation order cannot
    # push a coordinate just past the threshold
    return float(np.max(np.abs(X.T @ (w * r))) / len(y)) * (1 + 1e-12)


@dataclass
class Standardization:
    mean: np.ndarray
    scale: np.ndarray

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def inverse(self, X_std):
        return np.asarray(X_std, dtype=float) * self.scale + self.mean


def standardize(X):
    """Center columns and divide by their sample standard deviation (ddof=1)."""
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    scale = X.std(axis=0, ddof=1)
    if np.any(~(scale > 0)):
        bad = np.flatnonzero(~(scale > 0)).tolist()
        raise ValueError(f"constant column(s) cannot be standardized: {bad}")
    st = Standardization(mean=mean, scale=scale)
    return st.transform(X), st


def destandardize(beta_std, st, intercept_std=0.0):
    """Map coefficients fitted on standardized columns back to raw columns.

    Returns ``(beta, intercept)`` so that
    ``intercept + X @ beta == intercept_std + st.transform(X) @ beta_std``.
    """
    beta = np.asarray(beta_std, dtype=float) / st.scale
    return beta, float(intercept_std - st.mean @ beta)
