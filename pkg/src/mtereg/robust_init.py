"""Starting values for the tangent-likelihood iterations: LAD fit and MAD scale."""
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = ["InitEstimate", "DegenerateScaleError", "fit_lad", "lad_objective",
           "mad_scale", "robust_init"]

MAD_CONSISTENCY = 1.4826


class DegenerateScaleError(ValueError):
    """Raised when a robust residual scale collapses to zero."""


@dataclass
class InitEstimate:
    beta_init: np.ndarray
    sigma_r: float
    residuals: np.ndarray
    intercept: float = 0.0


def lad_objective(beta, X, y):
    return float(np.sum(np.abs(y - X @ beta)))


def fit_lad(X, y, tol=1e-10, max_iter=200, eps=None):
    """Least absolute deviation fit by smoothed IRLS.

    Minimizes ``sum sqrt(r_i**2 + eps**2)`` with weights
    ``1 / sqrt(r_i**2 + eps**2)``; ``eps`` defaults to ``1e-6 * scale(y)``.

    Parameters
    ----------
    X : (n, d) array
    y : (n,) array
    tol : float
        Stop when the relative decrease of the smoothed objective falls
        below ``tol``.
    max_iter : int

    Returns
    -------
    beta : (d,) array

    Notes
    -----
    The IRLS answer is finished with exact vertex-to-vertex descent, so the
    result is an optimal basic solution of the LAD linear program.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if n < d:
        raise ValueError("unpenalized LAD needs n >= d")
    if np.linalg.matrix_rank(X) < d:
        warnings.warn("rank-deficient design: LAD solution is not unique",
                      RuntimeWarning, stacklevel=2)
    if eps is None:
        scale = np.median(np.abs(y - np.median(y)))
        if scale == 0:
            scale = np.mean(np.abs(y)) or 1.0
        eps = 1e-6 * scale
    beta = np.linalg.lstsq(X, y, rcond=None)[0]
    best_beta, best_obj = beta, lad_objective(beta, X, y)
    prev = np.inf
    for _ in range(max_iter):
        r = y - X @ beta
        a = np.sqrt(r * r + eps * eps)
        obj = a.sum()
        if prev - obj <= tol * max(obj, 1e-300):
            break
        prev = obj
        w = 1.0 / a
        sw = np.sqrt(w)
        beta = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)[0]
        o = lad_objective(beta, X, y)
        if o < best_obj:
            best_beta, best_obj = beta, o
    return _polish_vertex(X, y, best_beta, best_obj)


def _weighted_median(a, w):
    order = np.argsort(a)
    c = np.cumsum(w[order])
    return order[np.searchsorted(c, 0.5 * c[-1])]


def _polish_vertex(X, y, beta, obj, max_steps=500):
    # An LAD optimum interpolates d observations.  Start from the vertex through
    # the d best-fitting points, then move between adjacent vertices (release one
    # interpolated point, line-search by weighted median) while that descends.
    d = X.shape[1]
    basis = np.argsort(np.abs(y - X @ beta))[:d]
    try:
        cand = np.linalg.solve(X[basis], y[basis])
    except np.linalg.LinAlgError:
        return beta
    start, start_obj = beta, obj
    beta, obj = cand, lad_objective(cand, X, y)
    scale = np.abs(y).sum() + 1.0
    for _ in range(max_steps):
        r = y - X @ beta
        try:
            D = np.linalg.inv(X[basis])
        except np.linalg.LinAlgError:
            break
        sgn = np.sign(r)
        sgn[basis] = 0.0
        g = -(sgn @ X) @ D            # slope of the free terms along each column of D
        moved = False
        for k in np.argsort(-np.abs(g)):
            for s in (1.0, -1.0):
                if s * g[k] + 1.0 >= -1e-12 * scale:
                    continue
                a = X @ (s * D[:, k])
                nz = np.abs(a) > 1e-14 * np.abs(a).max()
                idx = np.flatnonzero(nz)
                i = idx[_weighted_median(r[idx] / a[idx], np.abs(a[idx]))]
                step = r[i] / a[i]
                cand = beta + step * s * D[:, k]
                o = lad_objective(cand, X, y)
                if o < obj and i not in basis:
                    basis = basis.copy()
                    basis[k] = i
                    beta, obj, moved = cand, o, True
                    break
            if moved:
                break
        if not moved:
            break
    return beta if obj <= start_obj else start


def mad_scale(residuals):
    """Normal-consistent MAD: ``1.4826 * median|r - median(r)|``.

    Falls back to the mean absolute deviation about the median when the
    MAD itself is zero; raises :class:`DegenerateScaleError` if that is
    zero too.
    """
    r = np.asarray(residuals, dtype=float)
    if r.size < 2:
        raise ValueError("need at least two residuals")
    dev = np.abs(r - np.median(r))
    s = MAD_CONSISTENCY * np.median(dev)
    if s > 0:
        return float(s)
    s = MAD_CONSISTENCY * np.mean(dev)
    if s > 0:
        return float(s)
    raise DegenerateScaleError("all residuals are identical; scale is zero")


def robust_init(X, y, intercept=False):
    """LAD coefficients and MAD residual scale used to seed the MTE loop.

    When ``d >= n`` (or ``d + intercept > n``) the unpenalized LAD is
    ill-posed; the start is then the zero vector with the intercept at
    ``median(y)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if d + int(intercept) < n:
        Xa = np.column_stack([np.ones(n), X]) if intercept else X
        coef = fit_lad(Xa, y)
        b0, beta = (coef[0], coef[1:]) if intercept else (0.0, coef)
    else:
        beta = np.zeros(d)
        b0 = float(np.median(y)) if intercept else 0.0
    res = y - X @ beta - b0
    return InitEstimate(beta_init=beta, sigma_r=mad_scale(res), residuals=res,
                        intercept=float(b0))
