"""Data-driven choice of the density threshold t and the penalty level lambda.

``t`` minimizes the determinant of the estimated sandwich covariance of the
active coefficients; ``lambda`` comes from the BIC-type adaptive rule
``log(n) / (n |beta_j|)`` or from K-fold cross-validation on the median
absolute prediction error.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .tangent_loss import (LossParams, observation_hessian_factors, observation_scores,
                           residual_density)

__all__ = [
    "TuningError",
    "CovEstimate",
    "estimate_asymptotic_cov",
    "default_t_grid",
    "t_criterion",
    "select_t",
    "select_lambda_bic",
    "default_lambda_grid",
    "cv_folds",
    "select_lambda_cv",
]

logger = logging.getLogger(__name__)


class TuningError(RuntimeError):
    """No admissible tuning value could be found."""


@dataclass
class CovEstimate:
    matrix: np.ndarray
    J: np.ndarray
    Sigma1: np.ndarray
    Sigma2: np.ndarray

    @property
    def logdet(self):
        sign, ld = np.linalg.slogdet(self.matrix)
        return ld if sign > 0 else -np.inf

    @property
    def det(self):
        return float(np.linalg.det(self.matrix))


def _active_design(X, active_set, intercept):
    X = np.asarray(X, dtype=float)
    XS = X[:, np.asarray(active_set, dtype=int)]
    if intercept:
        XS = np.column_stack([np.ones(X.shape[0]), XS])
    return XS


def estimate_asymptotic_cov(X, residuals, active_set, params, penalty_second_deriv=None,
                            intercept=False):
    """Sandwich covariance ``(1/n) (J + S1)^-1 S2 (J + S1)^-1`` on the active set.

    Parameters
    ----------
    X : (n, d) array
    residuals : (n,) array
        ``y - X beta_hat`` (including any intercept).
    active_set : sequence of int
        Columns with nonzero coefficients.
    params : LossParams
    penalty_second_deriv : (s,) array, optional
        Second derivatives of the penalty at the active coefficients; zero
        for l1-type penalties.
    intercept : bool
        Include an intercept column (placed first) in the active block.

    Returns
    -------
    CovEstimate
    """
    XS = _active_design(X, active_set, intercept)
    n, s = XS.shape
    if s == 0:
        raise TuningError("active set is empty")
    if s >= n:
        raise TuningError(f"active set size {s} is not smaller than n = {n}")
    r = np.asarray(residuals, dtype=float)
    h = observation_hessian_factors(r, params)
    J = (XS * h[:, None]).T @ XS / n
    S1 = np.zeros((s, s))
    if penalty_second_deriv is not None:
        pd = np.asarray(penalty_second_deriv, dtype=float)
        S1[-len(pd):, -len(pd):] = np.diag(pd) if len(pd) else 0.0
    scores = observation_scores(r, XS, params)
    S2 = np.cov(scores, rowvar=False, bias=False).reshape(s, s)
    A = J + S1
    if np.linalg.cond(A) > 1e12:
        raise TuningError("J + Sigma1 is numerically singular")
    Ainv = np.linalg.inv(A)
    V = Ainv @ S2 @ Ainv / n
    V = 0.5 * (V + V.T)
    return CovEstimate(matrix=V, J=J, Sigma1=S1, Sigma2=S2)


def default_t_grid(hi=0.2, steps=20, lo=None):
    """Equispaced grid on ``(0, hi]``; ``lo`` defaults to ``hi / steps``."""
    lo = hi / steps if lo is None else lo
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    return np.linspace(lo, hi, steps)


def _criterion_parts(X, residuals, active_set, grid, p, sigma_r, intercept):
    """Per-grid ``(log det V, J)`` with ``log det V = log det S2 - 2 log|det J| - s log n``.

    Conditioning of ``J`` is not checked here.
    """
    XS = _active_design(X, active_set, intercept)
    n, s = XS.shape
    crit = np.full(len(grid), np.nan)
    Js = [None] * len(grid)
    if s == 0 or s >= n:
        return crit, Js
    r = np.asarray(residuals, dtype=float)
    if p <= 1 and np.all(np.asarray(grid) > 0):
        return _criterion_parts_low_order(XS, r, np.asarray(grid, dtype=float), p, sigma_r)
    for k, t in enumerate(grid):
        params = LossParams(t=float(t), p=p, sigma_r=sigma_r)
        h = observation_hessian_factors(r, params)
        J = (XS.T * h) @ XS / n
        sc = observation_scores(r, XS, params)
        sc -= sc.mean(axis=0)
        sign2, ld2 = np.linalg.slogdet(sc.T @ sc / (n - 1))
        signj, ldj = np.linalg.slogdet(J)
        Js[k] = J
        if sign2 > 0 and signj != 0 and np.isfinite(ldj):
            crit[k] = ld2 - 2.0 * ldj - s * np.log(n)
    return crit, Js


def _criterion_parts_low_order(XS, r, grid, p, sigma_r):
    """Same as the generic loop for p in {0, 1}, sharing work across the grid.

    Above the knot (u >= t) every observation contributes a t-free term;
    below it the p = 1 terms scale as 1/t (Hessian) and 1/t^2 (score
    products) and the p = 0 terms vanish.  Cumulative sums over observations
    sorted by density therefore give every grid point in one pass.
    """
    n, s = XS.shape
    s2 = sigma_r ** 2
    u = np.atleast_1d(residual_density(r, sigma_r))
    order = np.argsort(u, kind="stable")
    Xo, uo, ro = XS[order], u[order], r[order]
    a = ro * ro / (s2 * s2)
    G = Xo.T @ Xo
    R = (Xo.T * a) @ Xo
    sr = Xo.T @ (ro / s2)
    Gb, Rb, Pb, Qb = (np.zeros((s, s)) for _ in range(4))
    srb, sub = np.zeros(s), np.zeros(s)
    crit = np.full(len(grid), np.nan)
    Js = [None] * len(grid)
    logn = np.log(n)
    m_prev = 0
    for k in np.argsort(grid, kind="stable"):
        t = grid[k]
        m = int(np.searchsorted(uo, t, side="left"))
        if m > m_prev:
            Xb, ub, ab, rb = Xo[m_prev:m], uo[m_prev:m], a[m_prev:m], ro[m_prev:m]
            Gb += Xb.T @ Xb
            Rb += (Xb.T * ab) @ Xb
            srb += Xb.T @ (rb / s2)
            if p == 1:
                Pb += (Xb.T * (ub * (ab - 1.0 / s2))) @ Xb
                Qb += (Xb.T * (ub * ub * ab)) @ Xb
                sub += Xb.T @ (ub * rb / s2)
            m_prev = m
        J = -(G - Gb) / s2
        Sxx = R - Rb
        mean = sr - srb
        if p == 1:
            J = J + Pb / t
            Sxx = Sxx + Qb / (t * t)
            mean = mean + sub / t
        J /= n
        mean /= n
        S2 = (Sxx - n * np.outer(mean, mean)) / (n - 1)
        sign2, ld2 = np.linalg.slogdet(S2)
        signj, ldj = np.linalg.slogdet(J)
        Js[k] = J
        if sign2 > 0 and signj != 0 and np.isfinite(ldj):
            crit[k] = ld2 - 2.0 * ldj - s * logn
    return crit, Js


def _well_conditioned(J):
    a = np.abs(np.linalg.eigvalsh(J))
    return a.min() > 0 and a.max() <= 1e12 * a.min()


def t_criterion(X, residuals, active_set, grid, p=1, sigma_r=1.0, intercept=False):
    """Log-determinant of the sandwich covariance at every grid value.

    Agrees with ``estimate_asymptotic_cov`` but avoids forming inverses.
    Singular grid points (``cond(J) > 1e12``) get ``nan``.
    """
    crit, Js = _criterion_parts(X, residuals, active_set, grid, p, sigma_r, intercept)
    for k in np.flatnonzero(np.isfinite(crit)):
        if not _well_conditioned(Js[k]):
            crit[k] = np.nan
    return crit


def select_t(X, residuals, active_set, grid, p=1, sigma_r=1.0, intercept=False,
             rtol=1e-10):
    """Grid value minimizing the covariance determinant.

    Values within relative difference ``rtol`` of the minimum are treated as
    ties and resolved toward the smallest ``t``.  Singular points are skipped;
    conditioning is only checked for the current best candidates, which gives
    the same answer as screening the whole grid.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(grid < 0):
        raise ValueError("grid must be nonempty and non-negative")
    if grid.size == 1:
        return float(grid[0])
    crit, Js = _criterion_parts(X, residuals, active_set, grid, p, sigma_r, intercept)
    checked = np.zeros(grid.size, dtype=bool)
    while True:
        ok = np.isfinite(crit)
        if not ok.any():
            raise TuningError("covariance is singular at every grid point")
        best = np.min(crit[ok])
        # det ratio exp(crit - best) - 1 <= rtol
        tied = np.flatnonzero(ok & (np.expm1(crit - best) <= rtol))
        bad = [k for k in tied if not checked[k] and not _well_conditioned(Js[k])]
        checked[tied] = True
        if not bad:
            return float(np.min(grid[tied]))
        crit[bad] = np.nan


def select_lambda_bic(beta_tilde, n, floor_ratio=1e-4):
    """Adaptive penalty levels ``log(n) / (n |beta_tilde_j|)``.

    Magnitudes below ``floor_ratio * max|beta_tilde|`` are floored there so
    zero entries receive a large but finite penalty.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    b = np.abs(np.asarray(beta_tilde, dtype=float))
    top = b.max() if b.size else 0.0
    floor = floor_ratio * top if top > 0 else 1.0
    return np.log(n) / (n * np.maximum(b, floor))


def default_lambda_grid(lam_max, size=50, ratio=1e-3):
    """Log-spaced, descending grid from ``lam_max`` to ``ratio * lam_max``."""
    if not lam_max > 0:
        raise ValueError("lambda_max must be > 0")
    return np.geomspace(lam_max, ratio * lam_max, size)


def cv_folds(n, k_folds, seed):
    """Seeded shuffle followed by contiguous blocks; returns a list of test indices."""
    if k_folds < 2 or k_folds > n:
        raise ValueError("need 2 <= k_folds <= n")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(b) for b in np.array_split(perm, k_folds)]


def select_lambda_cv(X, y, config, lambda_grid=None, k_folds=5, seed=0,
                     return_curve=False):
    """K-fold CV over a penalty grid on the median absolute prediction error.

    Each fold fits the whole penalty path (largest lambda first, warm
    starts) with the estimator described by ``config``.  The held-out score
    is ``median |y - yhat|``, averaged over folds.  Lambdas whose fit fails
    in any fold are skipped; ties go to the larger lambda.

    Parameters
    ----------
    X, y : arrays
    config : mte_fit.FitConfig
    lambda_grid : array, optional
        Defaults to 50 log-spaced values below the data's lambda_max.
    k_folds, seed : int

    Returns
    -------
    float, or ``(lambda, grid, scores)`` with ``return_curve``.
    """
    from .mte_fit import fit_path, lambda_max_for

    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(lambda_max_for(X, y, config),
                                          size=config.cv_grid_size,
                                          ratio=config.cv_grid_ratio)
    grid = np.unique(np.asarray(lambda_grid, dtype=float))[::-1]
    if grid.size == 0:
        raise ValueError("lambda grid is empty")
    if grid.size == 1:
        lam = float(grid[0])
        return (lam, grid, np.zeros(1)) if return_curve else lam
    scores = np.zeros((k_folds, grid.size))
    for f, test in enumerate(cv_folds(len(y), k_folds, seed)):
        train = np.setdiff1d(np.arange(len(y)), test)
        fits = fit_path(X[train], y[train], config, grid)
        for k, fit in enumerate(fits):
            if fit is None:
                scores[f, k] = np.nan
                continue
            pred = fit.predict(X[test])
            scores[f, k] = np.median(np.abs(y[test] - pred))
    mean = scores.mean(axis=0)
    ok = np.isfinite(mean)
    if not ok.any():
        raise TuningError("every lambda failed in cross-validation")
    best = np.min(mean[ok])
    # grid is descending, so the first tie is the largest lambda
    k = int(np.flatnonzero(ok & (mean <= best))[0])
    lam = float(grid[k])
    logger.debug("cv selected lambda=%.4g (score %.4g)", lam, best)
    return (lam, grid, mean) if return_curve else lam
