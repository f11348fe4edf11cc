"""Fast numerical self-checks run by ``mtereg selftest``.

Each check returns ``(name, passed, detail)``.  The reference values come
from independent routes: finite differences, ``numpy.linalg.lstsq``,
``scipy.optimize`` and closed forms.
"""
import numpy as np
from scipy.optimize import minimize

from .cd_core import WeightedLassoProblem, soft_threshold, solve_weighted_lasso
from .mte_fit import fit_mte
from .tangent_loss import (LossParams, density_max, ln_t, mte_gradient, mte_loss,
                           observation_scores)

__all__ = ["run_all", "check_gradient", "check_ln_t", "check_limits", "check_cd"]


def check_gradient(trials=50, seed=0):
    rng = np.random.default_rng(seed)
    worst_fd = worst_score = 0.0
    for k in range(trials):
        n, d = rng.integers(20, 60), rng.integers(1, 6)
        X = rng.standard_normal((n, d))
        y = X @ rng.standard_normal(d) + rng.standard_t(3, n)
        beta = rng.standard_normal(d) * 0.5
        params = LossParams(t=float(rng.uniform(0.005, 0.3)), p=k % 3,
                            sigma_r=float(rng.uniform(0.5, 2.0)))
        g = mte_gradient(beta, X, y, params)
        h = 1e-6
        fd = np.array([(mte_loss(beta + h * e, X, y, params)
                        - mte_loss(beta - h * e, X, y, params)) / (2 * h)
                       for e in np.eye(d)])
        scale = max(np.linalg.norm(g), 1e-8)
        worst_fd = max(worst_fd, np.linalg.norm(fd - g) / scale)
        alt = -observation_scores(y - X @ beta, X, params).mean(axis=0)
        worst_score = max(worst_score, np.linalg.norm(alt - g) / scale)
    ok = worst_fd <= 1e-5 and worst_score <= 1e-10
    return "gradient", ok, f"fd rel err {worst_fd:.2e}, score-form rel err {worst_score:.2e}"


def check_ln_t(seed=0):
    rng = np.random.default_rng(seed)
    eps = 1e-8
    jump = slope = 0.0
    for t in rng.uniform(0.01, 2.0, 50):
        params = LossParams(t=float(t), p=1)
        lo, hi = ln_t(t - eps, params), ln_t(t + eps, params)
        # a jump is what remains after removing the first-order change 2 eps / t
        jump = max(jump, abs(hi - lo - 2 * eps / t))
        f = lambda u: ln_t(u, params)
        # second-order one-sided slopes, blind to the curvature jump at the knot
        dl = (3 * f(t) - 4 * f(t - eps) + f(t - 2 * eps)) / (2 * eps)
        dr = (-3 * f(t) + 4 * f(t + eps) - f(t + 2 * eps)) / (2 * eps)
        slope = max(slope, abs(dl - dr))
    u = np.geomspace(1e-6, 10, 1000)
    gap = min(np.min(ln_t(u, LossParams(t=float(t), p=p)) - np.log(u))
              for t in (0.01, 0.1, 1.0) for p in (0, 1, 2, 3))
    ok = jump <= 1e-6 and slope <= 1e-6 and gap >= -1e-12
    return "ln_t analytics", ok, f"jump {jump:.1e}, slope gap {slope:.1e}, min(ln_t - ln) {gap:.1e}"


def check_limits(seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((100, 5))
    y = X @ np.array([1.0, -0.5, 0.0, 2.0, 0.3]) + rng.standard_normal(100)
    ols = np.linalg.lstsq(X, y, rcond=None)[0]
    b0 = fit_mte(X, y, LossParams(t=0.0, p=1, sigma_r=1.0), beta_init=np.zeros(5)).beta
    e0 = np.max(np.abs(b0 - ols))
    sig = 1.0
    tmax = density_max(sig)
    b_mte = fit_mte(X, y, LossParams(t=tmax, p=1, sigma_r=sig), beta_init=ols,
                    tol=1e-12, max_iter=5000).beta
    obj = lambda b: -np.mean(np.exp(-0.5 * ((y - X @ b) / sig) ** 2))
    l2d = minimize(obj, ols, method="BFGS", options={"gtol": 1e-12}).x
    e1 = np.max(np.abs(b_mte - l2d))
    ok = e0 <= 1e-8 and e1 <= 1e-4
    return "limit chain", ok, f"|t=0 - OLS| {e0:.1e}, |t=max - L2D| {e1:.1e}"


def check_cd(seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(10):
        n, d = 40, int(rng.integers(2, 21))
        Q, _ = np.linalg.qr(rng.standard_normal((n, d)))
        X = Q * np.sqrt(n)
        y = rng.standard_normal(n) * 2
        lam = rng.uniform(0, 0.5, d)
        sol = solve_weighted_lasso(WeightedLassoProblem(X, y, None, lam), tol=1e-12)
        ref = soft_threshold(X.T @ y / n, lam)
        worst = max(worst, np.max(np.abs(sol.beta - ref)))
    kkt = 0.0
    for _ in range(50):
        n, d = int(rng.integers(20, 60)), int(rng.integers(2, 30))
        X = rng.standard_normal((n, d))
        y = rng.standard_normal(n)
        w = rng.uniform(0.1, 1.0, n)
        lam = rng.uniform(0.01, 0.3, d)
        tol = 1e-9
        b = solve_weighted_lasso(WeightedLassoProblem(X, y, w, lam), tol=tol).beta
        g = X.T @ (w * (y - X @ b)) / n
        act = b != 0
        v = np.concatenate([np.abs(g[act] - lam[act] * np.sign(b[act])),
                            np.maximum(np.abs(g[~act]) - lam[~act], 0)])
        kkt = max(kkt, v.max(initial=0) / (10 * tol))
    ok = worst <= 1e-8 and kkt <= 1.0
    return "coordinate descent", ok, f"orthonormal err {worst:.1e}, KKT ratio {kkt:.2f}"


def run_all():
    return [check_gradient(), check_ln_t(), check_limits(), check_cd()]
