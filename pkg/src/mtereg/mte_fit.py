"""Tangent-likelihood (MTE) estimators and the robust baselines they are compared to.

All estimators share one outer loop: given the current coefficients, pick
the tuning values, turn residuals into IRLS weights, and solve the weighted
least-squares + l1 problem by coordinate descent.  Data losses are kept in
residual units, ``(1/n) sum sigma^2 rho(r_i / sigma)``, so that with all
weights equal to one the loss is exactly ``(1/2n) ||y - X beta||^2``.  The
IRLS weights are ``v_i = rho'(z_i) / z_i`` and the inner problem is

    (1/2n) sum v_i r_i^2 + c sum lam_j |beta_j|.

For the tangent likelihood ``rho(z) = -ln_t(f(z))`` up to a constant.  The
factor ``c`` is ``sigma^2`` when penalty levels are in likelihood units
(the BIC-type rule, which is derived for ``-sum ln_t f``) and 1 otherwise;
LAD uses ``(1/n) sum |r_i|`` directly.
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from . import tuning
from .cd_core import WeightedLassoProblem, solve_weighted_lasso
from .robust_init import DegenerateScaleError, mad_scale, robust_init
from .tangent_loss import (LossParams, density_max, mte_loss, residual_density,
                           residual_loss, weight)

__all__ = [
    "NoInformationError",
    "FitConfig",
    "FitResult",
    "fit_mte",
    "fit_penalized",
    "fit_penalized_mte",
    "fit_baseline",
    "fit_path",
    "lambda_max_for",
    "penalized_objective",
    "BASELINES",
]

logger = logging.getLogger(__name__)

LOSSES = ("mte", "huber", "lad", "ols")
PENALTIES = ("none", "lasso", "adaptive")
BASELINES = ("ols", "lasso", "huber", "lad")
LAD_SMOOTH = 1e-6


class NoInformationError(RuntimeError):
    """Every observation received zero weight."""


@dataclass(frozen=True)
class FitConfig:
    """Estimator configuration.

    ``t`` is a fixed threshold or ``"grid"`` (select each outer iteration on
    ``t_grid``); ``lam`` is a number, ``"bic"`` (adaptive rule) or ``"cv"``.
    With ``penalty="adaptive"`` and a numeric ``lam`` the per-coefficient
    levels are ``lam / |beta_init_j|``.

    ``lambda_update`` picks the estimate the BIC rule is evaluated at:
    ``current`` (every outer iteration), ``initial`` (the robust start) or
    ``refit`` (an unpenalized fit of the same loss).  ``penalty_units`` and
    ``sigma_update`` default to ``auto``: likelihood units and the
    weighted-likelihood scale ``sum w r^2 / sum w`` under the BIC rule, a
    least-squares-scale penalty and 1.4826 MAD otherwise.

    ``freeze_t`` keeps the threshold picked at the first outer iteration.
    ``auto`` freezes it for cross-validated penalties, where re-selecting
    ``t`` in a heavily shrunk fit can treat signal as contamination, and
    re-selects every iteration otherwise.

    ``lad_solver="lp"`` solves each LAD(-Lasso) step exactly as a linear
    program; ``"irls"`` runs it through the shared IRLS/CD loop with
    smoothed ``1/|r|`` weights.
    """

    loss: str = "mte"
    p: int = 1
    t: object = "grid"
    t_grid: tuple = tuple(tuning.default_t_grid())
    huber_k: float = 1.345
    penalty: str = "adaptive"
    lam: object = "bic"
    lambda_update: str = "current"
    cv_folds: int = 5
    cv_grid_size: int = 50
    cv_grid_ratio: float = 1e-3
    outer_tol: float = 1e-6
    outer_max_iter: int = 100
    inner_tol: float = 1e-7
    inner_max_iter: int = 10_000
    refresh_sigma: bool = True
    sigma_update: str = "auto"
    penalty_units: str = "auto"
    freeze_t: object = "auto"
    intercept: bool = False
    sigma_r: float = None
    n_starts: int = 1
    seed: int = 0
    lad_solver: str = "lp"

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.penalty not in PENALTIES:
            raise ValueError(f"penalty must be one of {PENALTIES}, got {self.penalty!r}")
        if isinstance(self.t, str):
            if self.t != "grid":
                raise ValueError("t must be a number or 'grid'")
            if len(self.t_grid) == 0 or min(self.t_grid) < 0:
                raise ValueError("t_grid must be nonempty and non-negative")
        elif not self.t >= 0:
            raise ValueError("t must be >= 0")
        if isinstance(self.lam, str):
            if self.lam not in ("bic", "cv"):
                raise ValueError("lam must be a number, 'bic' or 'cv'")
            if self.lam == "bic" and self.penalty == "lasso":
                raise ValueError("the BIC-type rule yields adaptive penalties; "
                                 "use penalty='adaptive'")
        elif not self.lam >= 0:
            raise ValueError("lam must be >= 0")
        if self.sigma_update not in ("auto", "mad", "weighted"):
            raise ValueError("sigma_update must be 'auto', 'mad' or 'weighted'")
        if self.penalty_units not in ("auto", "residual", "likelihood"):
            raise ValueError("penalty_units must be 'auto', 'residual' or 'likelihood'")
        if self.lambda_update not in ("current", "initial", "refit"):
            raise ValueError("lambda_update must be 'current', 'initial' or 'refit'")
        if not (self.outer_tol > 0 and self.inner_tol > 0):
            raise ValueError("tolerances must be > 0")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        if self.freeze_t not in (True, False, "auto"):
            raise ValueError("freeze_t must be True, False or 'auto'")
        if self.lad_solver not in ("lp", "irls"):
            raise ValueError("lad_solver must be 'lp' or 'irls'")

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class FitResult:
    beta: np.ndarray
    intercept: float
    weights: np.ndarray
    t_used: float
    lambda_used: np.ndarray
    sigma_r_used: float
    outer_iterations: int
    converged: bool
    loss_trace: list = field(default_factory=list)
    inner_converged: bool = True
    method: str = "mte"

    @property
    def active_set(self):
        return np.flatnonzero(self.beta)

    def predict(self, X):
        return np.asarray(X, dtype=float) @ self.beta + self.intercept


def _irls_weights(cfg, r, sigma, t):
    """Raw IRLS weights ``v`` (not normalized)."""
    if cfg.loss == "mte":
        u = np.atleast_1d(residual_density(r, sigma))
        return weight(u, LossParams(t=t, p=cfg.p, sigma_r=sigma))
    if cfg.loss == "huber":
        a = np.abs(r) / sigma
        return np.minimum(1.0, cfg.huber_k / np.maximum(a, 1e-300))
    if cfg.loss == "lad":
        # smoothed 1/|r|
        return 1.0 / np.sqrt(r * r + (LAD_SMOOTH * sigma) ** 2)
    return np.ones_like(r)


def _data_loss(cfg, r, sigma, t):
    s2 = sigma ** 2
    if cfg.loss == "mte":
        return s2 * residual_loss(r, LossParams(t=t, p=cfg.p, sigma_r=sigma))
    if cfg.loss == "huber":
        a = np.abs(r) / sigma
        k = cfg.huber_k
        return s2 * float(np.mean(np.where(a <= k, 0.5 * a * a, k * a - 0.5 * k * k)))
    if cfg.loss == "lad":
        return float(np.mean(np.abs(r)))
    return float(np.mean(0.5 * r * r))


def penalized_objective(cfg, X, y, beta, intercept, sigma, t, lam):
    """Data loss plus ``sum lam_j |beta_j|`` at the given tuning values."""
    r = y - X @ beta - intercept
    pen = _penalty_scale(cfg, sigma) * float(np.sum(lam * np.abs(beta)))
    return _data_loss(cfg, r, sigma, t) + pen


@dataclass
class _State:
    beta: np.ndarray
    intercept: float
    sigma: float
    t: float
    lam: np.ndarray


def _fallback_t(sigma):
    # density one scale unit from the center
    return float(residual_density(sigma, sigma))


def _initial_state(X, y, cfg):
    n, d = X.shape
    if cfg.loss == "ols" and d + int(cfg.intercept) < n:
        Xa = np.column_stack([np.ones(n), X]) if cfg.intercept else X
        coef = np.linalg.lstsq(Xa, y, rcond=None)[0]
        b0, beta = (coef[0], coef[1:]) if cfg.intercept else (0.0, coef)
        r = y - X @ beta - b0
        sigma = float(np.sqrt(r @ r / max(n - len(coef), 1)))
        if not sigma > 0:
            sigma = mad_scale(y)
    else:
        init = robust_init(X, y, intercept=cfg.intercept)
        beta, b0, sigma = init.beta_init, init.intercept, init.sigma_r
    if cfg.sigma_r is not None:
        sigma = float(cfg.sigma_r)
    t = 0.0 if cfg.loss != "mte" else (None if cfg.t == "grid" else float(cfg.t))
    return _State(beta=np.asarray(beta, dtype=float), intercept=float(b0),
                  sigma=float(sigma), t=t, lam=np.zeros(d))


def _penalty_levels(cfg, X, y, beta_ref, lam_value):
    n, d = X.shape
    if cfg.penalty == "none":
        return np.zeros(d)
    if cfg.penalty == "lasso":
        return np.full(d, float(lam_value))
    if lam_value == "bic":
        return tuning.select_lambda_bic(beta_ref, n)
    b = np.abs(beta_ref)
    top = b.max() if b.size else 0.0
    return float(lam_value) / np.maximum(b, 1e-4 * top if top > 0 else 1.0)


def _resolve(cfg, name):
    """``auto`` settings: the BIC rule works in likelihood units with the
    weighted scale; a fixed or cross-validated lambda is a constant on the
    least-squares scale with the MAD scale.  ``t`` is frozen after the
    first outer iteration only under cross-validation.
    """
    v = getattr(cfg, name)
    if v != "auto":
        return v
    bic = cfg.lam == "bic"
    if name == "freeze_t":
        return cfg.lam == "cv"
    if name == "penalty_units":
        return "likelihood" if bic else "residual"
    return "weighted" if bic else "mad"


def _refresh_scale(cfg, r, sigma, t):
    """New residual scale; keeps ``sigma`` when the estimate degenerates.

    ``mad``: 1.4826 x MAD of the residuals.  ``weighted``: root of
    ``sum w r^2 / sum w`` with the current tangent weights, the scale that
    solves the weighted likelihood equation for sigma^2.
    """
    if _resolve(cfg, "sigma_update") == "weighted" and cfg.loss == "mte":
        w = _irls_weights(cfg, r, sigma, t)
        sw = w.sum()
        s2 = float(w @ (r * r) / sw) if sw > 0 else 0.0
        return float(np.sqrt(s2)) if s2 > 0 else sigma
    try:
        return mad_scale(r)
    except DegenerateScaleError:
        return sigma


def _penalty_scale(cfg, sigma):
    """Factor taking penalty levels to residual units."""
    if _resolve(cfg, "penalty_units") == "likelihood" and cfg.loss == "mte":
        return sigma ** 2
    return 1.0


def _lad_lp(X, y, lam, intercept):
    """Exact minimizer of ``mean|r| + sum lam_j |beta_j|`` (HiGHS)."""
    n, d = X.shape
    # beta = b+ - b-, r = u+ - u-, optional free intercept as c+ - c-
    blocks = [sparse.csr_matrix(X), sparse.csr_matrix(-X), sparse.eye(n), -sparse.eye(n)]
    cost = [lam, lam, np.full(n, 1.0 / n), np.full(n, 1.0 / n)]
    if intercept:
        blocks.append(sparse.csr_matrix(np.column_stack([np.ones(n), -np.ones(n)])))
        cost.append(np.zeros(2))
    sol = linprog(np.concatenate(cost), A_eq=sparse.hstack(blocks).tocsc(), b_eq=y,
                  bounds=(0, None), method="highs")
    if sol.status != 0:
        raise np.linalg.LinAlgError(f"LAD linear program failed: {sol.message}")
    x = sol.x
    b0 = float(x[-2] - x[-1]) if intercept else 0.0
    return x[:d] - x[d:2 * d], b0


def _outer_loop_lad_lp(X, y, cfg, state, lam_value):
    n, d = X.shape
    beta, b0, sigma, lam = state.beta.copy(), state.intercept, state.sigma, state.lam
    adaptive_bic = cfg.penalty == "adaptive" and lam_value == "bic"
    trace = []
    converged = False
    it = 0
    for it in range(1, cfg.outer_max_iter + 1):
        if adaptive_bic and cfg.lambda_update == "current" and it > 1:
            lam = tuning.select_lambda_bic(beta, n)
        new, new_b0 = _lad_lp(X, y, lam, cfg.intercept)
        delta = max(np.max(np.abs(new - beta), initial=0.0), abs(new_b0 - b0))
        beta, b0 = new, new_b0
        trace.append(penalized_objective(cfg, X, y, beta, b0, sigma, 0.0, lam))
        # with fixed penalty levels one exact solve is the answer
        if delta <= cfg.outer_tol or not (adaptive_bic and cfg.lambda_update == "current"):
            converged = True
            break
    r = y - X @ beta - b0
    v = _irls_weights(cfg, r, sigma, 0.0)
    return FitResult(beta=beta, intercept=float(b0), weights=v / v.max(), t_used=0.0,
                     lambda_used=lam, sigma_r_used=sigma, outer_iterations=it,
                     converged=converged, loss_trace=trace, method="lad")


def _outer_loop(X, y, cfg, state, lam_value):
    """Alternate tuning/weights and penalized weighted LS until beta settles."""
    if cfg.loss == "lad" and cfg.lad_solver == "lp":
        return _outer_loop_lad_lp(X, y, cfg, state, lam_value)
    n, d = X.shape
    beta, b0, sigma, t = state.beta.copy(), state.intercept, state.sigma, state.t
    lam = state.lam
    grid = np.asarray(cfg.t_grid, dtype=float)
    select_t = cfg.loss == "mte" and cfg.t == "grid"
    freeze = _resolve(cfg, "freeze_t")
    adaptive_bic = cfg.penalty == "adaptive" and lam_value == "bic"
    trace = []
    best = None
    converged = inner_ok = False
    t_frozen = False
    seen = set()
    it = 0
    for it in range(1, cfg.outer_max_iter + 1):
        r = y - X @ beta - b0
        if select_t and not t_frozen:
            active = np.flatnonzero(beta)
            try:
                t_new = tuning.select_t(X, r, active, grid, p=cfg.p, sigma_r=sigma,
                                        intercept=cfg.intercept)
                key = (float(t_new), tuple(active))
                if t is not None and t_new != t and key in seen:
                    # selection is cycling between grid points: keep the current t
                    t_frozen = True
                else:
                    seen.add(key)
                    t = t_new
                    t_frozen = freeze
            except tuning.TuningError:
                if t is None:
                    t = _fallback_t(sigma)
        if adaptive_bic and cfg.lambda_update == "current" and it > 1:
            lam = tuning.select_lambda_bic(beta, n)
        v = _irls_weights(cfg, r, sigma, t)
        vmax = v.max()
        if not vmax > 0:
            raise NoInformationError("all observation weights are zero; t is too large")
        w = v / vmax
        sol = solve_weighted_lasso(
            WeightedLassoProblem(X, y, w, lam * _penalty_scale(cfg, sigma) / vmax, beta,
                                 cfg.intercept, b0),
            tol=cfg.inner_tol, max_iter=cfg.inner_max_iter)
        inner_ok = sol.converged
        delta = np.max(np.abs(sol.beta - beta), initial=0.0)
        delta = max(delta, abs(sol.intercept - b0))
        beta, b0 = sol.beta, sol.intercept
        obj = penalized_objective(cfg, X, y, beta, b0, sigma, t, lam)
        trace.append(obj)
        if best is None or obj < best[0]:
            best = (obj, beta.copy(), b0, sigma, t, lam.copy())
        if cfg.refresh_sigma and cfg.loss != "lad":
            sigma = _refresh_scale(cfg, y - X @ beta - b0, sigma, t)
        if delta <= cfg.outer_tol:
            converged = True
            break
        # LAD IRLS creeps along flat directions long after the objective settles
        if (cfg.loss == "lad" and len(trace) > 1
                and trace[-2] - obj <= 0.1 * cfg.outer_tol * abs(obj)):
            converged = True
            break
    if not converged:
        _, beta, b0, sigma, t, lam = best
        logger.debug("outer loop hit %d iterations without converging", it)
    r = y - X @ beta - b0
    v = _irls_weights(cfg, r, sigma, t)
    w = v / v.max() if v.max() > 0 else v
    return FitResult(beta=beta, intercept=float(b0), weights=w, t_used=t,
                     lambda_used=lam, sigma_r_used=sigma, outer_iterations=it,
                     converged=converged, loss_trace=trace, inner_converged=inner_ok,
                     method=cfg.loss)


def _state_from(res):
    return _State(beta=res.beta.copy(), intercept=res.intercept, sigma=res.sigma_r_used,
                  t=res.t_used, lam=res.lambda_used)


def lambda_max_for(X, y, cfg):
    """Smallest common penalty that keeps every slope at zero under the initial weights."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    st = _initial_state(X, y, cfg)
    b0 = float(np.median(y)) if cfg.intercept else 0.0
    r = y - b0
    t = st.t if st.t is not None else _fallback_t(st.sigma)
    v = _irls_weights(cfg, r, st.sigma, t)
    if cfg.intercept:
        r = r - np.sum(v * r) / np.sum(v)
    lam = float(np.max(np.abs(X.T @ (v * r)))) / (len(y) * _penalty_scale(cfg, st.sigma))
    if not lam > 0:
        raise tuning.TuningError("lambda_max is zero")
    return lam


def fit_path(X, y, config, lambdas):
    """Fit a descending penalty path with warm starts.

    Returns one :class:`FitResult` per lambda, or ``None`` where the fit
    failed or the active set saturated (``|S| >= n - 1``) at a larger lambda.
    Only ``penalty="lasso"`` is meaningful here; other penalties are
    coerced to lasso.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    cfg = config if config.penalty == "lasso" else config.with_(penalty="lasso")
    n, d = X.shape
    state = _initial_state(X, y, cfg)
    state.beta = np.zeros(d)
    if cfg.intercept:
        state.intercept = float(np.median(y))
    out = []
    saturated = False
    for lam in lambdas:
        if saturated:
            out.append(None)
            continue
        state.lam = np.full(d, float(lam))
        try:
            res = _outer_loop(X, y, cfg, state, float(lam))
        except (NoInformationError, np.linalg.LinAlgError, DegenerateScaleError) as exc:
            logger.debug("path fit failed at lambda=%g: %s", lam, exc)
            out.append(None)
            continue
        out.append(res)
        state = _state_from(res)
        if len(res.active_set) + int(cfg.intercept) >= n - 1:
            saturated = True
    return out


def fit_penalized(X, y, config=None, **overrides):
    """Penalized estimator for any supported loss.

    Parameters
    ----------
    X : (n, d) array
    y : (n,) array
    config : FitConfig, optional
    **overrides
        Field replacements applied to ``config``.

    Returns
    -------
    FitResult
    """
    cfg = (config or FitConfig()).with_(**overrides) if overrides else (config or FitConfig())
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"dimension mismatch: X {X.shape}, y {y.shape}")
    n, d = X.shape

    if cfg.penalty != "none" and cfg.lam == "cv":
        lam_cfg = cfg.with_(penalty="lasso")
        grid = tuning.default_lambda_grid(lambda_max_for(X, y, lam_cfg),
                                          size=cfg.cv_grid_size, ratio=cfg.cv_grid_ratio)
        lam = tuning.select_lambda_cv(X, y, lam_cfg, grid, k_folds=cfg.cv_folds,
                                      seed=cfg.seed)
        fits = fit_path(X, y, lam_cfg, grid[grid >= lam])
        if fits[-1] is None:
            raise tuning.TuningError("final fit at the cross-validated lambda failed")
        return fits[-1]

    state = _initial_state(X, y, cfg)
    if (cfg.lambda_update == "refit" and cfg.penalty == "adaptive"
            and d + int(cfg.intercept) < n):
        # anchor the adaptive weights on the unpenalized fit of the same loss
        state.lam = np.zeros(d)
        pre = _outer_loop(X, y, cfg.with_(penalty="none", lam=0.0), state, 0.0)
        state = _state_from(pre)
    state.lam = _penalty_levels(cfg, X, y, state.beta, cfg.lam)
    res = _outer_loop(X, y, cfg, state, cfg.lam)
    if cfg.n_starts > 1:
        rng = np.random.default_rng(cfg.seed)
        scale = max(np.std(state.beta), 1e-3)
        for _ in range(cfg.n_starts - 1):
            st = _State(beta=state.beta + rng.normal(0, scale, d), intercept=state.intercept,
                        sigma=state.sigma, t=state.t, lam=state.lam.copy())
            alt = _outer_loop(X, y, cfg, st, cfg.lam)
            if alt.loss_trace[-1] < res.loss_trace[-1]:
                res = alt
    return res


def fit_penalized_mte(X, y, config=None, **overrides):
    """Penalized tangent-likelihood fit (the two-step tuning / CD loop)."""
    cfg = (config or FitConfig()).with_(loss="mte", **overrides)
    return fit_penalized(X, y, cfg)


def fit_baseline(method, X, y, lam="bic", penalty=None, config=None, **overrides):
    """OLS, (adaptive) Lasso, Huber-Lasso or LAD-Lasso through the same IRLS/CD loop.

    ``penalty`` defaults to ``"adaptive"`` for ``lam="bic"`` and to
    ``"lasso"`` otherwise; ``method="ols"`` is always unpenalized.
    """
    if method not in BASELINES:
        raise ValueError(f"method must be one of {BASELINES}, got {method!r}")
    if penalty is None:
        penalty = "adaptive" if lam == "bic" else "lasso"
    loss = "ols" if method in ("ols", "lasso") else method
    if method == "ols":
        penalty, lam = "none", 0.0
    cfg = (config or FitConfig()).with_(loss=loss, penalty=penalty, lam=lam, **overrides)
    res = fit_penalized(X, y, cfg)
    res.method = method
    return res


def fit_mte(X, y, params, beta_init=None, tol=1e-10, max_iter=1000):
    """Unpenalized MTE as the fixed point of the weighted likelihood equation.

    Alternates ``w_i = weight(f(r_i))`` and weighted least squares with
    ``params`` (``t``, ``p``, ``sigma_r``) held fixed.

    Parameters
    ----------
    X : (n, d) array
    y : (n,) array
    params : LossParams
    beta_init : (d,) array, optional
        Defaults to the LAD fit.
    tol : float
        Stop when ``max |delta beta| <= tol``.
    max_iter : int

    Returns
    -------
    FitResult
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if beta_init is None:
        from .robust_init import fit_lad

        beta_init = fit_lad(X, y)
    beta = np.asarray(beta_init, dtype=float).copy()
    if not np.all(np.isfinite(beta)):
        raise ValueError("beta_init must be finite")
    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r = y - X @ beta
        w = weight(np.atleast_1d(residual_density(r, params.sigma_r)), params)
        if not np.any(w > 0):
            raise NoInformationError("all observation weights are zero; t is too large")
        sw = np.sqrt(w)
        new = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)[0]
        delta = np.max(np.abs(new - beta))
        beta = new
        trace.append(mte_loss(beta, X, y, params))
        if delta <= tol:
            converged = True
            break
    r = y - X @ beta
    w = weight(np.atleast_1d(residual_density(r, params.sigma_r)), params)
    return FitResult(beta=beta, intercept=0.0, weights=w, t_used=params.t,
                     lambda_used=np.zeros(d), sigma_r_used=params.sigma_r,
                     outer_iterations=it, converged=converged, loss_trace=trace)


def t_above_density_max(sigma_r, factor=1.0):
    """Threshold at (or above) the residual density peak: the pure l2-distance regime."""
    return factor * density_max(sigma_r)
