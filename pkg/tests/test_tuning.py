import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mtereg.mte_fit import FitConfig
from mtereg.tangent_loss import LossParams
from mtereg.tuning import (TuningError, cv_folds, default_lambda_grid, default_t_grid,
                           estimate_asymptotic_cov, select_lambda_bic, select_lambda_cv,
                           select_t, t_criterion)
from mtereg import tuning


def contaminated(seed, n=150, d=4):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    r = rng.standard_normal(n)
    bad = rng.random(n) < 0.2
    r[bad] = rng.uniform(-10, 30, bad.sum())
    return X, r


def sandwich_oracle(X, r, S, t, p, s):
    # direct per-observation construction, sharing nothing with the library
    XS = X[:, S]
    f = np.exp(-0.5 * (r / s) ** 2) / (s * np.sqrt(2 * np.pi))
    w = np.ones_like(r)
    dd = np.zeros_like(r)
    if t > 0:
        lo = f < t
        q = 1 - f[lo] / t
        w[lo] = 1 - q ** p
        if p >= 2:
            dd[lo] = sum((k - 1) * q ** (k - 2) for k in range(2, p + 1)) / t ** 2
    dd[f >= t] = -1 / f[f >= t] ** 2
    score = (w * r / s ** 2)[:, None] * XS
    h = dd * f ** 2 * r ** 2 / s ** 4 + w * (r ** 2 / s ** 4 - 1 / s ** 2)
    J = (XS * h[:, None]).T @ XS / len(r)
    S2 = np.cov(score.T).reshape(len(S), len(S))
    Ji = np.linalg.inv(J)
    return Ji @ S2 @ Ji / len(r)


@pytest.mark.parametrize("p", [0, 1, 2, 3])
def test_cov_matches_direct_construction(p):
    X, r = contaminated(1)
    S = [0, 2, 3]
    for t in (0.0, 0.02, 0.1, 0.2):
        est = estimate_asymptotic_cov(X, r, S, LossParams(t=t, p=p, sigma_r=1.3))
        ref = sandwich_oracle(X, r, S, t, p, 1.3)
        assert np.allclose(est.matrix, ref, rtol=1e-9, atol=0)


def test_cov_symmetric_and_nonnegative():
    X, r = contaminated(2)
    est = estimate_asymptotic_cov(X, r, [0, 1, 2, 3], LossParams(t=0.1, p=1))
    assert np.max(np.abs(est.matrix - est.matrix.T)) <= 1e-12
    assert np.all(np.diag(est.matrix) >= 0)


def test_cov_t0_approaches_ols():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((2000, 3))
    r = rng.standard_normal(2000)
    est = estimate_asymptotic_cov(X, r, [0, 1, 2], LossParams(t=1e-6, sigma_r=1.0))
    ols = np.linalg.inv(X.T @ X)
    assert np.linalg.norm(est.matrix - ols) / np.linalg.norm(ols) <= 0.1


def test_cov_errors():
    X, r = contaminated(0, n=10, d=3)
    with pytest.raises(TuningError):
        estimate_asymptotic_cov(X, r, [], LossParams(t=0.1))
    with pytest.raises(TuningError):
        estimate_asymptotic_cov(np.ones((4, 5)), np.ones(4), [0, 1, 2, 3, 4], LossParams(t=0.1))


@pytest.mark.parametrize("p", [0, 1, 2])
@pytest.mark.parametrize("intercept", [False, True])
def test_t_criterion_dual_route(p, intercept):
    X, r = contaminated(5)
    grid = default_t_grid()
    fast = t_criterion(X, r, [0, 1, 3], grid, p=p, sigma_r=1.1, intercept=intercept)
    slow = []
    for t in grid:
        try:
            est = estimate_asymptotic_cov(X, r, [0, 1, 3], LossParams(t=t, p=p, sigma_r=1.1),
                                          intercept=intercept)
            slow.append(est.logdet)
        except TuningError:
            slow.append(np.nan)
    slow = np.array(slow)
    assert np.array_equal(np.isnan(fast), np.isnan(slow))
    ok = np.isfinite(slow)
    assert np.allclose(fast[ok], slow[ok], rtol=1e-8, atol=1e-8)


@pytest.mark.parametrize("p", [0, 1])
def test_low_order_path_matches_generic(p, monkeypatch):
    X, r = contaminated(6, n=300, d=6)
    grid = np.linspace(0.005, 0.3, 40)
    fast = t_criterion(X, r, [0, 2, 4, 5], grid, p=p, sigma_r=0.9)
    calls = []
    real = tuning._criterion_parts_low_order
    monkeypatch.setattr(tuning, "_criterion_parts_low_order",
                        lambda *a: calls.append(1) or real(*a))
    t_criterion(X, r, [0, 2, 4, 5], grid, p=p, sigma_r=0.9)
    assert calls, "cumulative-sum path was not used for p <= 1"
    slow = np.array([estimate_asymptotic_cov(X, r, [0, 2, 4, 5],
                                             LossParams(t=t, p=p, sigma_r=0.9)).logdet
                     for t in grid])
    assert np.allclose(fast, slow, rtol=1e-8, atol=1e-8)


def test_select_t_singleton_and_membership():
    X, r = contaminated(7)
    assert select_t(X, r, [0, 1], [0.07]) == 0.07
    grid = default_t_grid()
    assert select_t(X, r, [0, 1], grid) in grid


def test_select_t_tie_goes_to_smallest():
    # every density is above all grid values, so all criteria are identical
    X = np.random.default_rng(0).standard_normal((50, 2))
    r = np.full(50, 0.01)
    r[::2] = -0.01
    assert select_t(X, r, [0, 1], [0.05, 0.01, 0.1]) == 0.01


def test_select_t_all_singular():
    X, r = contaminated(8, n=40, d=2)
    r = r * 0 + 50.0    # every density is ~0, so every weight vanishes
    with pytest.raises(TuningError):
        select_t(X, r, [0, 1], [0.05, 0.1])


@given(c=st.floats(0.1, 10))
def test_select_t_invariant_to_score_scale(c):
    # scaling Sigma2 by c multiplies det by c**s and moves no argmin
    X, r = contaminated(9)
    grid = default_t_grid()
    est = [estimate_asymptotic_cov(X, r, [0, 1], LossParams(t=t)) for t in grid]
    base = np.array([e.logdet for e in est])
    Jinv = [np.linalg.inv(e.J) for e in est]
    scaled = np.array([np.linalg.slogdet(Ji @ (c * e.Sigma2) @ Ji / len(r))[1]
                       for Ji, e in zip(Jinv, est)])
    assert np.allclose(scaled - base, 2 * np.log(c), atol=1e-9)
    assert np.argmin(scaled) == np.argmin(base)


def test_clean_data_prefers_small_t():
    grid = np.linspace(0.001, 0.2, 20)
    low = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((200, 3))
        r = rng.standard_normal(200)
        low += select_t(X, r, [0, 1, 2], grid) <= grid[9]
    assert low >= 40


def test_bic_examples():
    lam = select_lambda_bic([1.0, 0.5, -1.0, 0.0], 100)
    assert lam[0] == pytest.approx(0.0460517, abs=1e-7)
    assert lam[1] == pytest.approx(0.0921034, abs=1e-7)
    assert lam[2] == lam[0]
    assert lam[3] == pytest.approx(np.log(100) / (100 * 1e-4))
    with pytest.raises(ValueError):
        select_lambda_bic([1.0], 1)


@given(st.lists(st.floats(0.01, 100), min_size=2, max_size=10))
def test_bic_monotone(b):
    b = np.array(b)
    lam = select_lambda_bic(b, 50)
    order = np.argsort(b)
    assert np.all(np.diff(lam[order]) <= 0)
    strict = np.diff(b[order]) > 0
    assert np.all(np.diff(lam[order])[strict] < 0)


def test_lambda_grid():
    g = default_lambda_grid(2.0)
    assert len(g) == 50 and g[0] == 2.0 and g[-1] == pytest.approx(2e-3)
    with pytest.raises(ValueError):
        default_lambda_grid(0.0)


def test_folds_deterministic_and_partition():
    a = cv_folds(23, 5, seed=3)
    b = cv_folds(23, 5, seed=3)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert np.array_equal(np.sort(np.concatenate(a)), np.arange(23))


def test_cv_single_and_duplicates():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((40, 5))
    y = X[:, 0] + rng.standard_normal(40)
    cfg = FitConfig(penalty="lasso", lam="cv", t=0.0)
    assert select_lambda_cv(X, y, cfg, lambda_grid=[0.1]) == 0.1
    lam, grid, _ = select_lambda_cv(X, y, cfg, lambda_grid=[0.1, 0.05, 0.1, 0.01],
                                    return_curve=True)
    assert len(grid) == 3
    assert lam == select_lambda_cv(X, y, cfg, lambda_grid=[0.1, 0.05, 0.1, 0.01])


def test_cv_pure_noise_prefers_heavy_penalty():
    from mtereg.mte_fit import lambda_max_for
    top = 0
    cfg = FitConfig(loss="ols", penalty="lasso", lam="cv")
    for seed in range(50):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((100, 50))
        y = rng.standard_normal(100)
        grid = default_lambda_grid(lambda_max_for(X, y, cfg))
        lam = select_lambda_cv(X, y, cfg, lambda_grid=grid, seed=seed)
        top += lam >= grid[12]
    assert top >= 40
