import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from mtereg.simgen import (SimDesign, ar1_cov, beta0_fixed_d, beta0_high_d, gen_covariates,
                           gen_dataset, gen_errors, rng_for)

N = 100_000


def test_beta0():
    b = beta0_fixed_d()
    assert b[2] == 2 and b[8] == -2.5 and len(b) == 12
    assert np.count_nonzero(beta0_high_d(500)) == 10 and len(beta0_high_d(500)) == 500
    assert len(beta0_high_d(10)) == 10 and np.all(beta0_high_d(10) != 0)
    with pytest.raises(ValueError):
        beta0_high_d(9)


def test_identity_moments():
    X = gen_covariates("identity", N, 2, 1)
    assert np.all((X.var(axis=0) >= 0.97) & (X.var(axis=0) <= 1.03))
    assert abs(np.corrcoef(X.T)[0, 1]) <= 0.02


def test_ar1_correlations():
    X = gen_covariates("ar1", N, 3, 2)
    C = np.corrcoef(X.T)
    assert 0.47 <= C[0, 1] <= 0.53
    assert 0.22 <= C[0, 2] <= 0.28


def test_mixture_shift_fraction():
    X = gen_covariates("mixture", N, 2, 3)
    frac = np.mean(X[:, 0] > 1.5)
    # 0.2 * P(N(3,1) > 1.5) + 0.8 * P(N(0,1) > 1.5)
    assert abs(frac - (0.2 * 0.9331928 + 0.8 * 0.0668072)) <= 0.01


@given(d=st.integers(1, 50))
def test_cholesky_reconstruction(d):
    L = np.linalg.cholesky(ar1_cov(d))
    idx = np.arange(d)
    assert np.max(np.abs(L @ L.T - 0.5 ** np.abs(idx[:, None] - idx[None, :]))) <= 1e-10


def test_error_moments():
    e = gen_errors("e1", N, 4)
    assert abs(e.mean()) <= 0.02 and 0.96 <= e.var() <= 1.04
    e = gen_errors("e2", N, 5)
    assert 0.13 <= np.mean(np.abs(e) > 5) <= 0.18
    e = gen_errors("e5", N, 6)
    assert abs(np.median(e)) <= 0.05
    e = gen_errors("e6", N, 7)
    assert abs(np.median(e)) <= 0.05
    assert np.all(gen_errors("none", 10, 0) == 0)


def test_contamination_fractions():
    # probability of landing beyond a cut, mixing component masses by hand
    e = gen_errors("fixed1", N, 8)
    assert abs((e > 10).mean() - 0.3 * 40 / 60) <= 0.01
    e = gen_errors("fixed2", N, 9)
    expect = 0.3 * norm.sf(4, 10, 10) + 0.7 * norm.sf(4)
    assert abs((e > 4).mean() - expect) <= 0.01
    e = gen_errors("e3", N, 10)
    assert abs((e > 15).mean() - 0.2 * norm.sf(15, 50, 10)) <= 0.01
    e = gen_errors("e4", N, 11)
    expect = (0.2 * (norm.sf(5, 20, 10) + norm.cdf(-5, 20, 10))
              + 0.2 * (norm.sf(5, -50, 10) + norm.cdf(-5, -50, 10)) + 0.6 * 2 * norm.sf(5))
    assert abs((np.abs(e) > 5).mean() - expect) <= 0.01


def test_determinism_and_independence():
    d = SimDesign("ar1", "fixed2", n=50, seed=11)
    a, b, c = gen_dataset(d, 0), gen_dataset(d, 0), gen_dataset(d, 1)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert not np.array_equal(a.y, c.y)
    assert np.array_equal(rng_for(3, 2).random(4), rng_for(3, 2).random(4))


def test_noise_free():
    ds = gen_dataset(SimDesign("identity", "none", n=30, seed=0))
    assert np.array_equal(ds.y, ds.X @ ds.beta0)


def test_config_round_trip(tmp_path):
    d = SimDesign("mixture", "e4", n=123, d=500, reps=7, seed=99)
    p = tmp_path / "design.cfg"
    d.save(p)
    assert SimDesign.load(p) == d
    assert SimDesign.from_config("# comment\nn = 5\n\nerror_model = e2\n").n == 5
    with pytest.raises(ValueError, match="line 1"):
        SimDesign.from_config("bogus = 1")
    with pytest.raises(ValueError, match="line 2"):
        SimDesign.from_config("n = 5\nnot a pair")
    with pytest.raises(ValueError):
        SimDesign(error_model="e9")
