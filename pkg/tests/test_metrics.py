import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mtereg.metrics import estimation_error, model_error, mspe, selection_score, summarize


def test_model_error_examples(rng):
    X = rng.standard_normal((20, 4))
    b = rng.standard_normal(4)
    assert model_error(b, b, X) == 0.0
    assert model_error([1.0], [0.0], np.ones((2, 1))) == pytest.approx(1.0)
    Q, _ = np.linalg.qr(rng.standard_normal((30, 4)))
    Xo = Q * np.sqrt(30)
    delta = rng.standard_normal(4)
    assert model_error(delta, np.zeros(4), Xo) == pytest.approx(delta @ delta, rel=1e-12)
    with pytest.raises(ValueError):
        model_error(np.zeros(3), np.zeros(3), X)


@given(c=st.floats(-50, 50), seed=st.integers(0, 1000))
def test_model_error_quadratic_and_permutation(c, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((15, 3))
    b0 = rng.standard_normal(3)
    d = rng.standard_normal(3)
    base = model_error(b0 + d, b0, X)
    assert model_error(b0 + c * d, b0, X) == pytest.approx(c * c * base, rel=1e-9, abs=1e-12)
    perm = rng.permutation(15)
    assert model_error(b0 + d, b0, X[perm]) == pytest.approx(base, rel=1e-12)
    assert model_error(b0 + d, b0, X) >= 0


def test_selection_examples():
    b0 = np.array([1.0, 0, 2, 0, 0])
    s = selection_score(b0, b0)
    assert (s.fnr, s.fpr, s.tp, s.fp) == (0.0, 0.0, 2, 0)
    s = selection_score(np.zeros(5), b0)
    assert (s.fnr, s.fpr, s.tp, s.fp) == (1.0, 0.0, 0, 0)
    s = selection_score(np.array([1.0, 0.1, 0, 0, 3]), b0)
    assert s.tp == 1 and s.fp == 2 and s.fnr == 0.5 and s.fpr == pytest.approx(2 / 3)
    assert np.isnan(selection_score(np.ones(3), np.ones(3)).fpr)
    assert np.isnan(selection_score(np.ones(3), np.zeros(3)).fnr)


@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=30))
def test_selection_invariants(pairs):
    b, b0 = (np.array(v) for v in zip(*pairs))
    s = selection_score(b, b0)
    assert s.tp <= np.sum(b0 != 0) and s.fp <= np.sum(b0 == 0)
    if np.any(b0 != 0):
        assert 0 <= s.fnr <= 1
    if np.any(b0 == 0):
        assert 0 <= s.fpr <= 1


def test_mspe_and_summary():
    y = np.array([1.0, 2.0])
    assert mspe(y, y) == 0.0
    assert mspe(y, y + 2) == 4.0
    assert summarize([1, 2, 3]) == (2.0, 2.0, 1.0)
    assert summarize([4, 4, 4])[2] == 0.0
    with pytest.raises(ValueError):
        summarize([])
    assert estimation_error([3.0, 4.0], [0.0, 0.0]) == 5.0
