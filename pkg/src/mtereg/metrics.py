"""Scoring for simulations and real-data evaluation."""
from dataclasses import dataclass

import numpy as np

__all__ = ["SelectionScore", "model_error", "selection_score", "mspe", "summarize",
           "estimation_error"]


@dataclass
class SelectionScore:
    fnr: float
    fpr: float
    tp: int
    fp: int


def model_error(beta_hat, beta0, X):
    """``(1/n) (b - b0)' X'X (b - b0)`` computed as ``||X (b - b0)||^2 / n``."""
    X = np.asarray(X, dtype=float)
    delta = np.asarray(beta_hat, dtype=float) - np.asarray(beta0, dtype=float)
    if X.ndim != 2 or X.shape[1] != delta.shape[0]:
        raise ValueError(f"dimension mismatch: X {X.shape}, beta {delta.shape}")
    v = X @ delta
    return float(v @ v / X.shape[0])


def estimation_error(beta_hat, beta0):
    return float(np.linalg.norm(np.asarray(beta_hat) - np.asarray(beta0)))


def selection_score(beta_hat, beta0):
    """FNR/FPR and TP/FP counts; a coefficient is selected iff it is exactly nonzero.

    A rate whose denominator is empty (no true zeros, or no true nonzeros)
    is reported as ``nan``.
    """
    b = np.asarray(beta_hat)
    b0 = np.asarray(beta0)
    if b.shape != b0.shape:
        raise ValueError("beta_hat and beta0 must have the same length")
    truth = b0 != 0
    sel = b != 0
    tp = int(np.sum(sel & truth))
    fp = int(np.sum(sel & ~truth))
    s, z = int(truth.sum()), int((~truth).sum())
    fnr = 1.0 - tp / s if s else float("nan")
    fpr = fp / z if z else float("nan")
    return SelectionScore(fnr=fnr, fpr=fpr, tp=tp, fp=fp)


def mspe(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.size == 0:
        raise ValueError("empty input")
    return float(np.mean((y_true - y_pred) ** 2))


def summarize(values):
    """Mean, median and raw median absolute deviation (no consistency factor)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty input")
    med = float(np.median(v))
    return float(np.mean(v)), med, float(np.median(np.abs(v - med)))
