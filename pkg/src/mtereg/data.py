"""Dataset container and CSV reading/writing."""
import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Dataset", "DataError", "read_csv", "write_csv", "apply_log"]


class DataError(ValueError):
    """Malformed or non-numeric input data."""


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    beta0: np.ndarray = None
    names: list = field(default=None)
    response: str = "y"
    dropped_rows: int = 0

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError(f"dimension mismatch: X {self.X.shape}, y {self.y.shape}")
        if self.beta0 is not None:
            self.beta0 = np.asarray(self.beta0, dtype=float)
            if self.beta0.shape != (self.X.shape[1],):
                raise ValueError("beta0 must have one entry per column of X")
        if self.names is None:
            self.names = [f"x{j + 1}" for j in range(self.X.shape[1])]

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def subset(self, rows):
        return Dataset(X=self.X[rows], y=self.y[rows], beta0=self.beta0,
                       names=list(self.names), response=self.response)


def read_csv(path, response, drop_missing=False):
    """Read a headed, comma-separated numeric table.

    Parameters
    ----------
    path : str or path-like
    response : str
        Name of the response column; every other column is a covariate.
    drop_missing : bool
        Drop rows with empty or NA cells instead of raising.

    Returns
    -------
    Dataset
        ``dropped_rows`` records how many rows were removed.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if response not in header:
            raise DataError(f"{path}: response column {response!r} not in header")
        rows, dropped = [], 0
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: line {lineno}: expected {len(header)} "
                                f"fields, got {len(row)}")
            cells = [c.strip() for c in row]
            if any(c in ("", "NA", "NaN", "nan") for c in cells):
                if drop_missing:
                    dropped += 1
                    continue
                raise DataError(f"{path}: line {lineno}: missing value")
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                bad = next(c for c in cells if not _is_float(c))
                raise DataError(f"{path}: line {lineno}: non-numeric cell {bad!r}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    A = np.array(rows)
    k = header.index(response)
    cols = [j for j in range(len(header)) if j != k]
    return Dataset(X=A[:, cols], y=A[:, k], names=[header[j] for j in cols],
                   response=response, dropped_rows=dropped)


def _is_float(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def write_csv(path, data):
    """Write ``data`` with the response as the last column (full float precision)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(data.names) + [data.response])
        for xi, yi in zip(data.X, data.y):
            w.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])


def apply_log(data, columns):
    """Replace the named covariates by their natural log, renaming them ``ln(col)``."""
    X = data.X.copy()
    names = list(data.names)
    for c in columns:
        if c not in names:
            raise DataError(f"log transform: unknown column {c!r}")
        j = names.index(c)
        if np.any(X[:, j] <= 0):
            raise DataError(f"log transform: column {c!r} has non-positive values")
        X[:, j] = np.log(X[:, j])
        names[j] = f"ln({c})"
    return Dataset(X=X, y=data.y, beta0=data.beta0, names=names,
                   response=data.response, dropped_rows=data.dropped_rows)
