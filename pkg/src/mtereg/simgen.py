"""Seeded generators for the contaminated-regression simulation designs.

Random streams use numpy's counter-based Philox bit generator keyed by a
``SeedSequence([seed, rep_index])``, so every replication is reproducible
on its own and independent of the order replications are run in.
"""
from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset

__all__ = [
    "COVARIATE_MODELS",
    "ERROR_MODELS",
    "SimDesign",
    "beta0_fixed_d",
    "beta0_high_d",
    "ar1_cov",
    "rng_for",
    "gen_covariates",
    "gen_errors",
    "gen_dataset",
]

COVARIATE_MODELS = ("identity", "ar1", "mixture")
ERROR_MODELS = ("fixed1", "fixed2", "e1", "e2", "e3", "e4", "e5", "e6", "none")
RHO = 0.5


def beta0_fixed_d():
    return np.array([1, 1.5, 2, 1, 0, 0, 0, 0, -2.5, -1, 0, 0], dtype=float)


def beta0_high_d(d=500):
    lead = np.array([3, 1.5, 2, -2.5, -2, 3, 1.5, 2, -2.5, -2], dtype=float)
    if d < len(lead):
        raise ValueError(f"d must be >= {len(lead)}")
    return np.concatenate([lead, np.zeros(d - len(lead))])


def rng_for(seed, rep_index=0):
    """Philox generator for replication ``rep_index`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, rep_index])))


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return rng_for(seed)


def ar1_cov(d, rho=RHO):
    idx = np.arange(d)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def gen_covariates(model, n, d, seed):
    """n x d covariate matrix.

    ``identity``: N(0, I).  ``ar1``: N(0, Omega), Omega_ij = 0.5**|i-j|.
    ``mixture``: per row, N(3, Omega) with probability 0.2, else N(0, I).
    """
    if model not in COVARIATE_MODELS:
        raise ValueError(f"unknown covariate model {model!r}")
    rng = _as_rng(seed)
    Z = rng.standard_normal((n, d))
    if model == "identity":
        return Z
    L = np.linalg.cholesky(ar1_cov(d))
    if model == "ar1":
        return Z @ L.T
    shifted = rng.random(n) < 0.2
    Z[shifted] = 3.0 + Z[shifted] @ L.T
    return Z


def _mixture(rng, n, probs, draws):
    comp = rng.choice(len(probs), size=n, p=probs)
    out = np.empty(n)
    for k, draw in enumerate(draws):
        m = comp == k
        out[m] = draw(int(m.sum()))
    return out


def gen_errors(model, n, seed):
    """Length-n error vector from one of the contamination laws.

    fixed1: 0.7 N(0,1) + 0.3 U(-10, 50)        fixed2: 0.7 N(0,1) + 0.3 N(10, 10^2)
    e1: N(0,1)                                 e2: 0.8 N(0,1) + 0.2 N(0, 20^2)
    e3: 0.8 N(0,1) + 0.2 N(50, 10^2)           e4: 0.6 N(0,1) + 0.2 N(20,10^2) + 0.2 N(-50,10^2)
    e5: standard Cauchy                        e6: Student t, 2 df
    none: all zeros
    """
    if model not in ERROR_MODELS:
        raise ValueError(f"unknown error model {model!r}")
    rng = _as_rng(seed)
    norm = lambda mu, sd: (lambda m: mu + sd * rng.standard_normal(m))
    if model == "none":
        return np.zeros(n)
    if model == "e1":
        return rng.standard_normal(n)
    if model == "fixed1":
        return _mixture(rng, n, [0.7, 0.3], [norm(0, 1), lambda m: rng.uniform(-10, 50, m)])
    if model == "fixed2":
        return _mixture(rng, n, [0.7, 0.3], [norm(0, 1), norm(10, 10)])
    if model == "e2":
        return _mixture(rng, n, [0.8, 0.2], [norm(0, 1), norm(0, 20)])
    if model == "e3":
        return _mixture(rng, n, [0.8, 0.2], [norm(0, 1), norm(50, 10)])
    if model == "e4":
        return _mixture(rng, n, [0.6, 0.2, 0.2], [norm(0, 1), norm(20, 10), norm(-50, 10)])
    u = rng.random(n)
    if model == "e5":
        return np.tan(np.pi * (u - 0.5))
    # inverse CDF of t(2)
    return (2 * u - 1) / np.sqrt(2 * u * (1 - u))


@dataclass
class SimDesign:
    covariate_model: str = "ar1"
    error_model: str = "fixed1"
    n: int = 200
    d: int = 12
    reps: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.covariate_model not in COVARIATE_MODELS:
            raise ValueError(f"unknown covariate model {self.covariate_model!r}")
        if self.error_model not in ERROR_MODELS:
            raise ValueError(f"unknown error model {self.error_model!r}")
        for name in ("n", "d", "reps"):
            v = int(getattr(self, name))
            if v < 1:
                raise ValueError(f"{name} must be >= 1")
            setattr(self, name, v)
        self.seed = int(self.seed)

    @property
    def beta0(self):
        return beta0_fixed_d() if self.d == 12 else beta0_high_d(self.d)

    def to_config(self):
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())

    @classmethod
    def from_config(cls, text):
        fields = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value'")
            k, v = (s.strip() for s in line.split("=", 1))
            if k not in cls.__dataclass_fields__:
                raise ValueError(f"line {lineno}: unknown key {k!r}")
            fields[k] = v
        return cls(**fields)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_config())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_config(fh.read())


def gen_dataset(design, rep_index=0):
    """``y = X beta0 + eps`` for one replication of ``design``."""
    rng = rng_for(design.seed, rep_index)
    X = gen_covariates(design.covariate_model, design.n, design.d, rng)
    eps = gen_errors(design.error_model, design.n, rng)
    b0 = design.beta0
    return Dataset(X=X, y=X @ b0 + eps, beta0=b0)
