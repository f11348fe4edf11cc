"""Command-line driver: fit, simulate, bootstrap, split-eval, selftest.

Reports are CSV tables plus a ``key = value`` sidecar (``<out>.meta``).
Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
import argparse
import csv
import io
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .cd_core import standardize
from .data import DataError, Dataset, apply_log, read_csv
from .metrics import model_error, mspe, selection_score, summarize
from .mte_fit import FitConfig, NoInformationError, fit_baseline, fit_penalized_mte
from .robust_init import DegenerateScaleError
from .simgen import SimDesign, gen_dataset, rng_for
from .tuning import TuningError

__all__ = [
    "ConfigError",
    "ExperimentReport",
    "BootstrapReport",
    "METHODS",
    "build_config",
    "prepare_data",
    "fit_method",
    "cmd_fit",
    "cmd_simulate",
    "cmd_bootstrap",
    "cmd_split_eval",
    "cmd_selftest",
    "main",
]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
METHODS = ("mte", "lad-lasso", "huber-lasso", "lasso", "ols")
REPORT_FIELDS = ("method", "fnr", "fpr", "tp", "fp", "me_mean", "me_median", "me_mad",
                 "wall_time")
NUMERICAL_ERRORS = (DegenerateScaleError, NoInformationError, TuningError,
                    FloatingPointError, np.linalg.LinAlgError)


class ConfigError(ValueError):
    """Inconsistent command options."""


@dataclass
class ExperimentReport:
    rows: list
    metadata: dict
    failures: dict = field(default_factory=dict)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_FIELDS)
        for row in self.rows:
            w.writerow([_fmt(row[k]) for k in REPORT_FIELDS])
        return buf.getvalue()


@dataclass
class BootstrapReport:
    names: list
    estimate: np.ndarray
    se: np.ndarray
    frequency: np.ndarray
    B: int
    failures: int
    metadata: dict = field(default_factory=dict)

    @property
    def unreliable(self):
        return self.failures > 0.2 * self.B

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "estimate", "se", "frequency"])
        for j, name in enumerate(self.names):
            se = "n/a" if not np.isfinite(self.se[j]) else _fmt(self.se[j])
            w.writerow([name, _fmt(self.estimate[j]), se, _fmt(self.frequency[j])])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "nan" if not math.isfinite(v) else f"{float(v):.10g}"


def _write_report(text, metadata, out):
    if out is None:
        sys.stdout.write(text)
        for k, v in metadata.items():
            sys.stdout.write(f"# {k} = {v}\n")
        return
    with open(out, "w", newline="") as fh:
        fh.write(text)
    with open(str(out) + ".meta", "w") as fh:
        for k, v in metadata.items():
            fh.write(f"{k} = {v}\n")


# configuration ---------------------------------------------------------------

def build_config(t="grid", penalty="adaptive", lam="bic", p=1, seed=0, intercept=False,
                 high_dim=False):
    """FitConfig from command-line style strings.

    ``high_dim`` switches the defaults to a plain l1 penalty tuned by CV.
    """
    if t != "grid":
        try:
            t = float(t)
        except ValueError:
            raise ConfigError(f"--t must be a number or 'grid', got {t!r}") from None
    if lam not in ("bic", "cv"):
        try:
            lam = float(lam)
        except ValueError:
            raise ConfigError(f"--lambda must be 'bic', 'cv' or a number, got {lam!r}") from None
    if penalty is None:
        penalty = "lasso" if high_dim else "adaptive"
    if penalty == "lasso" and lam == "bic":
        lam = "cv"
    try:
        return FitConfig(t=t, penalty=penalty, lam=lam, p=int(p), seed=int(seed),
                         intercept=intercept)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def fit_method(method, X, y, config):
    """Fit one named method with the penalty/lambda settings of ``config``."""
    if method == "mte":
        return fit_penalized_mte(X, y, config)
    shared = dict(intercept=config.intercept, seed=config.seed, cv_folds=config.cv_folds)
    if method == "ols":
        return fit_baseline("ols", X, y, **shared)
    name = {"lad-lasso": "lad", "huber-lasso": "huber", "lasso": "lasso"}[method]
    return fit_baseline(name, X, y, lam=config.lam, penalty=config.penalty, **shared)


def _pool_map(fn, items, threads):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# fit -------------------------------------------------------------------------

def prepare_data(csv_path, response, log_columns=(), drop_missing=False):
    """Read, log-transform and standardize (covariates and response).

    Returns the standardized Dataset together with the raw one.
    """
    raw = read_csv(csv_path, response, drop_missing=drop_missing)
    if log_columns:
        raw = apply_log(raw, log_columns)
    if not np.ptp(raw.y) > 0:
        raise DegenerateScaleError(f"response {response!r} is constant; "
                                   "the robust residual scale is zero")
    try:
        Xs, _ = standardize(raw.X)
    except ValueError as e:
        raise DataError(str(e)) from None
    ys = (raw.y - raw.y.mean()) / raw.y.std(ddof=1)
    std = Dataset(X=Xs, y=ys, names=list(raw.names), response=raw.response,
                  dropped_rows=raw.dropped_rows)
    return std, raw


def cmd_fit(csv_path, response, config, log_columns=(), drop_missing=False):
    """Fit on standardized data; return (FitResult, standardized data, text summary).

    The summary lists standardized and original-scale coefficients.
    """
    data, raw = prepare_data(csv_path, response, log_columns, drop_missing)
    res = fit_penalized_mte(data.X, data.y, config)
    sx = raw.X.std(axis=0, ddof=1)
    sy = raw.y.std(ddof=1)
    beta = res.beta * sy / sx
    b0 = raw.y.mean() + sy * res.intercept - raw.X.mean(axis=0) @ beta
    lines = [f"# response = {response}", f"# n = {data.n}", f"# dropped_rows = {data.dropped_rows}",
             f"# t = {_fmt(res.t_used)}", f"# sigma_r = {_fmt(res.sigma_r_used)}",
             f"# converged = {res.converged}", "name,std_coef,coef,selected",
             f"(intercept),{_fmt(res.intercept)},{_fmt(b0)},1"]
    for j, name in enumerate(data.names):
        lines.append(f"{name},{_fmt(res.beta[j])},{_fmt(beta[j])},{int(res.beta[j] != 0)}")
    sel = [data.names[j] for j in res.active_set]
    lines.append("# selected = " + " ".join(sel))
    return res, data, "\n".join(lines) + "\n"


# simulate ----------------------------------------------------------------------

def cmd_simulate(design, methods=("mte", "lad-lasso", "lasso", "ols"), reps=None, seed=None,
                 config=None, threads=1, out=None):
    """Monte Carlo comparison of ``methods`` on ``design``.

    Replications are independent (seeded by ``(seed, rep)``) and results land
    in fixed slots, so the report does not depend on ``threads``.  Failed
    replications are counted per method and left out of the summaries.
    """
    if reps is not None:
        design = SimDesign(**{**design.__dict__, "reps": reps})
    if seed is not None:
        design = SimDesign(**{**design.__dict__, "seed": seed})
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {METHODS}")
    if config is None:
        config = build_config(penalty=None, high_dim=design.d >= design.n)

    def one(rep):
        ds = gen_dataset(design, rep)
        out_rep = {}
        for m in methods:
            t0 = time.perf_counter()
            try:
                res = fit_method(m, ds.X, ds.y, config)
            except NUMERICAL_ERRORS:
                out_rep[m] = None
                continue
            sc = selection_score(res.beta, ds.beta0)
            out_rep[m] = (model_error(res.beta, ds.beta0, ds.X), sc.fnr, sc.fpr, sc.tp, sc.fp,
                          time.perf_counter() - t0)
        return out_rep

    results = _pool_map(one, range(design.reps), threads)
    rows, failures = [], {}
    for m in methods:
        ok = [r[m] for r in results if r[m] is not None]
        failures[m] = design.reps - len(ok)
        if not ok:
            rows.append({k: "failed" for k in REPORT_FIELDS} | {"method": m})
            continue
        a = np.array(ok, dtype=float)
        mean, med, mad = summarize(a[:, 0])
        rows.append(dict(method=m, fnr=float(np.nanmean(a[:, 1])), fpr=float(np.nanmean(a[:, 2])),
                         tp=float(a[:, 3].mean()), fp=float(a[:, 4].mean()), me_mean=mean,
                         me_median=med, me_mad=mad, wall_time=float(a[:, 5].sum())))
    meta = {"design": f"{design.covariate_model}/{design.error_model}", "n": design.n,
            "d": design.d, "reps": design.reps, "seed": design.seed, "version": __version__}
    meta.update({f"failures.{m}": k for m, k in failures.items()})
    report = ExperimentReport(rows=rows, metadata=meta, failures=failures)
    if out is not None:
        _write_report(report.to_csv(), meta, out)
    return report


# bootstrap ---------------------------------------------------------------------

def cmd_bootstrap(data, config, B=500, seed=0, threads=1, freeze=False, out=None):
    """Row-resampling bootstrap of the penalized MTE fit.

    ``t`` and the penalty are re-tuned on every resample unless ``freeze``
    is set, in which case the full-data ``t`` (and a scalar ``lambda`` from
    CV) are reused.  Resample failures are skipped and counted; more than
    20% failures marks the report unreliable.
    """
    if B < 1:
        raise ConfigError("B must be >= 1")
    full = fit_penalized_mte(data.X, data.y, config)
    cfg = config
    if freeze:
        cfg = cfg.with_(t=float(full.t_used))
        if cfg.lam == "cv":
            cfg = cfg.with_(lam=float(full.lambda_used[0]))

    def one(b):
        rows = rng_for(seed, b).integers(0, data.n, data.n)
        try:
            return fit_penalized_mte(data.X[rows], data.y[rows], cfg).beta
        except NUMERICAL_ERRORS:
            return None

    draws = [b for b in _pool_map(one, range(B), threads) if b is not None]
    failures = B - len(draws)
    d = data.d
    if draws:
        D = np.array(draws)
        se = D.std(axis=0, ddof=1) if len(draws) > 1 else np.full(d, np.nan)
        freq = np.mean(D != 0, axis=0)
    else:
        se, freq = np.full(d, np.nan), np.full(d, np.nan)
    meta = {"B": B, "seed": seed, "failures": failures, "freeze": freeze,
            "dropped_rows": data.dropped_rows, "version": __version__}
    report = BootstrapReport(names=list(data.names), estimate=full.beta.copy(), se=se,
                             frequency=freq, B=B, failures=failures, metadata=meta)
    meta["unreliable"] = report.unreliable
    if out is not None:
        _write_report(report.to_csv(), meta, out)
    return report


# split-eval ----------------------------------------------------------------------

def cmd_split_eval(data, config, train_fraction=0.9, splits=100, seed=0,
                   methods=("mte", "lasso"), threads=1, out=None):
    """Random train/test splits: mean and standard error of MSPE and model size."""
    n = data.n
    n_train = int(round(train_fraction * n))
    if not 0 < train_fraction <= 1 or n - n_train < 1 or n_train < 2:
        raise ConfigError(f"train_fraction={train_fraction} leaves no test rows (n = {n})")
    if splits < 1:
        raise ConfigError("splits must be >= 1")

    def one(k):
        perm = rng_for(seed, k).permutation(n)
        tr, te = perm[:n_train], perm[n_train:]
        row = {}
        for m in methods:
            try:
                res = fit_method(m, data.X[tr], data.y[tr], config)
            except NUMERICAL_ERRORS:
                row[m] = None
                continue
            row[m] = (mspe(data.y[te], res.predict(data.X[te])), len(res.active_set))
        return row

    results = _pool_map(one, range(splits), threads)
    rows = []
    for m in methods:
        ok = np.array([r[m] for r in results if r[m] is not None], dtype=float).reshape(-1, 2)
        k = len(ok)
        sem = (lambda v: float(v.std(ddof=1) / np.sqrt(k)) if k > 1 else float("nan"))
        rows.append(dict(method=m, mspe=float(ok[:, 0].mean()) if k else float("nan"),
                         mspe_se=sem(ok[:, 0]), size=float(ok[:, 1].mean()) if k else float("nan"),
                         size_se=sem(ok[:, 1]), failures=splits - k))
    if out is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ("method", "mspe", "mspe_se", "size", "size_se", "failures")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in cols])
        _write_report(buf.getvalue(), {"n": n, "train_fraction": train_fraction,
                                       "splits": splits, "seed": seed,
                                       "dropped_rows": data.dropped_rows,
                                       "version": __version__}, out)
    return rows


# selftest --------------------------------------------------------------------------

def cmd_selftest(verbose=True):
    """Quick invariant checks; returns the number of failed checks."""
    from . import selfcheck
    failed = 0
    for name, ok, detail in selfcheck.run_all():
        failed += not ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    return failed


# argument parsing ------------------------------------------------------------------

def _parser():
    ap = argparse.ArgumentParser(prog="mtereg", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def fit_opts(p, seed_default=0):
        p.add_argument("--t", default="grid", help="threshold t, or 'grid'")
        p.add_argument("--penalty", choices=("none", "lasso", "adaptive"), default=None)
        p.add_argument("--lambda", dest="lam", default="bic", help="'bic', 'cv' or a number")
        p.add_argument("--p-order", type=int, default=1, dest="p")
        p.add_argument("--seed", type=int, default=seed_default)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", default=None)

    def data_opts(p):
        p.add_argument("csv")
        p.add_argument("--response", required=True)
        p.add_argument("--log", nargs="*", default=[], help="columns to log-transform")
        p.add_argument("--drop-missing", action="store_true")

    p = sub.add_parser("fit", help="fit penalized MTE to a CSV file")
    data_opts(p)
    fit_opts(p)
    p = sub.add_parser("simulate", help="Monte Carlo comparison on a design file")
    p.add_argument("design")
    p.add_argument("--methods", nargs="+", default=["mte", "lad-lasso", "lasso", "ols"])
    p.add_argument("--reps", type=int, default=None)
    fit_opts(p, seed_default=None)
    p = sub.add_parser("bootstrap", help="bootstrap standard errors on a CSV file")
    data_opts(p)
    fit_opts(p)
    p.add_argument("--B", type=int, default=500)
    p.add_argument("--freeze", action="store_true", help="reuse full-data t and lambda")
    p = sub.add_parser("split-eval", help="train/test MSPE over random splits")
    data_opts(p)
    fit_opts(p)
    p.add_argument("--train-fraction", type=float, default=0.9)
    p.add_argument("--splits", type=int, default=100)
    p.add_argument("--methods", nargs="+", default=["mte", "lasso"])
    sub.add_parser("selftest", help="run the built-in invariant checks")
    return ap


def main(argv=None):
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    try:
        if args.command == "selftest":
            return EXIT_NUMERIC if cmd_selftest() else EXIT_OK
        if args.command == "simulate":
            design = SimDesign.load(args.design)
            cfg = build_config(args.t, args.penalty, args.lam, args.p,
                               design.seed if args.seed is None else args.seed,
                               high_dim=design.d >= design.n)
            rep = cmd_simulate(design, args.methods, args.reps, args.seed, cfg, args.threads,
                               args.out)
            if args.out is None:
                _write_report(rep.to_csv(), rep.metadata, None)
            return EXIT_OK
        cfg = build_config(args.t, args.penalty, args.lam, args.p, args.seed, intercept=True)
        if args.command == "fit":
            _, _, text = cmd_fit(args.csv, args.response, cfg, args.log, args.drop_missing)
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return EXIT_OK
        data, _ = prepare_data(args.csv, args.response, args.log, args.drop_missing)
        if args.command == "bootstrap":
            rep = cmd_bootstrap(data, cfg, args.B, args.seed, args.threads, args.freeze,
                                args.out)
            if args.out is None:
                _write_report(rep.to_csv(), rep.metadata, None)
            if rep.unreliable:
                print(f"warning: {rep.failures}/{rep.B} resamples failed; "
                      "standard errors are unreliable", file=sys.stderr)
            return EXIT_OK
        rows = cmd_split_eval(data, cfg, args.train_fraction, args.splits, args.seed,
                              args.methods, args.threads, args.out)
        if args.out is None:
            for r in rows:
                print(",".join(f"{k}={_fmt(v)}" for k, v in r.items()))
        return EXIT_OK
    except (DataError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NUMERICAL_ERRORS as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
