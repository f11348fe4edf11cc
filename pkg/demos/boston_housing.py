"""Boston housing: robust variable selection with bootstrap standard errors.

Log-transform crim, lstat and tax, standardize everything, fit the adaptive
lasso MTE with an intercept, then resample rows to get standard errors and
selection frequencies.  Pass B as the first argument (default 100).
"""
import sys
from pathlib import Path

from mtereg.bench_cli import build_config, cmd_bootstrap, prepare_data

B = int(sys.argv[1]) if len(sys.argv) > 1 else 100
csv = Path(__file__).resolve().parent.parent / "tests" / "data" / "boston.csv"
data, raw = prepare_data(csv, "medv", ["crim", "lstat", "tax"])
print(f"{raw.n} tracts, {raw.d} covariates")

rep = cmd_bootstrap(data, build_config(intercept=True), B=B, seed=0)
print(f"{'variable':>10} {'estimate':>9} {'se':>7} {'freq':>5}")
for name, b, se, f in zip(rep.names, rep.estimate, rep.se, rep.frequency):
    mark = "" if b else "   (not selected)"
    print(f"{name:>10} {b:9.3f} {se:7.3f} {f:5.2f}{mark}")
print(f"{rep.failures} of {B} resamples failed")
