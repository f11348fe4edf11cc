import numpy as np
import pytest

from mtereg import Dataset, SimDesign, gen_dataset, model_error, selection_score, write_csv
from mtereg.bench_cli import (ConfigError, build_config, cmd_bootstrap, cmd_fit, cmd_selftest,
                              cmd_simulate, cmd_split_eval, fit_method, main, prepare_data)


def body(report):
    # report CSV with the wall_time column removed
    lines = report.to_csv().splitlines()
    return [",".join(line.split(",")[:-1]) for line in lines]


@pytest.fixture
def clean_csv(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((80, 4)) * [1, 2, 3, 4] + 5
    y = X @ np.array([1.0, -0.5, 0.0, 0.25]) + 3 + rng.standard_normal(80)
    p = tmp_path / "clean.csv"
    write_csv(p, Dataset(X=X, y=y, names=["a", "b", "c", "d"], response="y"))
    return p, X, y


def test_fit_identity_sanity(clean_csv):
    p, X, y = clean_csv
    cfg = build_config(t="0", penalty="none", lam="0", intercept=True)
    res, data, text = cmd_fit(p, "y", cfg)
    ref = np.linalg.lstsq(np.column_stack([np.ones(len(y)), X]), y, rcond=None)[0]
    coef = {line.split(",")[0]: float(line.split(",")[2]) for line in text.splitlines()
            if line and not line.startswith("#") and not line.startswith("name")}
    got = np.array([coef["(intercept)"], coef["a"], coef["b"], coef["c"], coef["d"]])
    assert np.max(np.abs(got - ref)) <= 1e-8


def test_fit_cli_output(clean_csv, tmp_path, capsys):
    p, _, _ = clean_csv
    assert main(["fit", str(p), "--response", "y", "--log", "a"]) == 0
    out = capsys.readouterr().out
    assert "ln(a)" in out and "# selected =" in out
    dest = tmp_path / "fit.txt"
    assert main(["fit", str(p), "--response", "y", "--out", str(dest)]) == 0
    assert "name,std_coef,coef,selected" in dest.read_text()


def test_exit_codes(tmp_path, clean_csv, capsys):
    p, _, _ = clean_csv
    assert main(["fit", str(tmp_path / "missing.csv"), "--response", "y"]) == 2
    assert main(["fit", str(p), "--response", "nope"]) == 2
    assert main(["fit", str(p), "--response", "y", "--lambda", "aic"]) == 1
    assert main(["fit", str(p), "--response", "y", "--t", "big"]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["split-eval", str(p), "--response", "y", "--train-fraction", "1.0"]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("a,y\n1,2\nx,3\n")
    assert main(["fit", str(bad), "--response", "y"]) == 2
    assert "line 3" in capsys.readouterr().err
    const = tmp_path / "const.csv"
    const.write_text("a,y\n" + "".join(f"{i},7\n" for i in range(10)))
    assert main(["fit", str(const), "--response", "y"]) == 3
    assert "constant" in capsys.readouterr().err


def test_dropped_rows_reported(tmp_path):
    p = tmp_path / "holes.csv"
    rng = np.random.default_rng(1)
    rows = [f"{a:.6f},{b:.6f},{a + b + rng.standard_normal():.6f}"
            for a, b in rng.standard_normal((30, 2))]
    rows[3] = "NA,1,2"
    rows[7] = "1,,2"
    p.write_text("a,b,y\n" + "\n".join(rows) + "\n")
    _, data, text = cmd_fit(p, "y", build_config(intercept=True), drop_missing=True)
    assert data.n == 28 and "# dropped_rows = 2" in text
    rep = cmd_bootstrap(data, build_config(intercept=True), B=2)
    assert rep.metadata["dropped_rows"] == 2


def test_simulate_deterministic_and_thread_independent():
    design = SimDesign("ar1", "fixed1", n=100, reps=3, seed=5)
    a = cmd_simulate(design, ("mte", "ols"))
    b = cmd_simulate(design, ("mte", "ols"))
    c = cmd_simulate(design, ("mte", "ols"), threads=3)
    assert body(a) == body(b) == body(c)
    for key in ("design", "n", "d", "reps", "seed", "version"):
        assert key in a.metadata


def test_simulate_single_rep_equals_single_fit():
    design = SimDesign("ar1", "fixed2", n=100, reps=1, seed=6)
    rep = cmd_simulate(design, ("mte", "lad-lasso"))
    ds = gen_dataset(design, 0)
    cfg = build_config()
    for row in rep.rows:
        res = fit_method(row["method"], ds.X, ds.y, cfg)
        sc = selection_score(res.beta, ds.beta0)
        me = model_error(res.beta, ds.beta0, ds.X)
        assert row["me_mean"] == row["me_median"] == pytest.approx(me, rel=1e-12)
        assert row["me_mad"] == 0
        assert (row["tp"], row["fp"], row["fnr"], row["fpr"]) == (sc.tp, sc.fp, sc.fnr, sc.fpr)


def test_simulate_cli_writes_report(tmp_path):
    cfg = tmp_path / "design.cfg"
    SimDesign("identity", "e2", n=60, reps=2, seed=1).save(cfg)
    out = tmp_path / "rep.csv"
    assert main(["simulate", str(cfg), "--methods", "mte", "huber-lasso", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "method,fnr,fpr,tp,fp,me_mean,me_median,me_mad,wall_time"
    assert len(lines) == 3
    meta = (tmp_path / "rep.csv.meta").read_text()
    assert "design = identity/e2" in meta and "seed = 1" in meta and "version = " in meta
    with pytest.raises(ConfigError):
        cmd_simulate(SimDesign(reps=1), ("mte", "ridge"))


def test_bootstrap_degenerate_cases():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((60, 2))
    y = 5 * X[:, 0] + rng.standard_normal(60)
    data = Dataset(X=X, y=y, names=["signal", "noise"])
    cfg = build_config(t="0.05", penalty="lasso", lam="1.0")
    rep = cmd_bootstrap(data, cfg, B=20, seed=3)
    assert rep.se[1] == 0 and rep.frequency[1] == 0
    assert rep.se[0] > 0 and rep.frequency[0] == 1
    one = cmd_bootstrap(data, cfg, B=1)
    assert np.all(np.isnan(one.se))
    assert ",n/a," in one.to_csv()
    assert np.array_equal(cmd_bootstrap(data, cfg, B=5, seed=9).se,
                          cmd_bootstrap(data, cfg, B=5, seed=9, threads=2).se)
    with pytest.raises(ConfigError):
        cmd_bootstrap(data, cfg, B=0)


def test_bootstrap_freeze_reuses_t():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((80, 3))
    y = X @ np.array([1.0, 0.0, -1.0]) + rng.standard_normal(80)
    rep = cmd_bootstrap(Dataset(X=X, y=y), build_config(), B=4, freeze=True)
    assert rep.metadata["freeze"] is True and rep.failures == 0


def test_split_eval_shape_high_dim():
    ds = gen_dataset(SimDesign("identity", "e1", n=40, d=50, seed=2))
    # shape contract only: a fixed lambda keeps 100 splits cheap
    cfg = build_config(penalty="lasso", lam="0.2")
    rows = cmd_split_eval(ds, cfg, splits=100, methods=("mte", "lasso"))
    assert [r["method"] for r in rows] == ["mte", "lasso"]
    for r in rows:
        assert set(r) == {"method", "mspe", "mspe_se", "size", "size_se", "failures"}
        assert np.isfinite(r["mspe"]) and r["mspe_se"] >= 0 and r["size_se"] >= 0
    with pytest.raises(ConfigError):
        cmd_split_eval(ds, cfg, train_fraction=1.0)


def test_split_eval_clean_agreement():
    ds = gen_dataset(SimDesign("identity", "e1", n=200, seed=3))
    rows = cmd_split_eval(ds, build_config(), splits=30, methods=("mte", "lasso"))
    m, l = rows[0]["mspe"], rows[1]["mspe"]
    assert abs(m - l) <= 0.1 * l


def test_split_eval_cli(clean_csv, tmp_path):
    p, _, _ = clean_csv
    out = tmp_path / "split.csv"
    assert main(["split-eval", str(p), "--response", "y", "--splits", "3", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "method,mspe,mspe_se,size,size_se,failures"
    assert "dropped_rows = 0" in (tmp_path / "split.csv.meta").read_text()


def test_prepare_data_standardizes(clean_csv):
    p, X, y = clean_csv
    std, raw = prepare_data(p, "y")
    assert np.allclose(std.X.mean(axis=0), 0, atol=1e-12)
    assert np.allclose(std.X.std(axis=0, ddof=1), 1)
    assert np.array_equal(raw.X, np.array(raw.X))


def test_selftest(capsys):
    assert cmd_selftest() == 0
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 8 and "FAIL" not in out
