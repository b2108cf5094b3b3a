import json
import subprocess
import sys
from pathlib import Path

import pytest

from reclasso_arx.cli import EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main
from reclasso_arx.data import IngestSpec, load_csv
from reclasso_arx.errors import PathStalled

FIXTURE = Path(__file__).parent / "fixtures" / "macro3.csv"
SMALL = ["--k", "2", "--T", "90", "--p", "3", "--s", "3", "--grid-size", "6",
         "--density", "0.3"]


def test_simulate_writes_loadable_csv(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    assert main(["simulate", str(out), "--k", "3", "--T", "60", "--p", "2", "--s", "2"]) == 0
    s = load_csv(out, IngestSpec(target="y"))
    assert (s.T, s.k) == (60, 3)
    assert "wrote 60 observations" in capsys.readouterr().out


def test_tune_prints_curve(tmp_path, capsys):
    js = tmp_path / "tune.json"
    assert main(["tune", *SMALL, "--json", str(js)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "lambda_hat" in out
    data = json.loads(js.read_text())
    assert len(data["grid"]) == len(data["msfe"]) == 6
    assert data["lam_hat"] in data["grid"]


def test_evaluate_rule_and_outputs(tmp_path, capsys):
    js, cs = tmp_path / "r.json", tmp_path / "r.csv"
    code = main(["evaluate", *SMALL, "--rule", "newton", "--json", str(js), "--csv", str(cs)])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "static" in out and "newton" in out and "aic" not in out
    data = json.loads(js.read_text())
    assert [r["method"] for r in data["summary"]] == ["static", "newton"]
    assert data["summary"][0]["relative_msfe"] == 1.0
    assert cs.read_text().startswith("method,msfe")


def test_evaluate_on_fixture(capsys):
    code = main(["evaluate", "--data", str(FIXTURE), "--target", "CPI", "--aggregate", "3",
                 "--p", "2", "--s", "2", "--grid-size", "6", "--methods", "static,gradient,mean"])
    assert code == EXIT_OK
    assert "gradient" in capsys.readouterr().out


def test_evaluate_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["evaluate", *SMALL, "--reps", "2", "--seed", "42", "--methods", "static,gradient,bic"]
    assert main(args + ["--json", str(a)]) == 0
    assert main(args + ["--json", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_timing_only_with_flag(tmp_path):
    a = tmp_path / "a.json"
    assert main(["evaluate", *SMALL, "--rule", "gradient", "--timing", "--json", str(a)]) == 0
    assert "timing" in json.loads(a.read_text())


def test_bench(tmp_path, capsys):
    js = tmp_path / "b.json"
    assert main(["bench", *SMALL, "--rule", "gradient", "--iterations", "3",
                 "--json", str(js)]) == 0
    out = capsys.readouterr().out
    assert "x rolling-validation mean time" in out
    assert set(json.loads(js.read_text())["ms"]) == {"rolling", "gradient"}


@pytest.mark.parametrize("argv", [
    ["evaluate", "--reps", "zero"],
    ["evaluate", "--rule", "lars"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_1(argv, capsys):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == EXIT_USAGE


def test_semantic_usage_errors(capsys):
    assert main(["evaluate", *SMALL, "--methods", "static,lars"]) == EXIT_USAGE
    assert main(["evaluate", *SMALL, "--methods", "static", "--rule", "newton"]) == EXIT_USAGE
    assert main(["evaluate", "--data", str(FIXTURE)]) == EXIT_USAGE
    assert main(["bench", *SMALL, "--warmup", "1"]) == EXIT_USAGE


def test_data_errors_exit_2(tmp_path, capsys):
    assert main(["evaluate", "--data", str(tmp_path / "missing.csv"), "--target", "a"]) == EXIT_DATA
    bad = tmp_path / "bad.csv"
    bad.write_text("t,a,b\n1,1,x\n")
    assert main(["evaluate", "--data", str(bad), "--target", "a"]) == EXIT_DATA
    assert "row 2" in capsys.readouterr().err
    assert main(["evaluate", "--data", str(FIXTURE), "--target", "GDP"]) == EXIT_DATA
    # too short for 12 lags after quarterly aggregation of a 20-row slice
    short = tmp_path / "short.csv"
    short.write_text("\n".join(FIXTURE.read_text().splitlines()[:22]) + "\n")
    assert main(["evaluate", "--data", str(short), "--target", "CPI"]) == EXIT_DATA


def test_numerical_failure_exits_3(monkeypatch, capsys):
    import reclasso_arx.harness as harness

    def boom(cfg, progress=None):
        raise PathStalled("forced")

    monkeypatch.setattr("reclasso_arx.cli.run_experiment", boom)
    assert main(["evaluate", *SMALL]) == EXIT_NUMERICAL
    assert harness.run_experiment is not boom


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "reclasso_arx", "--help"],
                         capture_output=True, text=True, check=True)
    assert "simulate" in out.stdout and "bench" in out.stdout


def test_tune_short_series_is_data_error(tmp_path, capsys):
    short = tmp_path / "short.csv"
    short.write_text("\n".join(FIXTURE.read_text().splitlines()[:22]) + "\n")
    assert main(["tune", "--data", str(short), "--target", "CPI", "--p", "12"]) == EXIT_DATA
    # an explicit but impossible split is a usage problem
    assert main(["tune", *SMALL, "--t1", "2", "--t2", "50"]) == EXIT_USAGE
