import json

import pytest
from click.testing import CliRunner

from structadmm.cli import main
from structadmm.io import read_csv


@pytest.fixture
def run(tmp_path):
    runner = CliRunner()

    def _run(*args, code=0):
        r = runner.invoke(main, [str(a) for a in args])
        assert r.exit_code == code, r.output
        return r
    return _run


@pytest.fixture
def problem_file(run, tmp_path):
    run("gen", "--category", "lower_banded", "--x", 4, "--blocks", 2, "--N", 3, "--seed", 2, "--out", tmp_path)
    return tmp_path / "lower_banded_2.json"


def test_gen_writes_documented_fields(problem_file):
    d = json.loads(problem_file.read_text())
    assert {"A", "B", "N", "Q", "R", "r_x", "r_u", "x1", "xbounds", "ubounds", "partition"} <= set(d)
    assert d["metadata"]["generator"]["seed"] == 2


def test_gen_rejects_unknown_category(run):
    r = run("gen", "--category", "nope", code=2)
    assert "category" in r.output


def test_solve_with_reference(run, problem_file, tmp_path):
    run("reference", problem_file, "--out", tmp_path)
    out = tmp_path / "s"
    run("solve", problem_file, "--reference", tmp_path / "reference.json", "--rho", "optimal",
        "--threads-model", "2MN", "--seed", 7, "--out", out)
    meta, head, rows = read_csv(out / "trace.csv")
    assert head == ["iter", "r_zeta", "r_eps", "objective", "dist", "cum_ops"]
    assert meta["algo"] == "structured" and meta["threads"] == "2MN" and meta["seed"] == "7"
    assert float(rows[-1][4]) < 1e-6
    sol = json.loads((out / "solution.json").read_text())
    assert sol["converged"]


def test_conventional_beta_warns(run, problem_file, tmp_path):
    from structadmm.errors import BetaIgnoredWarning
    with pytest.warns(BetaIgnoredWarning):
        run("solve", problem_file, "--algo", "conventional", "--beta", 0.3, "--out", tmp_path)


def test_invalid_inputs(run, problem_file, tmp_path):
    assert "InvalidBeta" in run("solve", problem_file, "--beta", 1, code=1).output
    assert "InvalidConfig" in run("solve", problem_file, "--rho", "fast", code=1).output


def test_tune_and_analyze(run, problem_file, tmp_path):
    run("tune", problem_file, "--out", tmp_path)
    _, head, rows = read_csv(tmp_path / "penalty.csv")
    assert head[0] == "subsystem" and len(rows) == 2
    run("analyze", problem_file, "--gamma", "--out", tmp_path)
    meta, _, rows = read_csv(tmp_path / "analysis.csv")
    assert 0 <= float(meta["s"]) <= 1 and len(rows) == 4
    assert (tmp_path / "gamma.csv").exists()


def test_bench_cost_and_growth(run, tmp_path):
    run("bench", "--cost", "--out", tmp_path)
    meta, _, rows = read_csv(tmp_path / "cost.csv")
    assert [r[0] for r in rows] == ["i", "ii", "iii"] and meta["use_case"] == "out1"
    run("bench", "--growth", "--M-max", 3, "--out", tmp_path)
    _, head, rows = read_csv(tmp_path / "growth.csv")
    assert len(rows) == 3 and head[:2] == ["M", "x"]


def test_version(run):
    assert "0.1.0" in run("--version").output
