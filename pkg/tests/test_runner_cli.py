import csv
import dataclasses
import subprocess
import sys

import numpy as np
import pytest

from ris_twinsolver import ConfigError, Engine, build_reference_scenario, load_scenario
from ris_twinsolver.cli import main
from ris_twinsolver.config import dump_scenario
from ris_twinsolver.runner import (RESULT_COLUMNS, THREADS_ENV, ExperimentSpec, read_terminations,
                                   run_experiment, worker_count)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def singular_scenario():
    s = build_reference_scenario(1)
    bad = dataclasses.replace(s.ris[0], length=s.params.wavelength)
    return dataclasses.replace(s, ris=(bad,))


# ---------------------------------------------------------------- runner

def test_single_row_and_terminations(tmp_path):
    spec = ExperimentSpec(tmp_path, ris_sizes=(4,), engines=(Engine.ANALYTICAL,))
    report = run_experiment(spec)
    rows = read_csv(tmp_path / "results.csv")
    assert list(rows[0]) == list(RESULT_COLUMNS)
    assert len(rows) == 1
    row = rows[0]
    assert row["ris_size"] == "4" and row["engine"] == "analytical" and row["optimized"] == "false"
    assert row["runtime_ms"] == ""
    assert float(row["gain_db"]) == pytest.approx(report.gain(4, Engine.ANALYTICAL, False), abs=1e-6)
    z = read_terminations(tmp_path / row["terminations_file"])
    np.testing.assert_array_equal(z, build_reference_scenario(4).z_ris_vector())
    assert read_csv(tmp_path / "errors.csv") == []


def test_rerun_is_byte_identical(tmp_path):
    names = ("results.csv", "gain_vs_size_unoptimized.csv", "gain_vs_size_optimized.csv", "validation.csv")
    blobs = []
    for sub in ("a", "b"):
        spec = ExperimentSpec(tmp_path / sub, ris_sizes=(4,), optimize=True)
        run_experiment(spec)
        blobs.append([(tmp_path / sub / n).read_bytes() for n in names])
    assert blobs[0] == blobs[1]


def test_timing_column(tmp_path):
    run_experiment(ExperimentSpec(tmp_path, ris_sizes=(1,), engines=(Engine.ANALYTICAL,),
                                  timing=True))
    assert float(read_csv(tmp_path / "results.csv")[0]["runtime_ms"]) > 0


def test_errors_recorded_per_combination(tmp_path):
    report = run_experiment(ExperimentSpec(tmp_path, ris_sizes=(), scenario=singular_scenario(),
                                           optimize=True))
    assert not report.passed
    failed = {(e.engine, e.optimized) for e in report.errors}
    assert failed == {(Engine.ANALYTICAL, False), (Engine.ANALYTICAL, True)}
    assert report.gain(1, Engine.PEEC, False) is not None
    errors = read_csv(tmp_path / "errors.csv")
    assert len(errors) == 2 and all("SingularLengthError" in e["error"] for e in errors)
    # the failed engine leaves empty plot cells, the other is filled
    unopt = read_csv(tmp_path / "gain_vs_size_unoptimized.csv")
    assert unopt == [{"ris_size": "1", "analytical_gain_db": "",
                     "peec_gain_db": unopt[0]["peec_gain_db"]}]
    assert unopt[0]["peec_gain_db"] != ""


def test_plot_data_empty_without_peec(tmp_path):
    run_experiment(ExperimentSpec(tmp_path, ris_sizes=(1, 4), engines=(Engine.ANALYTICAL,)))
    unopt = read_csv(tmp_path / "gain_vs_size_unoptimized.csv")
    assert [r["ris_size"] for r in unopt] == ["1", "4"]
    assert all(r["analytical_gain_db"] and r["peec_gain_db"] == "" for r in unopt)
    opt = read_csv(tmp_path / "gain_vs_size_optimized.csv")
    assert all(r["analytical_gain_db"] == "" for r in opt)


def test_spec_validation(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentSpec(tmp_path, engines=())
    with pytest.raises(ConfigError):
        ExperimentSpec(tmp_path, ris_sizes=(0,))
    with pytest.raises(ConfigError):
        ExperimentSpec(tmp_path, ris_sizes=(4,), scenario=build_reference_scenario(2))
    spec = ExperimentSpec(tmp_path, ris_sizes=(), scenario=build_reference_scenario(2))
    assert spec.ris_sizes == (2,)


@pytest.mark.parametrize("value, expected", [("", 1), ("3", 3), (" 2 ", 2)])
def test_worker_count(monkeypatch, value, expected):
    monkeypatch.setenv(THREADS_ENV, value)
    assert worker_count() == expected


@pytest.mark.parametrize("value", ["0", "-1", "many"])
def test_worker_count_rejects(monkeypatch, value):
    monkeypatch.setenv(THREADS_ENV, value)
    with pytest.raises(ConfigError):
        worker_count()


def test_threads_do_not_change_results(tmp_path, monkeypatch):
    blobs = []
    for threads in ("1", "4"):
        monkeypatch.setenv(THREADS_ENV, threads)
        out = tmp_path / threads
        run_experiment(ExperimentSpec(out, ris_sizes=(1, 4), optimize=True))
        blobs.append((out / "results.csv").read_bytes())
    assert blobs[0] == blobs[1]


# ---------------------------------------------------------------- CLI

def test_cli_run_and_validate(tmp_path, capsys):
    assert main(["run", "--sizes", "1,4", "--engine", "analytical", "--out-dir",
                 str(tmp_path / "run")]) == 0
    assert len(read_csv(tmp_path / "run" / "results.csv")) == 2
    assert "overall: PASS" in capsys.readouterr().out

    assert main(["validate", "--sizes", "4", "--out-dir", str(tmp_path / "val")]) == 0
    out = tmp_path / "val"
    assert not (out / "results.csv").exists()
    checks = {r["check"] for r in read_csv(out / "validation.csv")}
    assert {"engine_delta_unoptimized", "engine_delta_optimized",
            "optimized_ge_unoptimized_peec"} <= checks


def test_cli_exit_codes(tmp_path, capsys):
    (tmp_path / "bad.yaml").write_text("max_sweeps: -3\n")
    assert main(["run", "--config", str(tmp_path / "bad.yaml"), "--out-dir", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "max_sweeps" in err and "line 1" in err
    assert main(["run", "--sizes", "x", "--out-dir", str(tmp_path)]) == 2
    with pytest.raises(SystemExit):
        main(["run", "--engine", "fdtd"])

    (tmp_path / "scen.yaml").write_text(dump_scenario(singular_scenario()))
    (tmp_path / "run.yaml").write_text("scenario: scen.yaml\n")
    assert main(["run", "--config", str(tmp_path / "run.yaml"), "--out-dir",
                 str(tmp_path / "o")]) == 1


def test_cli_custom_scenario_and_seed(tmp_path):
    scen = build_reference_scenario(3, termination=2 - 40j)
    (tmp_path / "scen.yaml").write_text(dump_scenario(scen))
    (tmp_path / "run.yaml").write_text("scenario: scen.yaml\ncoordinate_order: random_permutation\n"
                                       "max_sweeps: 2\n")
    out = tmp_path / "o"
    assert main(["run", "--config", str(tmp_path / "run.yaml"), "--engine", "analytical",
                 "--optimize", "--seed", "5", "--out-dir", str(out)]) == 0
    rows = read_csv(out / "results.csv")
    assert [r["ris_size"] for r in rows] == ["3", "3"]
    np.testing.assert_array_equal(read_terminations(out / rows[0]["terminations_file"]),
                                  np.full(3, 2 - 40j))


def test_cli_scenario_print(tmp_path, capsys):
    assert main(["scenario", "print", "--sizes", "16"]) == 0
    s = load_scenario(capsys.readouterr().out)
    assert s == build_reference_scenario(16)
    (tmp_path / "run.yaml").write_text("scenario:\n" + "".join(
        "  " + line + "\n" for line in dump_scenario(build_reference_scenario(2)).splitlines()))
    assert main(["scenario", "print", "--config", str(tmp_path / "run.yaml")]) == 0
    assert load_scenario(capsys.readouterr().out) == build_reference_scenario(2)


def test_console_module_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ris_twinsolver.cli", "scenario", "print"],
                          capture_output=True, text=True, check=True)
    assert load_scenario(proc.stdout) == build_reference_scenario(4)


def test_full_sweep_layout(tmp_path):
    report = run_experiment(ExperimentSpec(tmp_path, optimize=True))
    rows = read_csv(tmp_path / "results.csv")
    assert len(rows) == 12 and not report.errors
    assert {(r["ris_size"], r["engine"], r["optimized"]) for r in rows} == {
        (str(n), e, o) for n in (4, 16, 64) for e in ("analytical", "peec") for o in ("true", "false")}
    unopt, opt = (read_csv(tmp_path / f"gain_vs_size_{tag}.csv") for tag in ("unoptimized", "optimized"))
    assert [r["ris_size"] for r in unopt] == ["4", "16", "64"]
    for before, after in zip(unopt, opt):
        assert len(before) == 3
        for col in ("analytical_gain_db", "peec_gain_db"):
            assert float(after[col]) >= float(before[col])
    checks = read_csv(tmp_path / "validation.csv")
    assert all(c["passed"] in ("true", "") for c in checks)
    assert {c["ris_size"] for c in checks if c["check"] == "transfer_gain_peec_db"} == {"4", "16", "64"}
