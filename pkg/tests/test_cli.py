import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

import flexbie.scenarios
from flexbie.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main
from flexbie.config import RunConfig, schema_json
from flexbie.system import SolverFailure

ROOT = Path(__file__).resolve().parents[1]

SCATTER = {
    "scenario": "scatter",
    "geometry": [{"type": "circle", "params": {"radius": 1.0}}],
    "bc": "clamped",
    "k": 2.0,
    "nu": 0.3,
    "discretization": {"n_panels": 4, "order": 16},
    "grid": {"xlim": [-2.0, 2.0], "ylim": [-2.0, 2.0], "nx": 5, "ny": 5},
}


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_scatter_writes_csv_and_sidecar(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["scatter", "--config", _write(tmp_path, SCATTER), "--out", str(out)]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["passed"]
    with (out / "field.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "y", "Re u", "Im u", "|u|", "mask"]
    assert len(rows) == 26
    centre = rows[1 + 12]
    assert float(centre[0]) == float(centre[1]) == 0.0
    assert centre[-1] == "1" and centre[2] == "nan"
    side = json.loads((out / "field.json").read_text())
    assert side["columns"] == rows[0]
    assert side["residual"] <= 1e-12


def test_output_is_deterministic(tmp_path):
    cfg = _write(tmp_path, SCATTER)
    for d in ("a", "b"):
        assert main(["scatter", "--config", cfg, "--out", str(tmp_path / d)]) == EXIT_OK
    assert (tmp_path / "a" / "field.csv").read_bytes() == (tmp_path / "b" / "field.csv").read_bytes()


@pytest.mark.parametrize("patch", [
    {"k": -1.0},
    {"nu": -1.0},
    {"bogus": 1},
    {"scenario": "far-field"},
    {"incident": {"type": "point_source", "source": [5.0, 0.0]}},
    {"geometry": [{"type": "starfish", "params": {"A": 1.5}}]},
])
def test_config_errors_exit_2(tmp_path, patch):
    cfg = dict(SCATTER, **patch)
    assert main(["scatter", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_missing_config_and_bad_threads(tmp_path, monkeypatch):
    assert main(["scatter", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG
    cfg = _write(tmp_path, SCATTER)
    assert main(["scatter", "--config", cfg, "--out", str(tmp_path / "o"), "--threads", "0"]) == EXIT_CONFIG
    monkeypatch.setenv("FLEXBIE_THREADS", "many")
    assert main(["scatter", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_threads_from_environment(tmp_path, monkeypatch):
    seen = []
    real = flexbie.scenarios.run

    def spy(cfg, out, threads=None):
        seen.append(threads)
        return real(cfg, out, threads)

    monkeypatch.setattr(flexbie.scenarios, "run", spy)
    monkeypatch.setenv("FLEXBIE_THREADS", "3")
    assert main(["scatter", "--config", _write(tmp_path, SCATTER), "--out", str(tmp_path / "o")]) == EXIT_OK
    assert main(["scatter", "--config", _write(tmp_path, SCATTER), "--out", str(tmp_path / "o"),
                 "--threads", "2"]) == EXIT_OK
    assert seen == [3, 2]


def test_solver_failure_exit_3(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise SolverFailure("singular")

    monkeypatch.setattr(flexbie.scenarios, "solve_incident", boom)
    assert main(["scatter", "--config", _write(tmp_path, SCATTER), "--out", str(tmp_path / "o")]) == EXIT_SOLVER


def test_failed_check_exit_4(tmp_path):
    cfg = {"scenario": "kernel-check", "geometry": [{"type": "circle"}], "k": 8.0, "nu": 0.3,
           "discretization": {"n_panels": 16, "order": 16}, "tolerances": {"limit": 1e-15}}
    out = tmp_path / "o"
    assert main(["kernel-check", "--config", _write(tmp_path, cfg), "--out", str(out)]) == EXIT_CHECK
    assert json.loads((out / "kernel_check.json").read_text())


def test_far_field_csv_columns(tmp_path):
    cfg = dict(SCATTER, scenario="far-field", far_field={"n_theta": 8, "radius": 500.0})
    cfg.pop("grid")
    out = tmp_path / "o"
    assert main(["far-field", "--config", _write(tmp_path, cfg), "--out", str(out)]) == EXIT_OK
    with (out / "farfield.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["theta", "Re f", "Im f", "|f|", "phase"]
    assert len(rows) == 9


def test_schema_file_is_current():
    assert (ROOT / "docs" / "config.schema.json").read_text() == schema_json()


@pytest.mark.parametrize("path", sorted((ROOT / "configs").glob("*.json")), ids=lambda p: p.name)
def test_shipped_configs_validate(path):
    RunConfig.model_validate_json(path.read_text())


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "flexbie.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "--threads" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "flexbie.cli", "nope", "--config", "x"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
