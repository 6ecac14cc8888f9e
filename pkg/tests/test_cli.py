import json
import re
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kinkchain import cli, dynamics, verify
from kinkchain.io import (
    ConfigError,
    Param,
    RunMeta,
    coerce_config,
    config_hash,
    format_value,
    parse_config_text,
    read_csv_table,
    write_table,
)

STATIC_ARGS = ["static-scan", "--sigma", "0,0.4,0.8", "--n", "512", "--g", "0.5,1.5", "--realizations", "2", "--gc-sigma", "0,0.8,2.0"]
HEADER_KEYS = {"schema_version", "command", "config_hash", "base_seed", "build_id", "rng", "timestamp"}


def strip_timestamp(text):
    return re.sub(r'("?timestamp"?:\s*)"?[^"\n]*"?', r"\1", text)


@pytest.fixture(scope="module")
def static_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("static")
    assert cli.main([*STATIC_ARGS, "--out", str(out)]) == 0
    return out


def test_static_scan_writes_five_tables(static_run):
    tables = sorted(p.name for p in static_run.glob("*.csv"))
    assert tables == ["correlation_coefficient.csv", "critical_field.csv", "density.csv", "kink_distribution.csv", "pair_correlator.csv"]
    meta = json.loads((static_run / "metadata.json").read_text())
    assert set(meta["files"]) == set(tables)
    assert meta["config"]["sigma"] == [0.0, 0.4, 0.8]


def test_tables_carry_provenance_and_one_header_row(static_run):
    for p in static_run.glob("*.csv"):
        lines = p.read_text().splitlines()
        meta, columns, rows = read_csv_table(p)
        assert set(meta) == HEADER_KEYS
        assert meta["schema_version"] == "1"
        assert sum(not line.startswith("#") for line in lines) == len(rows) + 1
        assert all(len(r) == len(columns) for r in rows)


def test_critical_field_table(static_run):
    _, cols, rows = read_csv_table(static_run / "critical_field.csv")
    assert cols == ["sigma", "g_c", "exists"]
    assert rows[0][1] == "1" and rows[2][2] == "false"


def test_rerun_is_byte_identical_apart_from_timestamp(tmp_path):
    args = [*STATIC_ARGS, "--n", "64", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    first = {p.name: p.read_text() for p in tmp_path.iterdir()}
    assert cli.main(args) == 0
    second = {p.name: p.read_text() for p in tmp_path.iterdir()}
    assert first.keys() == second.keys()
    for name in first:
        assert strip_timestamp(first[name]) == strip_timestamp(second[name]), name


def test_empty_sigma_grid_is_a_usage_error(tmp_path, capsys):
    assert cli.main(["static-scan", "--sigma", "", "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "sigma" in capsys.readouterr().err


@pytest.mark.parametrize(
    "args",
    [
        ["quench", "--n", "7"],
        ["quench", "--tau-q", "-1"],
        ["quench", "--scheme", "euler"],
        ["ensemble", "--format", "xml"],
        ["ensemble", "--threads", "0"],
        ["verify", "--n", "14"],
        ["static-scan", "--sigma", "abc"],
        ["bogus"],
    ],
)
def test_bad_configuration_exit_code(args, tmp_path):
    assert cli.main([*args, "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_numerical_failure_exit_code(monkeypatch, tmp_path):
    monkeypatch.setattr(dynamics, "NORM_DRIFT_LIMIT", -1.0)
    assert cli.main(["quench", "--n", "8", "--tau-q", "1", "--out", str(tmp_path)]) == cli.EXIT_NUMERIC


def test_verification_failure_exit_code(monkeypatch, tmp_path):
    monkeypatch.setattr(verify, "run_checks", lambda *a, **k: [verify.Check("injected", 1.0, 1e-9, 1)])
    assert cli.main(["verify", "--out", str(tmp_path)]) == cli.EXIT_VERIFY
    report = json.loads((tmp_path / "verify_report.json").read_text())
    assert report["passed"] is False and report["n_failed"] == 1


def test_verify_report(tmp_path, capsys):
    assert cli.main(["verify", "--n", "4,6", "--draws", "4", "--dynamic-n", "6", "--out", str(tmp_path)]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS") >= 6 and "FAIL" not in out
    report = json.loads((tmp_path / "verify_report.json").read_text())
    assert set(report) == {"meta", "passed", "checks", "n_checks", "n_failed", "worst_ratio"}
    assert set(report["checks"][0]) == {"name", "max_error", "tolerance", "cases", "passed"}
    assert set(report["meta"]) == HEADER_KEYS


def test_quench_outputs_and_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# short quench\nn = 16\ntau-q = 2\nsigma = 0.2\nsnapshots = 5\nzz_max_r = 4\n")
    out = tmp_path / "out"
    assert cli.main(["quench", "--config", str(cfg), "--tau-q", "1", "--format", "json", "--out", str(out)]) == 0
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["config"]["tau_q"] == 1.0 and meta["config"]["n"] == 16
    traj = json.loads((out / "trajectory.json").read_text())
    assert traj["columns"] == ["g", "t", "step", "d", "d_static"]
    assert len(traj["rows"]) == 5 and traj["rows"][0][0] == 10.0 and traj["rows"][-1][0] == 0.0
    zz = json.loads((out / "zz.json").read_text())
    assert [r[0] for r in zz["rows"]] == [0, 1, 2, 3, 4] and zz["rows"][0][1] == 1.0
    final = json.loads((out / "final.json").read_text())
    assert final["rows"][0][final["columns"].index("norm_drift")] < 1e-6


def test_ensemble_uses_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("KINKCHAIN_OUTPUT_DIR", str(tmp_path))
    args = ["ensemble", "--sigma", "0.3", "--tau-q", "1,2", "--n", "8", "--realizations", "2"]
    assert cli.main(args) == 0
    _, cols, rows = read_csv_table(tmp_path / "realizations.csv")
    assert len(rows) == 4 and "seed" in cols
    _, _, wrows = read_csv_table(tmp_path / "fits_w.csv")
    assert len(wrows) == 1


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "kinkchain.cli", "verify", "--n", "14", "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == cli.EXIT_CONFIG
    assert "SizeExceeded" in proc.stderr or "exceeds" in proc.stderr


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_floats_round_trip_exactly(x):
    assert float(format_value(x)) == x


def test_csv_values_round_trip(tmp_path):
    values = [0.1, 1 / 3, np.pi * 1e-300, 2.0**-1074, -1.7976931348623157e308]
    p = write_table(tmp_path / "t", ["x"], [[v] for v in values], RunMeta("test", {}, 0))
    _, _, rows = read_csv_table(p)
    assert [float(r[0]) for r in rows] == values


def test_config_parsing():
    raw = parse_config_text("a = 1\n# comment\nsigma-grid = 0.1, 0.2\n\n")
    assert raw == {"a": "1", "sigma_grid": "0.1, 0.2"}
    with pytest.raises(ConfigError):
        parse_config_text("a = 1\na = 2\n")
    with pytest.raises(ConfigError):
        parse_config_text("just words\n")
    schema = {"a": Param(int, 0, ""), "s": Param(float, (1.0,), "", is_list=True)}
    assert coerce_config(schema, {"a": "3"}) == {"a": 3, "s": (1.0,)}
    with pytest.raises(ConfigError):
        coerce_config(schema, {"b": "1"})


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": (0.1, 0.2)}) == config_hash({"b": [0.1, 0.2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
