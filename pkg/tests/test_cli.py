import json
import math
import os
import subprocess
import sys
from pathlib import Path

import pytest

from fitlevels.cli import main, parse_rate, UsageError

GOLDEN = Path(__file__).parent / "golden"
REGEN = os.environ.get("FITLEVELS_REGEN_GOLDEN") == "1"
IGNORED = {"provenance", "version", "threads"}

CASES = {
    "simulate_onemax": ["simulate", "--oracle", "onemax", "--n", "10", "--p", "1/n", "--runs", "2000", "--seed", "1"],
    "bound_lo_viscosity": ["bound", "--partition", "lo", "--n", "30", "--p", "1/n", "--kind", "lower-viscosity"],
    "bound_lo_refined": ["bound", "--partition", "lo", "--n", "30", "--p", "1/n", "--kind", "upper-refined"],
    "bound_longpath_capped": ["bound", "--partition", "longpath", "--n", "4", "--k", "2", "--p", "0.1", "--kind", "lower-capped"],
    "exact_onemax_level": ["exact", "--oracle", "onemax", "--n", "50", "--p", "1/n"],
    "exact_lo_full": ["exact", "--oracle", "leadingones", "--n", "6", "--p", "0.1", "--method", "full"],
    "exact_longpath_full": ["exact", "--oracle", "longpath", "--n", "6", "--k", "2", "--p", "0.1", "--method", "full"],
    "formula_lo_two_bits": ["formula", "--name", "lo.exact.1p1", "--n", "2", "--p", "1/2"],
    "formula_onemax_lower": ["formula", "--name", "om.lower", "--n", "100", "--p", "1/n"],
    "optimize_rate_lo": ["optimize-rate", "--oracle", "leadingones", "--n", "100"],
    "sandwich_onemax": ["sandwich", "--oracle", "onemax", "--n", "100", "--p", "1/n"],
    "dominate_lo": ["dominate", "--oracle", "leadingones", "--n", "8", "--p", "1/n", "--runs", "2000"],
    "sweep_lo": ["sweep", "--oracle", "leadingones", "--n", "50", "--grid", "1/n:2/n:0.25/n", "--mode", "formula"],
    "path_check": ["path-check", "--n", "12", "--k", "3"],
}


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def close(a, b, path="$"):
    if isinstance(a, dict):
        assert isinstance(b, dict), path
        ka, kb = set(a) - IGNORED, set(b) - IGNORED
        assert ka == kb, (path, ka ^ kb)
        for key in ka:
            close(a[key], b[key], f"{path}.{key}")
    elif isinstance(a, list):
        assert isinstance(b, list) and len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            close(x, y, f"{path}[{i}]")
    elif isinstance(a, float) or isinstance(b, float):
        if a is None or b is None:
            assert a == b, path
        elif math.isinf(a) or math.isinf(b):
            assert a == b, path
        else:
            assert math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-300), (path, a, b)
    else:
        assert a == b, (path, a, b)


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden_json(name, capsys):
    code, out, _ = run(CASES[name] + ["--format", "json"], capsys)
    assert code == 0
    got = json.loads(out)
    path = GOLDEN / f"{name}.json"
    if REGEN:
        path.write_text(json.dumps(got, indent=2, sort_keys=True) + "\n")
    close(got, json.loads(path.read_text()))


def golden(name):
    return json.loads((GOLDEN / f"{name}.json").read_text())["result"]


def test_golden_values_agree_with_independent_checks():
    assert golden("formula_lo_two_bits")["value"] == 3.0
    assert golden("exact_onemax_level")["value"] == pytest.approx(443.19, abs=5e-3)
    assert golden("formula_onemax_lower")["value"] == pytest.approx(21.307, abs=1e-3)
    assert 1.55 <= golden("optimize_rate_lo")["c"] <= 1.63
    assert golden("path_check")["points"] == 46 and golden("path_check")["verdict"] == "PASS"
    viscous, refined = golden("bound_lo_viscosity"), golden("bound_lo_refined")
    assert viscous["certified"] and refined["certified"]
    assert viscous["value"] == pytest.approx(refined["value"], rel=1e-12)
    assert golden("simulate_onemax")["censored"] == 0
    assert golden("dominate_lo")["verdict"] == "PASS"
    assert golden("sandwich_onemax")["meta"]["violations"] == []


@pytest.mark.parametrize("p,n,expected", [("0.25", None, 0.25), ("1/3", None, 1 / 3),
                                          ("1.5/n", 10, 0.15), ("1/n", 4, 0.25), ("/n", 5, 0.2)])
def test_parse_rate(p, n, expected):
    assert parse_rate(p, n) == pytest.approx(expected)


def test_parse_rate_errors():
    with pytest.raises(UsageError):
        parse_rate("2/n", None)
    with pytest.raises(UsageError):
        parse_rate("abc", 3)


@pytest.mark.parametrize("argv", [
    ["formula", "--name", "lo.exact.1p1", "--n", "5", "--p", "0.7"],
    ["simulate", "--oracle", "onemax", "--p", "0.1"],
    ["simulate", "--n", "5"],
    ["bound", "--n", "5", "--p", "0.1", "--bogus"],
    ["nonsense"],
    ["path-check", "--n", "7", "--k", "2"],
    ["exact", "--oracle", "trap", "--n", "5", "--p", "0.1"],
    ["formula", "--n", "5"],
])
def test_usage_and_parameter_errors_exit_1(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 1 and out == "" and err


def test_uncertified_bound_exit_codes(capsys):
    argv = ["bound", "--partition", "lo", "--n", "10", "--p", "0.1", "--kind", "lower-viscosity",
            "--chi", "0.8", "--format", "json"]
    code, out, _ = run(argv, capsys)
    assert code == 0 and json.loads(out)["result"]["certified"] is False
    code, _, _ = run(argv + ["--require-certified"], capsys)
    assert code == 2


def test_sandwich_violation_exit_code(capsys):
    argv = ["sandwich", "--oracle", "longpath", "--n", "8", "--k", "2", "--p", "1/n"]
    assert run(argv, capsys)[0] == 0
    assert run(argv + ["--require-certified"], capsys)[0] == 2


def test_config_file_with_override(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"name": "lo.exact.1p1", "n": 2, "p": "1/2", "format": "json"}))
    code, out, _ = run(["formula", "--config", str(cfg)], capsys)
    assert code == 0 and json.loads(out)["result"]["value"] == 3.0
    code, out, _ = run(["formula", "--config", str(cfg), "--n", "1"], capsys)
    assert json.loads(out)["result"]["value"] == pytest.approx(1.0)
    cfg.write_text(json.dumps({"colour": "red"}))
    assert run(["formula", "--config", str(cfg)], capsys)[0] == 1


def test_output_file_and_formats(tmp_path, capsys):
    target = tmp_path / "out.txt"
    code, out, _ = run(["formula", "--name", "lo.exact.1p1", "--n", "10", "--p", "1/3",
                        "--format", "csv", "--output", str(target)], capsys)
    assert code == 0 and out == ""
    lines = target.read_text().splitlines()
    assert lines[0].startswith("# config:")
    row = dict(zip(lines[1].split(","), lines[2].split(",")))
    from fitlevels.closed_forms import lo_one_plus_one_exact
    assert float(row["value"]) == lo_one_plus_one_exact(10, 1 / 3)
    code, out, _ = run(["sweep", "--oracle", "onemax", "--n", "20", "--grid", "1/n,2/n", "--format", "csv"], capsys)
    assert code == 0 and "argmin" in out and out.startswith("# config:")
    code, out, _ = run(["bound", "--partition", "lo", "--n", "5", "--p", "0.2"], capsys)
    assert code == 0 and "upper-classic" in out


def test_records_and_table_oracle(tmp_path, capsys):
    table = tmp_path / "t.json"
    values = {format(v, "03b"): bin(v).count("1") for v in range(8)}
    table.write_text(json.dumps({"n": 3, "values": values}))
    records = tmp_path / "runs.jsonl"
    code, _, _ = run(["simulate", "--table", str(table), "--n", "3", "--p", "1/3", "--runs", "50",
                      "--records", str(records)], capsys)
    assert code == 0 and len(records.read_text().splitlines()) == 50
    code, out, _ = run(["exact", "--table", str(table), "--n", "3", "--p", "1/3", "--method", "full",
                        "--format", "json"], capsys)
    from fitlevels.markov import hitting_time_levels, onemax_level_chain
    assert json.loads(out)["result"]["value"] == pytest.approx(hitting_time_levels(onemax_level_chain(3, 1 / 3)))
    assert run(["simulate", "--table", str(table), "--n", "4", "--p", "0.1"], capsys)[0] == 1


def test_partition_file(tmp_path, capsys):
    from fitlevels.closed_forms import build_lo_levels
    path = tmp_path / "part.json"
    build_lo_levels(7, 0.1).to_json(path)
    code, out, _ = run(["bound", "--partition", str(path), "--n", "7", "--p", "0.1",
                        "--kind", "lower-viscosity", "--format", "json"], capsys)
    from fitlevels.closed_forms import lo_one_plus_one_exact
    assert code == 0
    assert json.loads(out)["result"]["value"] == pytest.approx(lo_one_plus_one_exact(7, 0.1), rel=1e-12)


def test_threads_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("FITLEVELS_THREADS", "1")
    code, out, _ = run(["simulate", "--n", "5", "--p", "0.2", "--runs", "20", "--format", "json"], capsys)
    assert code == 0 and json.loads(out)["config"]["threads"] == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fitlevels", "formula", "--name", "lo.exact.1p1",
                           "--n", "2", "--p", "0.5", "--format", "json"],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["value"] == 3.0
