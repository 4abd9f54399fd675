import csv
import io
import json
from pathlib import Path

import pytest

from putinar_kit.cli import main, parse_levels

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def csv_rows(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_parse_levels():
    assert parse_levels("1..4") == [1, 2, 3, 4]
    assert parse_levels("2..8:2") == [2, 4, 6, 8]
    assert parse_levels("2,4,6") == [2, 4, 6]
    assert parse_levels("5..2") == []


def test_certify_then_verify(tmp_path, capsys):
    cert = tmp_path / "cert.json"
    code, out, _ = run(capsys, "certify", "--problem", PROBLEMS / "ball1d.json", "--strategy", "direct", "--out", cert)
    assert code == 0 and "verdict pass" in out
    data = json.loads(cert.read_text())
    assert data["residual"] <= 1e-6
    code, out, _ = run(capsys, "verify", "--problem", PROBLEMS / "ball1d.json", "--cert", cert)
    report = json.loads(out)
    assert code == 0 and report["verdict"] == "pass"
    data["parts"][0]["gram"][0][0] += 0.1
    cert.write_text(json.dumps(data))
    code, out, _ = run(capsys, "verify", "--problem", PROBLEMS / "ball1d.json", "--cert", cert)
    assert code == 2 and json.loads(out)["verdict"] == "fail"


def test_missing_file_exit_code(capsys):
    code, _, err = run(capsys, "certify", "--problem", "/nonexistent/problem.json")
    assert code == 1 and "IoError" in err


def test_numeric_failure_exit_code(capsys):
    code, _, err = run(capsys, "certify", "--problem", PROBLEMS / "half_disk.json", "--strategy", "perturbation")
    assert code == 3 and "DegreeOverflow" in err


def test_bound_single_and_sweep(capsys):
    code, out, _ = run(capsys, "bound", "--formula", "putinar_simplified", "--json", PROBLEMS / "bound_inputs.json")
    data = json.loads(out)
    assert code == 0
    assert data["value"] == pytest.approx(8 * 2 ** 10 * 4 * 2 ** 7 * 3 ** 5)
    assert data["label"] == "constant-free shape"
    code, out, _ = run(capsys, "bound", "--formula", "putinar_simplified", "--json", PROBLEMS / "bound_sweep.json", "--sweep")
    assert code == 0 and out.startswith("# constant-free shape")
    code, _, _ = run(capsys, "bound", "--formula", "nonsense", "--json", PROBLEMS / "bound_inputs.json")
    assert code == 1


def test_lasserre_single(capsys):
    code, out, _ = run(capsys, "lasserre", "--problem", PROBLEMS / "interval_identity.json", "--level", 1, "--mode", "mom")
    data = json.loads(out)
    assert code == 0 and data["value"] == pytest.approx(-1.0, abs=1e-6)


def test_lasserre_sweep_is_deterministic(capsys):
    args = ("lasserre", "--problem", PROBLEMS / "interval_identity.json", "--sweep", "1..4")
    _, first, _ = run(capsys, *args)
    _, second, _ = run(capsys, *args)
    strip = lambda t: [line for line in t.splitlines() if not line.startswith("#")]
    assert strip(first) == strip(second)
    rows = csv_rows(first)
    assert [int(r["ell"]) for r in rows] == [1, 2, 3, 4]
    assert all(abs(float(r["gap"])) <= 1e-6 for r in rows)
    assert all(r["runtime_ms"] == "NA" for r in rows)


def test_empty_range_is_config_error(capsys):
    code, _, err = run(capsys, "lasserre", "--problem", PROBLEMS / "interval_identity.json", "--sweep", "4..1")
    assert code == 1 and "ConfigError" in err


def test_loja_and_echelon(tmp_path, capsys):
    code, out, _ = run(capsys, "loja", "--problem", PROBLEMS / "interval_linear.json")
    data = json.loads(out)
    assert code == 0 and data["cqc"]["holds"] and data["L_hat"] >= 1.0
    samples = tmp_path / "h.csv"
    code, out, _ = run(capsys, "echelon", "--delta", 0.5, "--k", 5, "--out", samples)
    data = json.loads(out)
    assert code == 0 and data["report"]["error_ok"] and data["m"] == len(data["chebyshev_coefficients"]) - 1
    assert len(csv_rows(samples.read_text())) == 401


def test_moments_sweep(capsys):
    code, out, _ = run(capsys, "moments", "--problem", PROBLEMS / "interval_identity.json", "--t", 1, "--levels", "2,4")
    rows = csv_rows(out)
    assert code == 0 and [int(r["ell"]) for r in rows] == [2, 4]
    assert all(float(r["dist_lower"]) <= 1e-6 for r in rows)
    code, _, _ = run(capsys, "moments", "--problem", PROBLEMS / "interval_identity.json", "--t", 2, "--levels", "2")
    assert code == 1
