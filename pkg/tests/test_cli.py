import csv
import json
from pathlib import Path

import numpy as np
import pytest

from srrr import __version__
from srrr.cli import main, read_matrix_csv, write_matrix_csv

FIX = Path(__file__).parent / "fixtures"


def run(args):
    with pytest.raises(SystemExit) as exc:
        raise SystemExit(main(args))
    return exc.value.code


def test_select_noiseless_toy(tmp_path):
    code = run(["select", "--x", str(FIX / "toy_X.csv"), "--y", str(FIX / "toy_Y.csv"), "--out", str(tmp_path)])
    assert code == 0
    report = json.loads((tmp_path / "select_report.json").read_text())
    _, B_true = read_matrix_csv(FIX / "toy_B.csv")
    assert len(report["chosen"]) == 7
    for method, chosen in report["chosen"].items():
        assert chosen["support"] == [0, 1, 3], method
        assert chosen["r"] == 2
        _, B = read_matrix_csv(tmp_path / chosen["coefficients"])
        np.testing.assert_allclose(B, B_true, atol=1e-10)


def test_select_dimension_mismatch(tmp_path, capsys):
    ybad = tmp_path / "y.csv"
    _, Y = read_matrix_csv(FIX / "toy_Y.csv")
    write_matrix_csv(ybad, Y[:-1], ["a", "b", "c"])
    assert run(["select", "--x", str(FIX / "toy_X.csv"), "--y", str(ybad), "--out", str(tmp_path)]) == 2
    assert "dimension mismatch" in capsys.readouterr().err


def test_select_table1_fixture_has_exclusions(tmp_path):
    args = ["select", "--x", str(FIX / "table1_X.csv"), "--y", str(FIX / "table1_Y.csv")]
    assert run(args + ["--out", str(tmp_path), "--methods", "5-SCV"]) == 0
    rep = json.loads((tmp_path / "select_report.json").read_text())
    scores = [c["scores"]["5-SCV"] for c in rep["candidates"]]
    finite = [s for s in scores if s != "inf"]
    assert finite and all(isinstance(s, float) for s in finite)
    top = max((c["J"], c["r"]) for c in rep["candidates"])
    assert any(c["scores"]["5-SCV"] == "inf" for c in rep["candidates"] if (c["J"], c["r"]) == top)
    meta = rep["metadata"]
    assert meta["seed"] == 0 and meta["version"] == __version__ and meta["config"]["k_folds"] == 5
    text = (tmp_path / "select_report.json").read_text()
    assert text == json.dumps(json.loads(text), sort_keys=True, indent=2) + "\n"


def _write(path, lines):
    path.write_text("\n".join(lines) + "\n")
    return path


def test_malformed_csv_location(tmp_path, capsys):
    x = _write(tmp_path / "x.csv", ["a,b", "1,2", "3,oops"])
    y = _write(tmp_path / "y.csv", ["y", "1", "2"])
    assert run(["select", "--x", str(x), "--y", str(y), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "row 3, column 2" in err


@pytest.mark.parametrize("bad", ["nan", "inf", "-Infinity"])
def test_nonfinite_rejected(tmp_path, capsys, bad):
    x = _write(tmp_path / "x.csv", ["a,b", f"1,{bad}", "3,4"])
    y = _write(tmp_path / "y.csv", ["y", "1", "2"])
    assert run(["select", "--x", str(x), "--y", str(y), "--out", str(tmp_path)]) == 2
    assert "row 2, column 2" in capsys.readouterr().err


def test_missing_file_and_ragged_rows(tmp_path):
    assert run(["select", "--x", str(tmp_path / "nope.csv"), "--y", str(tmp_path / "nope.csv")]) == 2
    x = _write(tmp_path / "x.csv", ["a,b", "1,2,3"])
    y = _write(tmp_path / "y.csv", ["y", "1"])
    assert run(["select", "--x", str(x), "--y", str(y), "--out", str(tmp_path)]) == 2


def test_coefficient_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    M = rng.standard_normal((7, 3)) * 10.0 ** rng.integers(-300, 300, size=(7, 3))
    path = tmp_path / "m.csv"
    write_matrix_csv(path, M, ["a", "b", "c"])
    header, back = read_matrix_csv(path)
    assert header == ["a", "b", "c"]
    assert np.array_equal(back, M)


def test_usage_errors(capsys):
    assert run(["bogus"]) == 64
    assert run([]) == 64
    assert run(["select", "--k-folds", "1"]) == 64
    assert run(["select", "--alpha1", "-3"]) == 64
    assert run(["select", "--methods", "LOOCV"]) == 64
    assert run(["select"]) == 64


def test_identity_command(tmp_path):
    assert run(["identity", "--reps", "5000", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "identity_report.json").read_text())
    assert rep["passed"] is True
    assert abs(rep["empirical_gap"] - rep["D_formula"]) <= 4 * rep["mc_std_err"]
    assert rep["D_formula"] == pytest.approx(8.8 / 3.8 * 3)


def test_simulate_single_rep(tmp_path):
    args = ["simulate", "--reps", "1", "--n", "30", "--p", "8", "--m", "2", "--j-true", "2", "--r-true", "1"]
    assert run(args + ["--methods", "PIC", "--out", str(tmp_path), "--no-timing"]) == 0
    with open(tmp_path / "simulate_log.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert list(rows[0]) == ["rep", "method", "J_hat", "r_hat", "mse", "m_rate", "fa_rate", "runtime_ms"]
    first = (tmp_path / "simulate_report.json").read_text()
    assert run(args + ["--methods", "PIC", "--out", str(tmp_path), "--no-timing"]) == 0
    assert (tmp_path / "simulate_report.json").read_text() == first


def test_audit_and_bootstrap_commands(tmp_path):
    assert run(["audit", "--out", str(tmp_path), "--n-lambda", "8"]) == 0
    with open(tmp_path / "audit.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 8 and list(rows[0]) == ["lambda", "min_card", "med_card", "max_card"]
    args = ["bootstrap", "--x", str(FIX / "toy_X.csv"), "--y", str(FIX / "toy_Y.csv"), "--reps", "2"]
    assert run(args + ["--methods", "PIC", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "bootstrap_report.json").read_text())
    assert rep["methods"]["PIC"]["requested"] == 2
