import math
import os

import numpy as np
import pytest

from diqkd_xy.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def read_body(path):
    with open(path) as fh:
        return [ln for ln in fh if not ln.startswith("#")]


def test_bound_chsh_point(capsys):
    code, out, _ = run_cli(capsys, "bound", "1.41421356", "1.41421356")
    assert code == 0
    assert "H(A0|E) >= 1.000000" in out
    assert "method=analytic" in out


def test_bound_easy_point(capsys):
    code, out, _ = run_cli(capsys, "bound", "1.8", "0.6")
    assert code == 0
    # 1 - h(z) at z = (0.6/sqrt(0.76) + 1)/2 = 0.84412
    assert "H(A0|E) >= 0.375647" in out


def test_bound_validation_exit_code(capsys):
    code, _, err = run_cli(capsys, "bound", "1.9", "1.9")
    assert code == 2
    assert "quantum" in err.lower() or "exceeds" in err.lower()


def test_bound_rejects_q_and_p(capsys):
    code = main(["bound", "1.2", "1.2", "--q", "0.9", "--p", "0.1"])
    assert code == 2


def test_bound_p_flag(capsys):
    # --p 0.1 is q = 0.64
    code, out_p, _ = run_cli(capsys, "bound", "1.6", "0.9", "--p", "0.1")
    assert code == 0
    code, out_q, _ = run_cli(capsys, "bound", "1.6", "0.9", "--q", "0.64")
    assert code == 0
    assert out_p.split("method")[0] == out_q.split("method")[0]
    assert "q=0.64" in out_p


def test_sweep_csv(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code, _, _ = run_cli(capsys, "sweep", "--step", "0.2", "--out", str(out))
    assert code == 0
    body = read_body(out)
    header = body[0].strip().split(",")
    assert header == ["X", "Y", "bound_xy", "bound_chsh", "advantage"]
    rows = [list(map(float, ln.split(","))) for ln in body[1:]]
    assert rows
    for X, Y, bxy, bchsh, adv in rows:
        assert X + Y > 2.0 and X * X + Y * Y <= 4.0 + 1e-12
        assert adv >= -1e-9
        assert abs(adv - (bxy - bchsh)) < 1e-15
    # re-run is byte-identical in the body
    out2 = tmp_path / "sweep2.csv"
    run_cli(capsys, "sweep", "--step", "0.2", "--out", str(out2))
    assert read_body(out) == read_body(out2)


def test_sweep_step_validation(tmp_path, capsys):
    code, _, _ = run_cli(capsys, "sweep", "--step", "0.5", "--out", str(tmp_path / "x.csv"))
    assert code == 2


def test_sweep_io_error(capsys):
    code, _, _ = run_cli(capsys, "sweep", "--step", "0.2", "--out", "/nonexistent-dir/x.csv")
    assert code == 4


def test_certify_cli_chsh_point(tmp_path, capsys):
    out = tmp_path / "cert.txt"
    code, text, _ = run_cli(
        capsys, "certify", "1.41421356", "1.41421356",
        "--precision", "0.02", "--out", str(out),
    )
    assert code == 0
    assert "certified H(A0|E) >=" in text
    val = float(text.rsplit(">=", 1)[1])
    assert val >= 0.97
    assert out.exists() and "upper_bound_f" in out.read_text()


def test_thresholds_single_method(tmp_path, capsys):
    out = tmp_path / "thr.csv"
    code, text, _ = run_cli(
        capsys, "thresholds", "--model", "singlet",
        "--methods", "chsh-qber", "--tol-eta", "0.004", "--out", str(out),
    )
    assert code == 0
    body = read_body(out)
    assert body[0].strip() == "method,eta_critical"
    name, val = body[1].strip().split(",")
    assert name == "chsh-qber"
    assert abs(float(val) - 0.923) <= 0.005 + 0.004


def test_keyrate_curve_csv(tmp_path, capsys):
    out = tmp_path / "curve.csv"
    code, _, _ = run_cli(
        capsys, "keyrate-curve", "--model", "singlet",
        "--eta-min", "0.96", "--eta-max", "1.0", "--eta-step", "0.02",
        "--starts", "4", "--out", str(out),
    )
    assert code == 0
    body = read_body(out)
    assert body[0].strip() == "eta,r_chsh,r_xy"
    rows = [list(map(float, ln.split(","))) for ln in body[1:]]
    assert len(rows) == 3
    for eta, r_chsh, r_xy in rows:
        assert r_xy >= r_chsh - 1e-9
    assert rows[-1][1] == pytest.approx(1.0, abs=1e-6)
