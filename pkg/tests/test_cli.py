import subprocess
import sys

import numpy as np
import pytest

from fbm_transforms import cli
from fbm_transforms.simulate import PathEnsemble
from fbm_transforms.special import ConvergenceError, hyp2f1_at_one


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def kv(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


def test_hyp_trivial(capsys):
    code, out, _ = run(capsys, "hyp", 0, 0.7, 1.3, -0.5)
    assert code == 0
    assert float(out) == 1.0


def test_hyp_closed_form(capsys):
    code, out, _ = run(capsys, "hyp", 0.4, 0.6, 0.6, 0.5)
    assert code == 0
    assert float(out) == pytest.approx(2**0.4, rel=1e-15)
    assert out.strip().startswith("1.3195079")
    assert len(out.strip().replace(".", "")) == 17


def test_hyp_gauss_value(capsys):
    code, out, _ = run(capsys, "hyp", 0.2, 0.3, 1.0, 1.0)
    assert code == 0
    assert float(out) == pytest.approx(hyp2f1_at_one(0.2, 0.3, 1.0), rel=1e-15)


def test_domain_error_exit_code(capsys):
    code, _, err = run(capsys, "hyp", 0.3, 0.2, 1.1, 1.5)
    assert code == 2
    assert "domain error" in err
    code, _, _ = run(capsys, "bounds", "--hurst-h", 1.2)
    assert code == 2


def test_convergence_error_exit_code(capsys, monkeypatch):
    def boom(*a, **k):
        raise ConvergenceError("no convergence")

    monkeypatch.setattr(cli, "hyp2f1", boom)
    code, _, err = run(capsys, "hyp", 0.1, 0.2, 0.3, 0.4)
    assert code == 3
    assert "convergence" in err


def test_io_error_exit_code(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", "--hurst-h", 0.5, "--steps", 4, "--paths", 2,
                       "--out", tmp_path / "missing" / "x.csv")
    assert code == 4
    assert "I/O error" in err
    code, _, _ = run(capsys, "covcheck", tmp_path / "nope.csv", "--hurst-h", 0.5)
    assert code == 4


def test_unknown_flag_and_help(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["hyp", "1", "2", "3", "0.1", "--bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["simulate", "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in ("--hurst-k", "--hurst-h", "--t", "--paths", "--seed", "--out", "--trunc-l"):
        assert flag in text


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "fbm_transforms", "hyp", "0", "0.7", "1.3",
                          "-0.5"], capture_output=True, text=True)
    assert res.returncode == 0
    assert float(res.stdout) == 1.0


def test_kernel_command(capsys):
    code, out, _ = run(capsys, "kernel", "--hurst-k", 0.5, "--hurst-h", 0.5, "--kind", "mg",
                       "--points", 0.25, 0.75)
    assert code == 0
    rows = [tuple(map(float, line.split(","))) for line in out.splitlines()]
    assert rows == [(0.25, 1.0), (0.75, 1.0)]


def test_simulate_is_byte_deterministic(capsys, tmp_path):
    paths = []
    for i in range(2):
        p = tmp_path / f"e{i}.csv"
        code, _, _ = run(capsys, "simulate", "--method", "exact", "--hurst-h", 0.5,
                         "--steps", 16, "--paths", 2, "--seed", 7, "--out", p)
        assert code == 0
        paths.append(p.read_bytes())
    assert paths[0] == paths[1]


def test_simulate_threads_do_not_change_output(capsys, tmp_path):
    blobs = []
    for threads in (1, 3):
        p = tmp_path / f"m{threads}.csv"
        code, _, _ = run(capsys, "simulate", "--method", "mvn", "--hurst-h", 0.7,
                         "--steps", 16, "--paths", 600, "--seed", 3, "--trunc-l", 4,
                         "--threads", threads, "--out", p)
        assert code == 0
        blobs.append(p.read_bytes())
    assert blobs[0] == blobs[1]


def test_mg_with_equal_indices_reproduces_driver(capsys, tmp_path):
    out, drv = tmp_path / "z.csv", tmp_path / "d.csv"
    code, _, _ = run(capsys, "simulate", "--method", "mg", "--hurst-k", 0.3, "--hurst-h", 0.3,
                     "--steps", 32, "--paths", 5, "--seed", 1, "--out", out,
                     "--driver-out", drv)
    assert code == 0
    z = PathEnsemble.from_csv(out)
    d = PathEnsemble.from_csv(drv)
    assert np.array_equal(z.paths, d.paths)


def test_mvn_then_covcheck_passes(capsys, tmp_path):
    p = tmp_path / "mvn.csv"
    code, out, _ = run(capsys, "simulate", "--method", "mvn", "--hurst-h", 0.7, "--steps", 32,
                       "--paths", 4000, "--seed", 11, "--trunc-l", 256, "--out", p)
    assert code == 0
    assert "truncation_bias=" in out
    code, out, _ = run(capsys, "covcheck", p, "--hurst-h", 0.7, "--times", 0.25, 0.5, 1.0)
    info = kv(out)
    assert code == 0
    assert info["pass"] == "true"
    assert float(info["max_abs_z"]) <= 5.0
    assert int(info["n_paths"]) == 4000


def test_covcheck_fails_for_wrong_hurst(capsys, tmp_path):
    p = tmp_path / "bm.csv"
    run(capsys, "simulate", "--method", "exact", "--hurst-h", 0.5, "--steps", 16,
        "--paths", 4000, "--seed", 2, "--out", p)
    code, out, _ = run(capsys, "covcheck", p, "--hurst-h", 0.9)
    assert code == 1
    assert kv(out)["pass"] == "false"


def test_converge_passes_for_half(capsys, tmp_path):
    code, out, _ = run(capsys, "converge", "--hurst-k", 0.5, "--hurst-h", 0.7, "--out", tmp_path)
    info = kv(out)
    assert code == 0
    assert abs(float(info["slope"]) - (2 * 0.7 - 2)) <= 0.15
    assert info["margins_ok"] == "true"
    lines = (tmp_path / "distance_curve.csv").read_text().splitlines()
    assert len(lines) == 7
    assert kv((tmp_path / "rate_summary.txt").read_text())["pass"] == "true"


def test_converge_degenerate(capsys, tmp_path):
    code, out, _ = run(capsys, "converge", "--hurst-k", 0.4, "--hurst-h", 0.4, "--out", tmp_path)
    assert code == 0
    assert "coincide" in out
    rows = (tmp_path / "distance_curve.csv").read_text().splitlines()[1:]
    assert all(float(r.split(",")[1]) == 0.0 for r in rows)


def test_converge_two_exponent_report(capsys, tmp_path):
    code, out, _ = run(capsys, "converge", "--hurst-k", 0.3, "--hurst-h", 0.6,
                       "--shifts", 8, 16, 32, 64, "--out", tmp_path)
    info = kv(out)
    assert code == 0
    assert float(info["secondary_exponent"]) == pytest.approx(2 * 0.3 - 2)
    assert float(info["target_exponent"]) == pytest.approx(2 * 0.6 - 2)


def test_converge_rejects_short_shift_list(capsys, tmp_path):
    code, _, _ = run(capsys, "converge", "--hurst-h", 0.7, "--shifts", 8, 16, "--out", tmp_path)
    assert code == 2


def test_bounds_command(capsys):
    code, out, _ = run(capsys, "bounds", "--hurst-k", 0.5, "--hurst-h", 0.7)
    info = kv(out)
    assert code == 0
    assert float(info["c1"]) > 0 and float(info["c2"]) > 0
    assert "c3" not in info
    assert float(info["valid_from_s"]) == 7.0
    code, out, _ = run(capsys, "bounds", "--hurst-k", 0.3, "--hurst-h", 0.6)
    info = kv(out)
    assert "c3" in info and "c4" in info and "c2" not in info
