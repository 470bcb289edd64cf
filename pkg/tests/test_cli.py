import os

import pytest

from qmhd.cli import main
from qmhd.snapshots import read_snapshot

RUN_CFG = """
[grid]
points = 32
modes = 6
[physics]
kappa = 0.05
[regularization]
epsilon = 0.01
dt = 0.001
t_end = 0.005
picard_tol = 1e-11
[initial]
benchmark = density_bump
[output]
directory = {out}
snapshot_every = 5
diagnostics_every = 1
"""

SWEEP_MANIFEST = """
[sweep]
parameter = kappa
values = 0.1, 0.05, 0
benchmark = density_bump
dim = 1
points = 32
modes = 6
t_end = 0.004
output = {out}
[regularization]
dt = 0.001
picard_tol = 1e-11
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_run_subcommand_and_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = _write(tmp_path, "run.cfg", RUN_CFG.format(out=out))
    assert main(["run", cfg]) == 0
    captured = capsys.readouterr().out
    assert "finished at t=" in captured
    assert (out / "diagnostics.csv").exists()
    assert (out / "config_echo.cfg").exists()
    assert (out / "rho_final.qmhd").exists()
    field, t = read_snapshot(out / "rho_final.qmhd")
    assert t == pytest.approx(0.005)
    # snapshots at the configured cadence
    assert (out / "rho_00000000.qmhd").exists()
    assert (out / "rho_00000005.qmhd").exists()


def test_run_deterministic_outputs(tmp_path):
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    cfg1 = _write(tmp_path, "r1.cfg", RUN_CFG.format(out=out1))
    cfg2 = _write(tmp_path, "r2.cfg", RUN_CFG.format(out=out2))
    assert main(["run", cfg1]) == 0
    assert main(["run", cfg2]) == 0
    for name in ("diagnostics.csv", "rho_final.qmhd", "velocity_final.qmhd", "magnetic_final.qmhd"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_run_usage_error_t_end_before_t0(tmp_path):
    # start from a snapshot whose header time exceeds t_end
    out = tmp_path / "out"
    cfg = _write(tmp_path, "seed.cfg", RUN_CFG.format(out=out))
    assert main(["run", cfg]) == 0
    later = RUN_CFG.format(out=tmp_path / "out2").replace("t_end = 0.005", "t_end = 0.004") + (
        "[initial]\n"
        f"rho_path = {out}/rho_final.qmhd\n"
        f"velocity_path = {out}/velocity_final.qmhd\n"
        f"magnetic_path = {out}/magnetic_final.qmhd\n"
    )
    cfg2 = _write(tmp_path, "late.cfg", later)
    assert main(["run", cfg2]) == 1


def test_bad_config_exit_code(tmp_path):
    cfg = _write(tmp_path, "bad.cfg", "[grid]\npoints = 32\nbogus = 1\n")
    assert main(["check", cfg]) == 2
    assert main(["run", cfg]) == 2


def test_usage_exit_code():
    assert main(["frobnicate"]) == 1


def test_check_passes_on_default_config(tmp_path, capsys):
    cfg = _write(tmp_path, "chk.cfg", "[grid]\npoints = 32\nmodes = 6\n")
    assert main(["check", cfg]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_inspect_reports_writer_side_norms(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = _write(tmp_path, "run.cfg", RUN_CFG.format(out=out))
    assert main(["run", cfg]) == 0
    field, _ = read_snapshot(out / "rho_final.qmhd")
    from qmhd.fields import l2_norm

    assert main(["inspect", str(out / "rho_final.qmhd")]) == 0
    text = capsys.readouterr().out
    assert repr(l2_norm(field)) in text
    assert "scalar" in text


def test_inspect_missing_file_is_io_error(tmp_path):
    assert main(["inspect", str(tmp_path / "missing.qmhd")]) == 4


def test_sweep_subcommand(tmp_path, capsys):
    out = tmp_path / "sweep_out"
    manifest = _write(tmp_path, "sweep.cfg", SWEEP_MANIFEST.format(out=out))
    assert main(["sweep", manifest]) == 0
    assert (out / "sweep_results.csv").exists()
    text = (out / "sweep_manifest.txt").read_text()
    assert "sha256" in text
    # determinism: repeat into a second directory, bitwise-equal results
    out2 = tmp_path / "sweep_out2"
    manifest2 = _write(tmp_path, "sweep2.cfg", SWEEP_MANIFEST.format(out=out2))
    assert main(["sweep", manifest2]) == 0
    assert (out / "sweep_results.csv").read_bytes() == (out2 / "sweep_results.csv").read_bytes()


def test_threads_env_override(tmp_path, monkeypatch):
    cfg = _write(tmp_path, "chk.cfg", "[grid]\npoints = 32\nmodes = 6\n")
    monkeypatch.setenv("QMHD_THREADS", "2")
    assert main(["check", cfg]) == 0
    assert os.environ["OMP_NUM_THREADS"] == "2"
    monkeypatch.setenv("QMHD_THREADS", "bogus")
    assert main(["check", cfg]) == 1


def test_numerical_failure_exit_code(tmp_path):
    cfg = _write(
        tmp_path,
        "blow.cfg",
        RUN_CFG.format(out=tmp_path / "o") + "\n[determinism]\nseed = 0\n",
    )
    text = cfg and (tmp_path / "blow.cfg").read_text().replace("dt = 0.001", "dt = 5.0").replace(
        "t_end = 0.005", "t_end = 10.0"
    ).replace("picard_tol = 1e-11", "picard_tol = 1e-11\npicard_max_iters = 10")
    (tmp_path / "blow.cfg").write_text(text)
    assert main(["run", str(tmp_path / "blow.cfg")]) == 3
