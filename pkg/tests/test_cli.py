import subprocess
import sys

import numpy as np
import pytest

from semslam.cli import main


def test_evaluate_identical(tmp_path, capsys):
    p = tmp_path / "p.txt"
    p.write_text("1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 1 0 1 0 0 0 0 1 0\n")
    assert main(["evaluate", "--est", str(p), "--gt", str(p)]) == 0
    assert capsys.readouterr().out.strip() == "0.000000"


def test_threshold_table_row(capsys):
    assert main(["threshold-table", "--intrinsics", "718,320,240", "--d", "250", "--l-range", "0:2:0.5"]) == 0
    rows = capsys.readouterr().out.split()
    assert rows[0] == "l,T" and rows[-1] == "2.0,1.587302" and len(rows) == 6


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        main(["evaluate", "--bogus"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 1
    assert main(["threshold-table", "--intrinsics", "1,2", "--l-range", "0:1:1"]) == 1


def test_data_error_exit_code(tmp_path):
    assert main(["evaluate", "--est", str(tmp_path / "a"), "--gt", str(tmp_path / "b")]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("1 0 0\n")
    assert main(["evaluate", "--est", str(bad), "--gt", str(bad)]) == 2


def test_plane_fit(tmp_path, capsys):
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.uniform(-5, 5, 60), np.full(60, 1.7), rng.uniform(-5, 5, 60)])
    f = tmp_path / "pts.txt"
    np.savetxt(f, pts)
    assert main(["plane-fit", "--points", str(f), "--seed", "3"]) == 0
    out = capsys.readouterr().out.splitlines()
    n = [float(x) for x in out[0].split()[1:]]
    assert np.allclose(np.abs(n), [0, 1, 0], atol=1e-9)
    assert float(out[1].split()[1]) == pytest.approx(1.7, abs=1e-9)


def test_simulate_run_evaluate(tmp_path, capsys):
    ini = tmp_path / "sim.ini"
    ini.write_text("n_frames = 40\nn_cars = 3\n")
    ds = tmp_path / "ds"
    assert main(["simulate", "--config", str(ini), "--out", str(ds), "--drift-sigma", "0.01", "--seed", "4"]) == 0
    for name in ("poses_est.txt", "poses_gt.txt", "config.ini"):
        assert (ds / name).exists()
    out = tmp_path / "out"
    assert main(["run", "--dataset", str(ds), "--out", str(out)]) == 0
    for name in ("report.csv", "timing.csv", "trajectory_est.txt", "trajectory_gt.txt", "trajectory.svg"):
        assert (out / name).exists()
    capsys.readouterr()
    assert main(["evaluate", "--est", str(out / "trajectory_est.txt"), "--gt", str(out / "trajectory_gt.txt"),
                 "--frames", str(out / "trajectory_frames.txt")]) == 0
    assert float(capsys.readouterr().out) >= 0


def test_unknown_sim_key(tmp_path):
    ini = tmp_path / "sim.ini"
    ini.write_text("n_framez = 40\n")
    assert main(["simulate", "--config", str(ini), "--out", str(tmp_path / "x")]) == 1


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "semslam", "threshold-table", "--intrinsics", "718,320,240",
                        "--l-range", "2:2:1"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.splitlines()[1] == "2,1.587302"
