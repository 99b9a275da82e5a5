import json
import re
import subprocess
import sys
from pathlib import Path

import numpy as np

from chcontrol import __version__
from chcontrol.cli import main
from chcontrol.io import read_field_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def variant(tmp_path, name, extra):
    """Copy a shipped config, overriding or adding ``key = value`` lines per section."""
    text = (CONFIGS / name).read_text()
    for section, body in extra.items():
        key = body.split("=")[0].strip()
        text = re.sub(rf"(?m)^{key}\s*=.*\n", "", text)
        if f"[{section}]" in text:
            text = text.replace(f"[{section}]", f"[{section}]\n{body}", 1)
        else:
            text += f"\n[{section}]\n{body}\n"
    path = tmp_path / ("v_" + name)
    path.write_text(text)
    return str(path)


def run(*args):
    return main([*map(str, args), "--quiet"])


def test_missing_key_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[geometry]\nmode = Interval1D\n[solver]\nT = 1\nnt = 2\n")
    assert run("forward", "--config", bad, "--out", tmp_path / "o") == 2
    assert "geometry.nx" in capsys.readouterr().err


def test_unknown_key_exits_2(tmp_path, capsys):
    cfg = variant(tmp_path, "stationary.ini", {"solver": "dt = 0.1"})
    assert run("forward", "--config", cfg, "--out", tmp_path / "o") == 2
    assert "solver.dt" in capsys.readouterr().err


def test_forward_stationary(tmp_path):
    out = tmp_path / "o"
    assert run("forward", "--config", CONFIGS / "stationary.ini", "--out", out) == 0
    assert np.all(read_field_csv(out / "final_state.csv") == 0.0)
    table = np.loadtxt(out / "trajectory.csv", delimiter=",", skiprows=1)
    assert np.all(table[:, 1:] == table[0, 1:])
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == 0 and man["command"] == "forward"
    assert man["versions"]["chcontrol"] == __version__
    assert (out / "config.ini").read_text() == (CONFIGS / "stationary.ini").read_text()
    assert len(list((out / "snapshots").glob("*.bin"))) == 17


def test_forward_is_deterministic(tmp_path):
    for k in (1, 2):
        assert run("forward", "--config", CONFIGS / "forward_log_strip.ini",
                   "--out", tmp_path / f"o{k}", "--seed", 7) == 0
    for name in ("trajectory.csv", "final_state.csv", "snapshots/y_00010.bin"):
        assert (tmp_path / "o1" / name).read_bytes() == (tmp_path / "o2" / name).read_bytes()
    assert run("forward", "--config", CONFIGS / "forward_log_strip.ini",
               "--out", tmp_path / "o3", "--seed", 8) == 0
    assert (tmp_path / "o1/final_state.csv").read_bytes() != (tmp_path / "o3/final_state.csv").read_bytes()


def test_gradcheck_passes_and_catches_corruption(tmp_path):
    assert run("gradcheck", "--config", CONFIGS / "gradcheck.ini", "--out", tmp_path / "a") == 0
    cfg = variant(tmp_path, "gradcheck.ini", {"verify": "corrupt_adjoint = 1e-3"})
    assert run("gradcheck", "--config", cfg, "--out", tmp_path / "b") == 1
    assert "FAIL" in (tmp_path / "b" / "report.md").read_text()


def test_gradcheck_zero_direction(tmp_path):
    cfg = variant(tmp_path, "gradcheck.ini", {"verify": "direction = zero"})
    assert run("gradcheck", "--config", cfg, "--out", tmp_path / "o") == 0


def test_optimize_pure_control(tmp_path):
    out = tmp_path / "o"
    assert run("optimize", "--config", CONFIGS / "pure_control.ini", "--out", out) == 0
    u = np.fromfile(out / "control.bin", dtype="<f8", offset=16)
    assert np.all(u == 0.0)
    log = (out / "optimization_log.csv").read_text().splitlines()
    assert log[0] == "iter,cost,stationarity,step,budget_active"


def test_optimize_without_iterations_is_flagged(tmp_path):
    cfg = variant(tmp_path, "pure_control.ini", {"optimizer": "max_iter = 0"})
    out = tmp_path / "o"
    assert run("optimize", "--config", cfg, "--out", out) == 1
    assert "converged: False" in (out / "report.md").read_text()
    assert len((out / "optimization_log.csv").read_text().splitlines()) == 2


def test_optimize_tracking_demo(tmp_path):
    out = tmp_path / "o"
    assert run("optimize", "--config", CONFIGS / "tracking_demo.ini", "--out", out) == 0
    report = (out / "report.md").read_text()
    assert "PASS" in report and "FAIL" not in report


def test_taylor_command(tmp_path):
    assert run("taylor", "--config", CONFIGS / "taylor.ini", "--out", tmp_path / "o") == 0
    assert (tmp_path / "o" / "taylor_remainder.csv").exists()


def test_verify_command(tmp_path):
    out = tmp_path / "o"
    assert run("verify", "--config", CONFIGS / "verify_strip.ini", "--out", out) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert {"taylor", "duality", "stability"} <= set(man["timings_s"])


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "chcontrol", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == __version__
    res = subprocess.run([sys.executable, "-m", "chcontrol", "forward", "--config",
                          str(tmp_path / "nope.ini")], capture_output=True, text=True)
    assert res.returncode == 2 and "config error" in res.stderr
