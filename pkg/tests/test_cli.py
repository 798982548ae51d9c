import json
import math
import os
import subprocess
import sys

import pytest

from rdelab.cli import SCHEMAS, ConfigError, resolve_config, run
from rdelab.rde import Block, CutoffSchedule
from rdelab.measure import INF


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


# -- configuration -------------------------------------------------------------------

def test_defaults_are_explicit():
    cfg = resolve_config("solve-cavity")
    assert set(cfg) == set(SCHEMAS["solve-cavity"])
    assert cfg["tol"] == 1e-8 and cfg["seed"] == 0


def test_layering_order(tmp_path):
    toml = tmp_path / "c.toml"
    toml.write_text('seed = 3\n[solve-cavity]\nq = 1.5\nk = 2\n')
    cfg = resolve_config("solve-cavity", str(toml), {"k": "3"}, ["seed=9"])
    assert (cfg["q"], cfg["k"], cfg["seed"]) == (1.5, 3, 9)


@pytest.mark.parametrize("overrides", [["nope=1"], ["k=abc"], ["k"]])
def test_bad_overrides(overrides):
    with pytest.raises(ConfigError):
        resolve_config("solve-cavity", overrides=overrides)


def test_config_for_other_command(tmp_path):
    toml = tmp_path / "c.toml"
    toml.write_text('command = "cascade"\n')
    with pytest.raises(ConfigError):
        resolve_config("solve-cavity", str(toml))


# -- exit codes and artifacts ------------------------------------------------------------

FAST_DRIFT = ["critical-drift", "--sigma", "0", "--tol-s", "0.01", "--samples", "2000"]


def test_run_writes_artifact(tmp_path):
    out = tmp_path / "drift.json"
    assert run(FAST_DRIFT + ["--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["command"] == "critical-drift" and doc["pass"] is True
    assert doc["config"]["tol_s"] == 0.01 and doc["seed"] == 0
    assert doc["result"]["s_critical"] == pytest.approx(-math.log(2), abs=0.02)


def test_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(FAST_DRIFT + ["--seed", "5", "--out", str(a)]) == 0
    assert run(FAST_DRIFT + ["--seed", "5", "--out", str(b)]) == 0
    assert read(a) == read(b)


@pytest.mark.parametrize("argv", [
    ["solve-cavity", "--q", "abc"],
    ["solve-cavity", "--grid", "1,2"],
    ["solve-cavity", "--set", "bogus=1"],
    ["solve-cavity", "--q", "0.5"],
    ["critical-drift", "--bracket", "1"],
    ["endogeny", "--model", "diamond"],
    ["no-such-command"],
])
def test_config_errors_exit_2_without_artifacts(tmp_path, argv, capsys):
    out = tmp_path / "x.json"
    assert run(argv + ["--out", str(out)]) == 2
    assert not os.listdir(tmp_path)
    assert capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert run(["cascade", "--config", str(tmp_path / "none.toml")]) == 2


def test_solve_cavity_logistic(tmp_path):
    out = tmp_path / "cav.json"
    argv = ["solve-cavity", "--q", "1", "--k", "1", "--grid=-30,30,0.01", "--out", str(out)]
    assert run(argv) == 0
    doc = json.loads(out.read_text())
    assert doc["result"]["logistic_residual_sup"] <= 1e-3
    assert doc["config"]["grid"] == "-30,30,0.01"
    csv = (tmp_path / "cav.csv").read_text().splitlines()
    assert csv[0] == "x,f" and len(csv) == 6002


def test_endogeny_negative_control(tmp_path):
    sched = CutoffSchedule([Block([INF] * 4), Block([INF] * 4)], [0.4, 0.2], [0.1, 0.05])
    path = tmp_path / "s.json"
    path.write_text(sched.to_json())
    out = tmp_path / "rep.json"
    argv = ["endogeny", "--model", "diamond", "--schedule", str(path), "--trees", "10",
            "--pool", "1000", "--out", str(out)]
    assert run(argv) == 1
    doc = json.loads(out.read_text())
    assert doc["pass"] is False and doc["result"]["checks"]["ii_law"]["pass"] is False


def test_module_entry_point(tmp_path):
    out = tmp_path / "d.json"
    env = dict(os.environ, RDE_LAB_THREADS="1")
    res = subprocess.run([sys.executable, "-m", "rdelab"] + FAST_DRIFT + ["--out", str(out)],
                         env=env, capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert json.loads(out.read_text())["pass"] is True
