import os
import subprocess
import sys

import pytest

from crowdwise import io
from crowdwise.cli import main

CONFIG = """\
n_agents = 20
log_mean = -3
log_variance = 0.72
seed = 7
log_truth = -2.9
alpha = 0.5
beta = 0.5
noise_d = 1e-3
dt = 0.01
steps_total = 50
record_every = 25
"""

SWEEP = """\
n_agents = 20
log_mean = -3
log_variance = 0.72
seed = 7
log_truth = -2.9
noise_d = 1e-3
dt = 0.01
steps_total = 50
alpha_values = 0, 1
beta_values = 0.5, 1
master_seed = 3
replicates = 2
"""


@pytest.fixture
def config(tmp_path):
    def write(text, name="run.cfg"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return write


def test_simulate_to_file(config, tmp_path, capsys):
    out = tmp_path / "ts.csv"
    assert main(["simulate", "--config", config(CONFIG), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(io.TIMESERIES_HEADER)
    assert len(lines) == 4
    assert capsys.readouterr().out == ""


def test_simulate_to_stdout_and_seed_override(config, capsys):
    path = config(CONFIG)
    assert main(["simulate", "--config", path]) == 0
    first = capsys.readouterr().out
    assert main(["simulate", "--config", path, "--seed", "8"]) == 0
    other = capsys.readouterr().out
    assert first.splitlines()[0] == other.splitlines()[0]
    assert first != other


def test_output_path_from_config(config, tmp_path):
    out = tmp_path / "from_cfg.csv"
    assert main(["sample", "--config", config(CONFIG + f"output_path = {out}\n")]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "opinion" and len(lines) == 21


def test_sweep_output(config, tmp_path):
    out = tmp_path / "hm.csv"
    assert main(["sweep", "--config", config(SWEEP), "--out", str(out), "--workers", "2"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(io.HEATMAP_HEADER)
    assert [ln.split(",")[:2] for ln in lines[1:]] == [["0", "0.5"], ["0", "1"], ["1", "0.5"], ["1", "1"]]


def test_workers_env_fallback(config, tmp_path, monkeypatch):
    path = config(SWEEP)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    monkeypatch.setenv("CROWDWISE_WORKERS", "3")
    assert main(["sweep", "--config", path, "--out", str(a)]) == 0
    monkeypatch.setenv("CROWDWISE_WORKERS", "zero")
    assert main(["sweep", "--config", path, "--out", str(b)]) == 2
    assert not b.exists()
    assert main(["sweep", "--config", path, "--out", str(b), "--workers", "1"]) == 0
    assert a.read_bytes() == b.read_bytes()


def _one_line_error(capsys):
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and err.startswith("crowdwise")
    return err


def test_config_error_exit_code(config, tmp_path, capsys):
    out = tmp_path / "never.csv"
    path = config("dt = 0.6\nalpha = 1\nbeta = 1\n")
    assert main(["simulate", "--config", path, "--out", str(out)]) == 2
    assert "1.2 > 1" in _one_line_error(capsys)
    assert not out.exists()


def test_missing_config_file(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "nope.cfg")]) == 1
    _one_line_error(capsys)


def test_usage_error_is_one_line(capsys):
    with pytest.raises(SystemExit) as info:
        main(["simulate"])
    assert info.value.code == 2
    _one_line_error(capsys)


def test_positivity_failure_leaves_no_file(config, tmp_path, capsys):
    out = tmp_path / "ts.csv"
    text = CONFIG.replace("noise_d = 1e-3", "noise_d = 1").replace("steps_total = 50", "steps_total = 3000")
    assert main(["simulate", "--config", config(text), "--out", str(out)]) == 1
    assert "non-positive" in _one_line_error(capsys)
    assert list(tmp_path.iterdir()) == [tmp_path / "run.cfg"]


def test_module_entry_point(config, tmp_path):
    out = tmp_path / "pop.csv"
    env = dict(os.environ)
    proc = subprocess.run([sys.executable, "-m", "crowdwise", "sample", "--config", config(CONFIG),
                           "--out", str(out)], capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    assert out.read_text().startswith("opinion\n")
