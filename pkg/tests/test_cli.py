import csv
import subprocess
import sys

import pytest

from dgan import cli
from dgan import config as C

TINY = """
num_devices = 3
model.gen_hidden = 8
model.disc_hidden = 8
train.m_k = 16
train.M = 16
train.n_d = 2
train.n_g = 2
data.points_per_device = 40
data.heldout_points = 100
run.max_rounds = 5
run.eval_every = 2
run.eval_samples = 100
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "tiny.cfg"
    p.write_text(TINY)
    return p


def read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_run_writes_all_outputs(cfg_path, tmp_path):
    out = tmp_path / "run"
    assert cli.main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
    for name in ("rounds.csv", "summary.csv", "samples.csv", "config.resolved"):
        assert (out / name).exists()
    rounds = read(out / "rounds.csv")
    assert len(rounds) == 5
    assert list(rounds[0]) == cli.ROUND_COLUMNS
    assert len(read(out / "samples.csv")) == 100
    assert C.parse_config(out / "config.resolved") == C.parse_config(cfg_path)


def test_rounds_csv_is_byte_identical(cfg_path, tmp_path):
    cli.main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "a")])
    cli.main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "rounds.csv").read_bytes() == (tmp_path / "b" / "rounds.csv").read_bytes()


def test_summary_bits_equal_column_sums(cfg_path, tmp_path):
    cli.main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "r")])
    rounds = read(tmp_path / "r" / "rounds.csv")
    (summary,) = read(tmp_path / "r" / "summary.csv")
    up = sum(int(r["uplink_bits"]) for r in rounds)
    down = sum(int(r["downlink_bits"]) for r in rounds)
    assert int(summary["total_uplink_bits"]) == up
    assert int(summary["total_downlink_bits"]) == down
    assert int(summary["total_bits"]) == up + down
    assert float(summary["total_sim_time_s"]) == float(rounds[-1]["cumulative_sim_time_s"])


def test_compare_emits_one_row_per_pair(cfg_path, tmp_path):
    out = tmp_path / "cmp"
    code = cli.main(["compare", "--config", str(cfg_path), "--seeds", "0,1", "--out", str(out), "--jobs", "2"])
    assert code == 0
    rows = read(out / "comparison.csv")
    assert [(r["framework"], r["master_seed"]) for r in rows] == [
        ("proposed_serial", "0"), ("fedgan", "0"), ("proposed_serial", "1"), ("fedgan", "1"),
    ]
    assert all(r["status"] == "ok" for r in rows)
    assert (out / "fedgan_seed1" / "rounds.csv").exists()


def test_compare_is_independent_of_process_count(cfg_path, tmp_path):
    cli.main(["compare", "--config", str(cfg_path), "--seeds", "3", "--out", str(tmp_path / "one")])
    cli.main(["compare", "--config", str(cfg_path), "--seeds", "3", "--out", str(tmp_path / "two"), "--jobs", "2"])
    for d in ("proposed_serial_seed3", "fedgan_seed3"):
        assert (tmp_path / "one" / d / "rounds.csv").read_bytes() == (tmp_path / "two" / d / "rounds.csv").read_bytes()
    assert (tmp_path / "one" / "comparison.csv").read_bytes() == (tmp_path / "two" / "comparison.csv").read_bytes()


def test_sweep_ratio(cfg_path, tmp_path):
    out = tmp_path / "sw"
    code = cli.main(["sweep", "--config", str(cfg_path), "--axis", "scheduler.ratio", "--values", "0.2,0.5,1.0",
                     "--out", str(out)])
    assert code == 0
    rows = read(out / "sweep.csv")
    assert [r["scheduler.ratio"] for r in rows] == ["0.2", "0.5", "1.0"]
    for v in ("0.2", "0.5", "1.0"):
        assert (out / f"scheduler.ratio={v}" / "rounds.csv").exists()


def test_sweep_num_devices(cfg_path, tmp_path):
    out = tmp_path / "swk"
    assert cli.main(["sweep", "--config", str(cfg_path), "--axis", "num_devices", "--values", "1,5,10",
                     "--out", str(out)]) == 0
    assert len(read(out / "sweep.csv")) == 3


@pytest.mark.parametrize("axis,values", [("scheduler.ratio", ""), ("no.such.field", "1")])
def test_sweep_errors(cfg_path, tmp_path, axis, values, capsys):
    code = cli.main(["sweep", "--config", str(cfg_path), "--axis", axis, "--values", values,
                     "--out", str(tmp_path / "x")])
    assert code == 1
    assert "config error" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("scheduler.ratio = 1.5\n")
    assert cli.main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "scheduler.ratio" in capsys.readouterr().err


def test_seed_env_override(cfg_path, monkeypatch):
    monkeypatch.setenv("DGAN_SEED", "42")
    assert cli.load_config(str(cfg_path)).run.master_seed == 42


def test_divergence_exit_code(cfg_path, tmp_path):
    cfg = C.override(C.parse_config(cfg_path), "train.eta_d", "1e300")
    cfg = C.override(cfg, "train.eta_g", "1e300")
    import numpy as np

    with np.errstate(all="ignore"):
        assert cli.run(cfg, tmp_path / "div") == 2
    assert "round" in (tmp_path / "div" / "FAILED").read_text()


def test_fmt():
    assert cli.fmt(0.1) == "0.10000000000000001"
    assert cli.fmt((1, 2)) == "1;2"
    assert cli.fmt(None) == ""
    assert cli.fmt(True) == "1"


def test_gradcheck_subcommand(capsys):
    assert cli.main(["gradcheck", "--cases", "5"]) == 0
    out = capsys.readouterr().out
    assert "grad_theta" in out and "grad_phi" in out


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "dgan", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "selftest" in proc.stdout


def test_selftest_subcommand(capsys):
    assert cli.main(["selftest"]) == 0
    assert "FAIL" not in capsys.readouterr().out
