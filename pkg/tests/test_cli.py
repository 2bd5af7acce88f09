"""CLI: argument handling, exit codes, and produced files."""

import subprocess
import sys

import pytest

from evoportfolio.cli import main

GOOD = """
[experiment]
env = "delayedchain"
seeds = [5]
max_env_steps = 220
out_dir = "run"
champion_episodes = 2
max_episode_steps = 25

[portfolio]
gammas = [0.9, 0.99]
b = 4
batch_size = 32
buffer_capacity = 2000

[evolution]
k = 4
elites = 1

[network]
hidden = [8, 8]
"""


@pytest.fixture()
def out_root(tmp_path, monkeypatch):
    monkeypatch.setenv("EVOPORTFOLIO_OUT", str(tmp_path))
    return tmp_path


def write_cfg(tmp_path, text=GOOD):
    p = tmp_path / "run.toml"
    p.write_text(text)
    return p


def test_validate_ok(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["validate", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "OK" in out
    assert 'env = "delayedchain"' in out
    assert "gammas = [0.9, 0.99]" in out  # resolved snapshot is echoed


def test_validate_bad_config_exits_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "[evolution]\nk = 1\n")
    assert main(["validate", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "evolution.k" in err


def test_missing_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_run_plot_round_trip(tmp_path, out_root, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["run", "--config", str(cfg), "--quiet"]) == 0
    out = capsys.readouterr().out
    assert "seed 5:" in out and "wrote" in out
    run_dir = out_root / "run"
    assert (run_dir / "seed_5" / "metrics.csv").is_file()

    assert main(["plot", str(run_dir)]) == 0
    out = capsys.readouterr().out
    assert (run_dir / "champion.svg").is_file()
    assert (run_dir / "allocation.svg").is_file()
    assert "champion.svg" in out


def test_run_seed_override(tmp_path, out_root, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["run", "--config", str(cfg), "--seed", "9",
                 "--workers", "2", "--quiet"]) == 0
    assert (out_root / "run" / "seed_9" / "metrics.csv").is_file()
    assert not (out_root / "run" / "seed_5").exists()


def test_run_progress_lines(tmp_path, out_root, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["run", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "gen" in out and "champion" in out


def test_plot_missing_dir_exits_2(tmp_path, capsys):
    assert main(["plot", str(tmp_path / "nope")]) == 2
    assert "no seed" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    cfg = write_cfg(tmp_path)
    proc = subprocess.run(
        [sys.executable, "-m", "evoportfolio", "validate", "--config", str(cfg)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "OK" in proc.stdout
