"""Command-line harness: demo collection, training runs, eval, plot data."""

import os

import pytest
from click.testing import CliRunner

from actpc import load_demos
from actpc.cli import main


def small_agent_yaml():
    return {
        "hidden": [10, 10],
        "activation": "tanh",
        "k_steps": 4,
        "batch_size": 6,
        "warmup_steps": 0,
        "replay_capacity": 500,
        "demo_capacity": 500,
        "actor_capacity": 500,
        "prior_epochs": 1,
    }


def write_config(tmp_path, **over):
    import yaml

    cfg = {
        "env": "line_world",
        "seeds": [0],
        "episodes": 2,
        "out_dir": str(tmp_path / "out"),
        "demo_path": str(tmp_path / "demos.jsonl"),
        "agent": small_agent_yaml(),
    }
    cfg.update(over)
    path = tmp_path / "run.yaml"
    with open(path, "w") as fh:
        yaml.safe_dump(cfg, fh)
    return path


@pytest.fixture()
def runner():
    return CliRunner()


def collect(runner, tmp_path, episodes=3):
    path = tmp_path / "demos.jsonl"
    result = runner.invoke(
        main,
        ["demo", "--env", "line_world", "--seed", "0",
         "--episodes", str(episodes), "--out", str(path)],
    )
    assert result.exit_code == 0, result.output
    return path


class TestDemo:
    def test_writes_requested_successful_episodes(self, runner, tmp_path):
        path = collect(runner, tmp_path, 3)
        episodes = load_demos(path)
        assert len(episodes) == 3
        for ep in episodes:
            assert sum(tr.sparse_r for tr in ep) >= 1.0

    def test_zero_episodes_gives_empty_valid_file(self, runner, tmp_path):
        path = collect(runner, tmp_path, 0)
        assert load_demos(path) == []

    def test_same_seed_identical_bytes(self, runner, tmp_path):
        p1 = tmp_path / "a.jsonl"
        p2 = tmp_path / "b.jsonl"
        for p in (p1, p2):
            result = runner.invoke(
                main, ["demo", "--env", "line_world", "--seed", "3",
                       "--episodes", "3", "--out", str(p)]
            )
            assert result.exit_code == 0
        assert p1.read_bytes() == p2.read_bytes()

    def test_starvation_errors_out(self, runner, tmp_path):
        # 1-step cap: the expert cannot reach the goal, ever
        result = runner.invoke(
            main, ["demo", "--env", "line_world", "--seed", "0", "--episodes", "2",
                   "--out", str(tmp_path / "x.jsonl"), "--max-len", "1"]
        )
        assert result.exit_code != 0
        assert "starved" in result.output


class TestTrain:
    def test_zero_episodes_succeeds_with_empty_logs(self, runner, tmp_path):
        collect(runner, tmp_path)
        cfg = write_config(tmp_path, episodes=0)
        result = runner.invoke(main, ["train", "--config", str(cfg)])
        assert result.exit_code == 0, result.output
        out = tmp_path / "out"
        lines = (out / "episodes.csv").read_text().splitlines()
        assert len(lines) == 1  # header only
        assert (out / "resolved_config.yaml").exists()

    def test_full_run_writes_all_artifacts(self, runner, tmp_path):
        collect(runner, tmp_path)
        cfg = write_config(tmp_path)
        result = runner.invoke(main, ["train", "--config", str(cfg)])
        assert result.exit_code == 0, result.output
        out = tmp_path / "out"
        for name in (
            "episodes.csv",
            "episodes_seed0.csv",
            "steps_seed0.jsonl",
            "summary.csv",
            "checkpoint_seed0.bin",
            "resolved_config.yaml",
        ):
            assert (out / name).exists(), name
        header = (out / "episodes.csv").read_text().splitlines()[0]
        assert header == (
            "episode,seed,sparse_return,combined_return,success,"
            "r_ep_mean,r_in_mean,tod_gen_mean,steps"
        )

    def test_repeat_run_is_byte_identical(self, runner, tmp_path):
        collect(runner, tmp_path)
        contents = []
        for sub in ("o1", "o2"):
            cfg = write_config(tmp_path, out_dir=str(tmp_path / sub))
            result = runner.invoke(main, ["train", "--config", str(cfg)])
            assert result.exit_code == 0, result.output
            contents.append((tmp_path / sub / "episodes.csv").read_bytes())
        assert contents[0] == contents[1]

    def test_missing_demo_file_fails_cleanly(self, runner, tmp_path):
        cfg = write_config(tmp_path, demo_path=str(tmp_path / "absent.jsonl"))
        result = runner.invoke(main, ["train", "--config", str(cfg)])
        assert result.exit_code != 0
        assert "demo" in result.output

    def test_flag_overrides_config_file(self, runner, tmp_path):
        collect(runner, tmp_path)
        cfg = write_config(tmp_path, episodes=5)
        result = runner.invoke(
            main, ["train", "--config", str(cfg), "--episodes", "1"]
        )
        assert result.exit_code == 0, result.output
        lines = (tmp_path / "out" / "episodes.csv").read_text().splitlines()
        assert len(lines) == 2

    def test_unknown_config_key_rejected(self, runner, tmp_path):
        import yaml

        path = tmp_path / "bad.yaml"
        with open(path, "w") as fh:
            yaml.safe_dump({"envv": "line_world"}, fh)
        result = runner.invoke(main, ["train", "--config", str(path)])
        assert result.exit_code != 0


class TestEvalCommand:
    def _train(self, runner, tmp_path):
        collect(runner, tmp_path)
        cfg = write_config(tmp_path)
        result = runner.invoke(main, ["train", "--config", str(cfg)])
        assert result.exit_code == 0, result.output
        return tmp_path / "out" / "checkpoint_seed0.bin"

    def test_eval_twice_identical_summary(self, runner, tmp_path):
        ckpt = self._train(runner, tmp_path)
        outputs = []
        for _ in range(2):
            result = runner.invoke(
                main, ["eval", "--checkpoint", str(ckpt), "--env", "line_world",
                       "--episodes", "3"]
            )
            assert result.exit_code == 0, result.output
            outputs.append(result.output)
        assert outputs[0] == outputs[1]

    def test_env_mismatch_is_reported(self, runner, tmp_path):
        ckpt = self._train(runner, tmp_path)
        result = runner.invoke(
            main, ["eval", "--checkpoint", str(ckpt), "--env", "reacher"]
        )
        assert result.exit_code != 0
        assert "dim" in result.output


class TestPlotData:
    def test_emits_rolling_means(self, runner, tmp_path):
        collect(runner, tmp_path)
        cfg = write_config(tmp_path, episodes=3)
        assert runner.invoke(main, ["train", "--config", str(cfg)]).exit_code == 0
        out_csv = tmp_path / "plot.csv"
        result = runner.invoke(
            main, ["plot-data", "--input", str(tmp_path / "out" / "episodes.csv"),
                   "--out", str(out_csv), "--window", "2"]
        )
        assert result.exit_code == 0, result.output
        lines = out_csv.read_text().splitlines()
        assert lines[0] == "episode,seed,rolling_mean_return"
        assert len(lines) == 4
