"""Command-line harness: train, eval, demo, plot-data.

All runs echo the fully resolved configuration next to their outputs, and
given the same config and seed they write byte-identical files.
"""

from __future__ import annotations

import csv
import json
import os
import sys

import click
import numpy as np
import yaml

from .agent import ActPcAgent
from .config import RunConfig
from .envs import make_env, scripted_expert
from .errors import CheckpointError, NumericalDivergenceError
from .memory import Transition, load_demos, save_demos
from .metrics import r_stability, rolling_mean
from .errors import MetricUndefinedError
from . import persistence

EPISODE_COLUMNS = (
    "episode",
    "seed",
    "sparse_return",
    "combined_return",
    "success",
    "r_ep_mean",
    "r_in_mean",
    "tod_gen_mean",
    "steps",
)


def _load_run_config(config_path, **overrides) -> RunConfig:
    data = {}
    if config_path:
        with open(config_path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    cfg = RunConfig.from_dict(data)
    for key, value in overrides.items():
        if value is None or value == ():
            continue
        setattr(cfg, key, value)
    return cfg


def _echo_config(cfg: RunConfig, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "resolved_config.yaml"), "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=True)


def _fmt(x: float) -> str:
    return repr(float(x))


def _episode_row(rec) -> list:
    return [
        rec.episode,
        rec.seed,
        _fmt(rec.sparse_return),
        _fmt(rec.combined_return),
        int(rec.success),
        _fmt(rec.r_ep_mean),
        _fmt(rec.r_in_mean),
        _fmt(rec.tod_gen_mean),
        rec.steps,
    ]


def build_agent(cfg: RunConfig, env, seed: int) -> ActPcAgent:
    spec = env.spec
    return ActPcAgent(
        cfg.agent, spec.obs_dim, spec.action_dim, spec.action_bound, seed=seed
    )


def train_one_seed(cfg: RunConfig, seed: int, demos, out_dir: str):
    """Full training run for one seed; returns (EpisodeLog, checkpoint path)."""
    max_len = cfg.max_len
    env = make_env(cfg.env, cfg.fail_reward, max_len)
    if max_len is None:
        max_len = env.spec.max_episode_len
    agent = build_agent(cfg, env, seed)
    agent.attach_demos(demos)
    agent.pretrain_prior()

    ep_path = os.path.join(out_dir, f"episodes_seed{seed}.csv")
    step_path = os.path.join(out_dir, f"steps_seed{seed}.jsonl")
    ckpt_path = cfg.checkpoint or os.path.join(out_dir, f"checkpoint_seed{seed}.bin")
    with open(step_path, "w", encoding="utf-8") as step_fh:

        def write_step(rec):
            step_fh.write(
                json.dumps(
                    {
                        "t": rec.t,
                        "r_ep": rec.r_ep,
                        "r_in": rec.r_in,
                        "r_t": rec.r_t,
                        "sparse_r": rec.sparse_r,
                        "tod_gen": rec.tod_gen,
                        "tod_layers": list(rec.tod_layers),
                    }
                )
                + "\n"
            )

        log = agent.run(
            env, cfg.episodes, max_len, reset_seed=seed, step_writer=write_step
        )
    with open(ep_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EPISODE_COLUMNS)
        for rec in log.episodes:
            writer.writerow(_episode_row(rec))
    persistence.save(agent, ckpt_path)
    return log, ckpt_path


def _write_summary(cfg: RunConfig, logs: dict, out_dir: str) -> None:
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["env", "seed", "avg_return_last100", "r_stability"])
        for seed, log in logs.items():
            returns = log.sparse_returns()
            tail = returns[-100:] if returns else [0.0]
            avg = float(np.mean(tail))
            try:
                rs = _fmt(r_stability(returns, k_e=min(100, max(len(returns), 1))))
            except (MetricUndefinedError, ValueError):
                rs = "nan"
            writer.writerow([cfg.env, seed, _fmt(avg), rs])


@click.group()
def main():
    """Backprop-free predictive-coding reinforcement learning harness."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--env", default=None)
@click.option("--seed", "seeds", type=int, multiple=True)
@click.option("--episodes", type=int, default=None)
@click.option("--out", "out_dir", default=None)
@click.option("--checkpoint", default=None)
@click.option("--demos", "demo_path", default=None, help="Demonstration JSONL file.")
@click.option("--max-len", type=int, default=None)
def train(config_path, seeds, **overrides):
    """Pretrain the prior on demos, then train the agent per seed."""
    cfg = _load_run_config(config_path, seeds=tuple(seeds), **overrides)
    if not cfg.demo_path:
        raise click.ClickException("training requires --demos (prior pretraining)")
    if not os.path.exists(cfg.demo_path):
        raise click.ClickException(f"demo file not found: {cfg.demo_path}")
    demos = load_demos(cfg.demo_path)
    _echo_config(cfg, cfg.out_dir)
    logs = {}
    try:
        for seed in cfg.seeds:
            log, ckpt = train_one_seed(cfg, seed, demos, cfg.out_dir)
            logs[seed] = log
            click.echo(f"seed {seed}: {len(log.episodes)} episodes, checkpoint {ckpt}")
    except NumericalDivergenceError as exc:
        _write_summary(cfg, logs, cfg.out_dir)
        raise click.ClickException(f"settling diverged (layer {exc.layer}); partial logs kept")
    _merge_episode_csvs(cfg, cfg.out_dir)
    _write_summary(cfg, logs, cfg.out_dir)


def _merge_episode_csvs(cfg: RunConfig, out_dir: str) -> None:
    merged = os.path.join(out_dir, "episodes.csv")
    with open(merged, "w", newline="", encoding="utf-8") as out:
        writer = csv.writer(out)
        writer.writerow(EPISODE_COLUMNS)
        for seed in cfg.seeds:
            path = os.path.join(out_dir, f"episodes_seed{seed}.csv")
            if not os.path.exists(path):
                continue
            with open(path, newline="", encoding="utf-8") as fh:
                rows = list(csv.reader(fh))
            writer.writerows(rows[1:])


@main.command()
@click.option("--env", required=True)
@click.option("--seed", type=int, default=0)
@click.option("--episodes", type=int, default=300, help="Successful episodes to keep.")
@click.option("--out", "out_path", required=True)
@click.option("--max-len", type=int, default=None)
def demo(env, seed, episodes, out_path, max_len):
    """Collect demonstrations with the scripted expert controller."""
    episodes_out = collect_demos(env, seed, episodes, max_len)
    save_demos(out_path, episodes_out)
    click.echo(f"wrote {len(episodes_out)} episodes to {out_path}")


def collect_demos(env_name, seed, episodes, max_len=None):
    env = make_env(env_name, 0.0, max_len)
    collected = []
    attempts = 0
    reset_seed = seed
    while len(collected) < episodes:
        attempts += 1
        if attempts > max(10 * episodes, 10):
            raise click.ClickException(
                f"expert starved: {len(collected)}/{episodes} successes "
                f"after {attempts - 1} attempts"
            )
        o = env.reset(reset_seed)
        reset_seed = None
        episode = []
        success = False
        for _ in range(env.spec.max_episode_len):
            a = scripted_expert(env_name, o).astype(np.float32)
            r, o_next, done = env.step(a)
            episode.append(
                Transition(
                    np.asarray(o, dtype=np.float32),
                    a,
                    float(r),
                    np.asarray(o_next, dtype=np.float32),
                    bool(done),
                    float(r),
                )
            )
            o = o_next
            success = success or r == 1.0
            if done:
                break
        if success:
            collected.append(episode)
    return collected


@main.command(name="eval")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--env", required=True)
@click.option("--seed", type=int, default=0)
@click.option("--episodes", type=int, default=100)
@click.option("--out", "out_dir", default=None)
@click.option("--force", is_flag=True, help="Skip version/config-hash checks.")
def eval_cmd(checkpoint, env, seed, episodes, out_dir, force):
    """Greedy rollouts from a checkpoint; reports success rate and return."""
    try:
        agent = persistence.load(checkpoint, force=force)
        environment = make_env(env)
        persistence.check_env_compat(agent, environment)
    except CheckpointError as exc:
        raise click.ClickException(str(exc))
    returns, success_rate = agent.rollout(
        environment, episodes, environment.spec.max_episode_len, reset_seed=seed
    )
    avg = float(np.mean(returns)) if returns else 0.0
    click.echo(f"episodes={episodes} success_rate={success_rate} avg_return={avg}")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "eval_summary.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["env", "episodes", "success_rate", "avg_return"])
            writer.writerow([env, episodes, _fmt(success_rate), _fmt(avg)])


@main.command(name="plot-data")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True)
@click.option("--window", type=int, default=100)
def plot_data(input_path, out_path, window):
    """Smooth an episode CSV into tidy (episode, seed, rolling_mean_return)."""
    with open(input_path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    by_seed: dict[str, list] = {}
    for row in rows:
        by_seed.setdefault(row["seed"], []).append(row)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "seed", "rolling_mean_return"])
        for seed, seed_rows in by_seed.items():
            returns = [float(r["sparse_return"]) for r in seed_rows]
            smoothed = rolling_mean(returns, window)
            for row, value in zip(seed_rows, smoothed):
                writer.writerow([row["episode"], seed, _fmt(value)])


if __name__ == "__main__":
    sys.exit(main())
