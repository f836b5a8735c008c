"""Acceptance gate: every headline criterion, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py -v -s``. The desk-scale learning
criterion trains five full agents and dominates the runtime (minutes, well
inside its per-seed budget); everything else finishes in seconds.
"""

import time

import numpy as np
import pytest

from actpc import (
    ActPcAgent,
    ActorBuffer,
    AgentConfig,
    Clamp,
    LayerSpec,
    NgcCircuit,
    ReplayBuffer,
    RewardState,
    Transition,
    make_env,
    persistence,
    r_stability,
    sample_combined,
)
from actpc.cli import collect_demos
from actpc.ngc import _dphi


def report(name: str, ok: bool, detail: str = "") -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


def random_circuit(rng, tied=True):
    n_layers = int(rng.integers(2, 4))
    sizes = [int(s) for s in rng.integers(1, 9, size=n_layers)]
    layers = [LayerSpec(sizes[0])]
    layers += [
        LayerSpec(s, str(rng.choice(["identity", "tanh"]))) for s in sizes[1:]
    ]
    c = NgcCircuit(
        layers,
        tied_feedback=tied,
        leak=0.0,
        dtype=np.float64,
        row_norm_bound=None,
        rng=rng,
    )
    for layer in range(len(sizes)):
        c.z[layer] = rng.normal(size=(sizes[layer], 1))
    return c


def circuit_tod(c):
    c.compute_errors()
    return c.total_discrepancy()


class TestGradientEquivalence:
    def test_hebbian_deltas_and_settling_direction_match_finite_differences(self):
        t0 = time.time()
        h = 1e-6
        worst_w, worst_z = 0.0, 0.0
        for trial in range(50):
            rng = np.random.default_rng(1000 + trial)
            c = random_circuit(rng)
            c.compute_errors()
            deltas = c.compute_weight_updates()
            # weight deltas are ascent directions: compare against the
            # negated central finite difference of the discrepancy
            for k in range(c.num_sites):
                fd = np.zeros_like(c.W[k])
                for i in range(fd.shape[0]):
                    for j in range(fd.shape[1]):
                        orig = c.W[k][i, j]
                        c.W[k][i, j] = orig + h
                        up = circuit_tod(c)
                        c.W[k][i, j] = orig - h
                        down = circuit_tod(c)
                        c.W[k][i, j] = orig
                        fd[i, j] = (up - down) / (2 * h)
                worst_w = max(worst_w, _rel_err(deltas[f"W{k}"], -fd))
            # settling direction of each hidden layer vs -dToD/dz
            c.compute_errors()
            for layer in range(1, c.num_sites):
                drive = (c.feedback(layer - 1) @ c.e[layer - 1]) * _dphi(
                    c.layers[layer].activation, c.z[layer]
                )
                direction = drive - c.e[layer]
                fd = np.zeros_like(c.z[layer])
                for i in range(fd.shape[0]):
                    orig = c.z[layer][i, 0]
                    c.z[layer][i, 0] = orig + h
                    up = circuit_tod(c)
                    c.z[layer][i, 0] = orig - h
                    down = circuit_tod(c)
                    c.z[layer][i, 0] = orig
                    fd[i, 0] = (up - down) / (2 * h)
                worst_z = max(worst_z, _rel_err(direction, -fd))
            c.compute_errors()
        elapsed = time.time() - t0
        ok = worst_w < 1e-5 and worst_z < 1e-5 and elapsed < 10.0
        report(
            "gradient equivalence (50 circuits, rel tol 1e-5)",
            ok,
            f"worst dW {worst_w:.2e}, worst dz {worst_z:.2e}, {elapsed:.1f}s",
        )


def _rel_err(a, b):
    scale = max(1.0, float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) / scale


class TestDiscrepancyDescent:
    def test_settling_never_increases_discrepancy(self):
        t0 = time.time()
        violations = 0
        for trial in range(100):
            rng = np.random.default_rng(2000 + trial)
            c = random_circuit(rng)
            c.beta = 0.05
            clamp = Clamp(
                top=rng.normal(size=c.input_dim), bottom=rng.normal(size=c.output_dim)
            )
            c.project(clamp.top)
            c.z[0] = np.asarray(clamp.bottom, dtype=np.float64)[:, None]
            prev = circuit_tod(c)
            for _ in range(15):
                c.settle_step(clamp)
                tod = circuit_tod(c)
                if tod > prev + 1e-12:
                    violations += 1
                prev = tod
        elapsed = time.time() - t0
        ok = violations == 0 and elapsed < 5.0
        report(
            "discrepancy descent (100 instances, beta 0.05)",
            ok,
            f"{violations} violations, {elapsed:.1f}s",
        )


class TestProjectionNull:
    def test_projection_zeroes_all_errors(self):
        bad = 0
        for trial in range(100):
            rng = np.random.default_rng(3000 + trial)
            c = random_circuit(rng)
            c.project(rng.normal(size=c.input_dim))
            if any(np.any(e != 0.0) for e in c.e):
                bad += 1
        report("projection nulls every error neuron (100 circuits)", bad == 0,
               f"{bad} circuits with residual errors")


class TestRewardBounds:
    def test_ten_thousand_step_fuzz(self):
        rng = np.random.default_rng(4)
        rs = RewardState()
        ok = True
        prev_ep, prev_in = rs.r_ep_max, rs.r_in_max
        for _ in range(10_000):
            errors = [
                rng.normal(scale=rng.uniform(0, 4), size=rng.integers(1, 6))
                for _ in range(rng.integers(1, 4))
            ]
            r_ep = rs.epistemic(errors)
            r_in = rs.instrumental(errors)
            ok &= 0.0 <= r_ep <= 1.0
            ok &= -1.0 <= r_in <= 0.0
            ok &= rs.r_ep_max >= prev_ep and rs.r_in_max >= prev_in
            prev_ep, prev_in = rs.r_ep_max, rs.r_in_max
        report("reward bounds + monotone maxima (10,000 fuzzed steps)", ok)


class TestReplaySemantics:
    def test_cer_and_actor_buffer_over_fuzzed_episodes(self):
        rng = np.random.default_rng(5)
        buf = ReplayBuffer(5000)
        actor_buf = ActorBuffer(5000)
        ok = True
        for _ in range(1000):
            n = int(rng.integers(1, 6))
            episode = []
            for _ in range(n):
                v = rng.normal(size=2).astype(np.float32)
                tr = Transition(v, v[:1], float(rng.normal()), v, False,
                                float(rng.choice([0.0, 0.0, 1.0])))
                buf.push(tr)
                batch = sample_combined(buf, int(rng.integers(1, 9)), tr, rng)
                ok &= batch[0] is tr
                episode.append(tr)
            best = actor_buf.best_return
            stored = actor_buf.store_episode_filtered(episode)
            r_e = sum(tr.sparse_r for tr in episode)
            ok &= stored == (r_e > 0 and r_e >= best)
        for ep in actor_buf.episodes:
            ok &= sum(tr.sparse_r for tr in ep) > 0
        report("CER current-first + actor-buffer filter (1,000 episodes)", ok)


class TestRStabilityOracle:
    def test_matches_brute_force(self):
        from test_metrics import brute_force_rs

        rng = np.random.default_rng(6)
        worst = 0.0
        for _ in range(100):
            series = rng.uniform(0.1, 10.0, size=int(rng.integers(100, 300)))
            k_e = int(rng.integers(1, 101))
            window = int(rng.integers(1, 120))
            got = r_stability(series, k_e=k_e, smooth_window=window)
            worst = max(worst, abs(got - brute_force_rs(series, k_e, window)))
        constant_zero = r_stability([3.0] * 200, k_e=100) == 0.0
        ok = worst < 1e-12 and constant_zero
        report("relative-stability oracle (100 series, tol 1e-12)", ok,
               f"worst |diff| {worst:.1e}")


DESK_CONFIG = AgentConfig(
    hidden=(64, 64),
    k_steps=10,
    batch_size=16,
    warmup_steps=500,
    eta=1e-3,
    replay_capacity=100_000,
    demo_capacity=100_000,
    actor_capacity=100_000,
    prior_epochs=2,
)


def random_baseline_success(episodes=300):
    rng = np.random.default_rng(0)
    env = make_env("reacher")
    wins = 0
    first = True
    for _ in range(episodes):
        env.reset(0 if first else None)
        first = False
        for _ in range(env.spec.max_episode_len):
            r, _, done = env.step(rng.uniform(-1, 1, 2))
            if r == 1.0:
                wins += 1
                break
            if done:
                break
    return wins / episodes


class TestDeskScaleLearning:
    def test_reacher_beats_random_baseline_by_3x(self):
        demos = collect_demos("reacher", 123, 300)
        baseline = random_baseline_success()
        rates, stabilities = [], []
        for seed in range(5):
            t0 = time.time()
            env = make_env("reacher")
            agent = ActPcAgent(DESK_CONFIG, 4, 2, 1.0, seed=seed)
            agent.attach_demos(demos)
            agent.pretrain_prior()
            log = agent.run(env, 600, env.spec.max_episode_len, reset_seed=seed)
            elapsed = time.time() - t0
            assert elapsed < 30 * 60, f"seed {seed} took {elapsed:.0f}s"
            final = log.episodes[-100:]
            rates.append(np.mean([e.success for e in final]))
            try:
                stabilities.append(r_stability(log.sparse_returns(), k_e=100))
            except Exception:
                stabilities.append(None)
        median_rate = float(np.median(rates))
        stability_defined = all(s is not None for s in stabilities)
        ok = median_rate >= 3 * baseline and stability_defined
        report(
            "desk-scale reacher learning (median of 5 seeds, 600 episodes)",
            ok,
            f"median success {median_rate:.2f} vs 3x baseline "
            f"{3 * baseline:.2f}; stability defined: {stability_defined}",
        )


class TestEpistemicDecay:
    def test_world_model_surprise_shrinks_on_line_world(self):
        cfg = AgentConfig(
            hidden=(32, 32),
            k_steps=10,
            batch_size=16,
            warmup_steps=0,
            eta=1e-3,
            replay_capacity=10_000,
            demo_capacity=10_000,
            actor_capacity=10_000,
            prior_epochs=1,
        )
        demos = collect_demos("line_world", 0, 5)
        env = make_env("line_world")
        agent = ActPcAgent(cfg, 2, 1, 1.0, seed=0)
        agent.attach_demos(demos)
        agent.pretrain_prior()
        signals = []
        agent.run(
            env, 60, env.spec.max_episode_len, reset_seed=0,
            step_writer=lambda rec: signals.append(rec.r_ep),
        )
        early = float(np.mean(signals[0:50]))
        late = float(np.mean(signals[450:500]))
        ok = len(signals) >= 500 and late < early
        report("epistemic signal decay (steps 451-500 vs 1-50)", ok,
               f"early {early:.3f} -> late {late:.3f}")


class TestDeterminismAndPersistence:
    def test_identical_runs_and_bitwise_resume(self, tmp_path):
        from click.testing import CliRunner
        import yaml

        from actpc.cli import main

        runner = CliRunner()
        demo_path = tmp_path / "demos.jsonl"
        r = runner.invoke(main, ["demo", "--env", "line_world", "--seed", "0",
                                 "--episodes", "3", "--out", str(demo_path)])
        assert r.exit_code == 0
        csvs = []
        for sub in ("r1", "r2"):
            cfg = {
                "env": "line_world", "seeds": [0], "episodes": 3,
                "out_dir": str(tmp_path / sub), "demo_path": str(demo_path),
                "agent": {"hidden": [10, 10], "activation": "tanh", "k_steps": 4,
                          "batch_size": 6, "warmup_steps": 0,
                          "replay_capacity": 500, "demo_capacity": 500,
                          "actor_capacity": 500, "prior_epochs": 1},
            }
            cfg_path = tmp_path / f"{sub}.yaml"
            with open(cfg_path, "w") as fh:
                yaml.safe_dump(cfg, fh)
            r = runner.invoke(main, ["train", "--config", str(cfg_path)])
            assert r.exit_code == 0, r.output
            csvs.append((tmp_path / sub / "episodes.csv").read_bytes())
        identical_csv = csvs[0] == csvs[1]

        # save / load round-trip, then ten bit-identical further steps
        demos = collect_demos("line_world", 0, 3)
        cfg = AgentConfig(hidden=(10, 10), activation="tanh", k_steps=4,
                          batch_size=6, warmup_steps=0, replay_capacity=500,
                          demo_capacity=500, actor_capacity=500, prior_epochs=1)
        agent = ActPcAgent(cfg, 2, 1, 1.0, seed=9)
        agent.attach_demos(demos)
        agent.pretrain_prior()
        agent.run(make_env("line_world"), 1, 12, reset_seed=9)
        path = tmp_path / "agent.bin"
        persistence.save(agent, path, include_buffers=True)
        resumed = persistence.load(path)
        bitwise = all(
            np.array_equal(t, resumed.actor.core.tensors()[n])
            for n, t in agent.actor.core.tensors().items()
        )

        def advance(a):
            env = make_env("line_world")
            o = env.reset(33)
            a.wm.reset()
            recs = []
            for _ in range(10):
                o, rec = a.step(env, o)
                recs.append(rec)
            return recs

        resume_ok = advance(agent) == advance(resumed)
        ok = identical_csv and bitwise and resume_ok
        report(
            "determinism + persistence (CSV bytes, round-trip, 10-step resume)",
            ok,
            f"csv {identical_csv}, tensors {bitwise}, resume {resume_ok}",
        )
