"""Environments and scripted expert controllers."""

import numpy as np
import pytest

from actpc import ENV_REGISTRY, make_env, scripted_expert


def run_expert_episode(name, env, o):
    total = 0.0
    for _ in range(env.spec.max_episode_len):
        r, o, done = env.step(scripted_expert(name, o))
        total += r
        if done:
            break
    return total


class TestContract:
    @pytest.mark.parametrize("name", sorted(ENV_REGISTRY))
    def test_observation_shape_and_dtype(self, name):
        env = make_env(name)
        o = env.reset(0)
        assert o.shape == (env.spec.obs_dim,)
        assert o.dtype == np.float32

    @pytest.mark.parametrize("name", sorted(ENV_REGISTRY))
    def test_step_returns_sparse_reward(self, name):
        env = make_env(name)
        env.reset(0)
        r, o, done = env.step(np.zeros(env.spec.action_dim))
        assert r in (env.spec.sparse_fail_reward, 1.0)
        assert isinstance(done, bool)

    def test_fail_reward_is_configurable(self):
        env = make_env("reacher", fail_reward=-1.0)
        env.reset(0)
        r, _, _ = env.step(np.zeros(2))
        assert r in (-1.0, 1.0)

    def test_wrong_action_dim_rejected(self):
        env = make_env("reacher")
        env.reset(0)
        with pytest.raises(ValueError):
            env.step(np.zeros(3))

    def test_out_of_bound_actions_clip_and_count(self):
        env = make_env("line_world")
        env.reset(0)
        env.step(np.array([5.0]))
        assert env.clip_warnings == 1

    def test_episode_truncates_at_max_len(self):
        env = make_env("line_world", max_len=3)
        env.reset(0)
        done = False
        for _ in range(3):
            _, _, done = env.step(np.zeros(1))
        assert done

    def test_unknown_env_rejected(self):
        with pytest.raises(ValueError):
            make_env("cartpole")


class TestReacherKinematics:
    def test_one_step_into_threshold(self):
        env = make_env("reacher")
        env.reset(0)
        env.x = np.zeros(2)
        env.goal = np.array([0.1, 0.0])
        r, _, done = env.step(np.array([1.0, 0.0]))
        # dt 0.05 moves x to (0.05, 0): distance 0.05 < 0.06
        assert r == 1.0 and done

    def test_goal_hit_is_immediate_on_zero_distance(self):
        env = make_env("reacher")
        env.reset(0)
        env.goal = env.x.copy()
        r, _, done = env.step(np.zeros(2))
        assert r == 1.0 and done

    def test_idle_actions_run_to_truncation(self):
        env = make_env("reacher")
        env.reset(3)
        env.x = np.array([-0.4, -0.4])
        env.goal = np.array([0.4, 0.4])
        done = False
        steps = 0
        while not done:
            r, _, done = env.step(np.zeros(2))
            assert r == env.spec.sparse_fail_reward
            steps += 1
        assert steps == env.spec.max_episode_len


class TestDeterminism:
    @pytest.mark.parametrize("name", sorted(ENV_REGISTRY))
    def test_same_seed_same_trajectory(self, name):
        rng = np.random.default_rng(0)
        actions = rng.uniform(-1, 1, size=(10, ENV_REGISTRY[name]().spec.action_dim))
        traces = []
        for _ in range(2):
            env = make_env(name)
            o = env.reset(42)
            trace = [o.copy()]
            for a in actions:
                _, o, done = env.step(a)
                trace.append(o.copy())
                if done:
                    break
            traces.append(np.concatenate(trace))
        assert np.array_equal(traces[0], traces[1])

    def test_line_world_is_fully_deterministic(self):
        env = make_env("line_world")
        a = env.reset(0)
        b = env.reset(99)
        assert np.array_equal(a, b)


class TestExperts:
    @pytest.mark.parametrize("name", sorted(ENV_REGISTRY))
    def test_expert_succeeds_at_least_ninety_percent(self, name):
        env = make_env(name)
        o = env.reset(0)
        wins = 0
        n = 20
        for ep in range(n):
            if ep:
                o = env.reset()
            wins += run_expert_episode(name, env, o) >= 1.0
        assert wins / n >= 0.9

    def test_expert_actions_respect_bounds(self):
        for name in sorted(ENV_REGISTRY):
            env = make_env(name)
            o = env.reset(1)
            for _ in range(30):
                a = scripted_expert(name, o)
                assert np.all(np.abs(a) <= env.spec.action_bound + 1e-9)
                _, o, done = env.step(a)
                if done:
                    break

    def test_unknown_expert_rejected(self):
        with pytest.raises(ValueError):
            scripted_expert("cartpole", np.zeros(2))

    def test_reacher_expert_is_idle_at_the_goal(self):
        o = np.array([0.2, -0.1, 0.2, -0.1])
        assert np.array_equal(scripted_expert("reacher", o), np.zeros(2))


class TestMountainCar:
    def test_zero_torque_never_reaches_the_goal(self):
        env = make_env("mountain_car")
        env.reset(0)
        done = False
        while not done:
            r, _, done = env.step(np.zeros(1))
            assert r != 1.0
