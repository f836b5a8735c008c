"""Desk-scale sparse-reward continuous-control environments and scripted
expert controllers for demonstration generation.

All environments share the same contract: observations are float32 vectors,
rewards are sparse (``fail_reward`` on ordinary steps, 1 on reaching the
goal), and trajectories are deterministic given the reset seed and the
action stream. Physics constants are chosen so every task is solvable by
its scripted expert well inside the episode limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    obs_dim: int
    action_dim: int
    action_bound: float
    max_episode_len: int
    sparse_fail_reward: float = 0.0


class Environment:
    """Base class: seedable reset + sparse-reward stepping."""

    spec: EnvSpec

    def __init__(self, spec: EnvSpec):
        self.spec = spec
        self.rng = np.random.default_rng()
        self.clip_warnings = 0
        self._t = 0

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self._t = 0
        return self._reset_state()

    def step(self, a: np.ndarray) -> tuple[float, np.ndarray, bool]:
        a = np.asarray(a, dtype=np.float64).reshape(-1)
        if a.shape[0] != self.spec.action_dim:
            raise ValueError(
                f"action dim {a.shape[0]} != {self.spec.action_dim}"
            )
        bound = self.spec.action_bound
        if np.any(np.abs(a) > bound):
            self.clip_warnings += 1
            a = np.clip(a, -bound, bound)
        self._t += 1
        r, obs, done = self._step(a)
        if self._t >= self.spec.max_episode_len:
            done = True
        return r, obs, done

    def _reset_state(self) -> np.ndarray:
        raise NotImplementedError

    def _step(self, a: np.ndarray) -> tuple[float, np.ndarray, bool]:
        raise NotImplementedError


class PointReacher(Environment):
    """2-D point mass steered toward a random goal; success inside 0.06."""

    DT = 0.05
    THRESHOLD = 0.06

    def __init__(self, fail_reward: float = 0.0, max_len: int = 50):
        super().__init__(EnvSpec(4, 2, 1.0, max_len, fail_reward))
        self.x = np.zeros(2)
        self.goal = np.zeros(2)

    def _obs(self) -> np.ndarray:
        return np.concatenate([self.x, self.goal]).astype(np.float32)

    def _reset_state(self) -> np.ndarray:
        self.x = self.rng.uniform(-0.5, 0.5, size=2)
        self.goal = self.rng.uniform(-0.5, 0.5, size=2)
        return self._obs()

    def _step(self, a):
        self.x = np.clip(self.x + self.DT * a, -1.0, 1.0)
        if np.linalg.norm(self.x - self.goal) < self.THRESHOLD:
            return 1.0, self._obs(), True
        return self.spec.sparse_fail_reward, self._obs(), False


class SparseMountainCar(Environment):
    """Continuous mountain car; reward only at the flag (position >= 0.45)."""

    def __init__(self, fail_reward: float = 0.0, max_len: int = 300):
        super().__init__(EnvSpec(2, 1, 1.0, max_len, fail_reward))
        self.pos = -0.5
        self.vel = 0.0

    def _obs(self) -> np.ndarray:
        return np.array([self.pos, self.vel], dtype=np.float32)

    def _reset_state(self) -> np.ndarray:
        self.pos = self.rng.uniform(-0.6, -0.4)
        self.vel = 0.0
        return self._obs()

    def _step(self, a):
        force = float(a[0])
        self.vel += 0.0015 * force - 0.0025 * np.cos(3 * self.pos)
        self.vel = float(np.clip(self.vel, -0.07, 0.07))
        self.pos = float(np.clip(self.pos + self.vel, -1.2, 0.6))
        if self.pos <= -1.2 and self.vel < 0:
            self.vel = 0.0
        if self.pos >= 0.45:
            return 1.0, self._obs(), True
        return self.spec.sparse_fail_reward, self._obs(), False


class SparsePendulum(Environment):
    """Torque-limited pendulum swing-up; reward after holding upright
    (|angle| < 0.1 rad) for 5 consecutive steps."""

    DT = 0.05
    G = 10.0
    HOLD = 5

    def __init__(self, fail_reward: float = 0.0, max_len: int = 300):
        super().__init__(EnvSpec(3, 1, 2.0, max_len, fail_reward))
        self.theta = np.pi
        self.theta_dot = 0.0
        self._held = 0

    def _obs(self) -> np.ndarray:
        return np.array(
            [np.cos(self.theta), np.sin(self.theta), self.theta_dot],
            dtype=np.float32,
        )

    def _reset_state(self) -> np.ndarray:
        self.theta = np.pi + self.rng.uniform(-0.1, 0.1)
        self.theta_dot = 0.0
        self._held = 0
        return self._obs()

    def _step(self, a):
        u = float(a[0])
        # theta measured from upright; mass = length = 1
        self.theta_dot += self.DT * (1.5 * self.G * np.sin(self.theta) + 3.0 * u)
        self.theta_dot = float(np.clip(self.theta_dot, -8.0, 8.0))
        self.theta = _wrap_angle(self.theta + self.DT * self.theta_dot)
        if abs(self.theta) < 0.1:
            self._held += 1
        else:
            self._held = 0
        if self._held >= self.HOLD:
            return 1.0, self._obs(), True
        return self.spec.sparse_fail_reward, self._obs(), False


class LineWorld(Environment):
    """Deterministic 1-D world used for world-model diagnostics: fixed start,
    fixed goal, success inside 0.05."""

    DT = 0.1
    THRESHOLD = 0.05

    def __init__(self, fail_reward: float = 0.0, max_len: int = 60):
        super().__init__(EnvSpec(2, 1, 1.0, max_len, fail_reward))
        self.x = -0.5
        self.goal = 0.5

    def _obs(self) -> np.ndarray:
        return np.array([self.x, self.goal], dtype=np.float32)

    def _reset_state(self) -> np.ndarray:
        self.x = -0.5
        return self._obs()

    def _step(self, a):
        self.x = float(np.clip(self.x + self.DT * float(a[0]), -1.0, 1.0))
        if abs(self.x - self.goal) < self.THRESHOLD:
            return 1.0, self._obs(), True
        return self.spec.sparse_fail_reward, self._obs(), False


def _wrap_angle(t: float) -> float:
    return float((t + np.pi) % (2 * np.pi) - np.pi)


ENV_REGISTRY = {
    "reacher": PointReacher,
    "mountain_car": SparseMountainCar,
    "pendulum": SparsePendulum,
    "line_world": LineWorld,
}


def make_env(name: str, fail_reward: float = 0.0, max_len: int | None = None):
    if name not in ENV_REGISTRY:
        raise ValueError(f"unknown environment {name!r}")
    kwargs = {"fail_reward": fail_reward}
    if max_len is not None:
        kwargs["max_len"] = max_len
    return ENV_REGISTRY[name](**kwargs)


# ------------------------------------------------------------ scripted experts


def scripted_expert(kind: str, o: np.ndarray) -> np.ndarray:
    """Deterministic controller for demonstration collection."""
    o = np.asarray(o, dtype=np.float64).reshape(-1)
    if kind == "reacher":
        x, goal = o[:2], o[2:4]
        return np.clip((goal - x) / PointReacher.DT, -1.0, 1.0)
    if kind == "mountain_car":
        vel = o[1]
        return np.array([1.0 if vel >= 0 else -1.0])
    if kind == "pendulum":
        cos_t, sin_t, td = o
        theta = np.arctan2(sin_t, cos_t)
        if abs(theta) < 0.4:  # balance with a PD law near the top
            u = -18.0 * theta - 4.0 * td
        else:  # pump energy toward the upright equilibrium
            energy = 0.5 * td**2 - 1.5 * SparsePendulum.G * (1 - np.cos(theta))
            u = 4.0 if -td * energy > 0 else -4.0
        return np.clip(np.array([u]), -2.0, 2.0)
    if kind == "line_world":
        x, goal = o
        return np.clip(np.array([(goal - x) / LineWorld.DT]), -1.0, 1.0)
    raise ValueError(f"no scripted expert for environment {kind!r}")
