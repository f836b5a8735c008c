"""Replay memories: working memory, uniform replay with combined experience
replay, the goal-filtered self-imitation buffer, and demonstration files."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


class WorkingMemory:
    """Concatenation of the last ``history_len - 1`` randomly projected
    observations, oldest first. The projection matrix is fixed at creation
    and never trained; empty history slots read as zeros."""

    def __init__(
        self,
        obs_dim: int,
        history_len: int = 7,
        rng: np.random.Generator | None = None,
        dtype=np.float32,
    ):
        if history_len < 2:
            raise ValueError("history_len must be >= 2")
        rng = rng if rng is not None else np.random.default_rng()
        self.obs_dim = int(obs_dim)
        self.history_len = int(history_len)
        self.dtype = np.dtype(dtype)
        sigma = 0.1 / np.sqrt(obs_dim)
        self.Q = rng.normal(0.0, sigma, size=(obs_dim, obs_dim)).astype(self.dtype)
        self.history: deque[np.ndarray] = deque(maxlen=history_len - 1)

    @property
    def dim(self) -> int:
        return self.obs_dim * (self.history_len - 1)

    def push(self, x: np.ndarray) -> None:
        x = np.asarray(x, dtype=self.dtype).reshape(-1)
        if x.shape[0] != self.obs_dim:
            raise ShapeError(f"observation dim {x.shape[0]} != {self.obs_dim}")
        self.history.append(self.Q @ x)

    def vector(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=self.dtype)
        n = len(self.history)
        if n:
            filled = np.concatenate(list(self.history))
            out[-n * self.obs_dim :] = filled
        return out

    def reset(self) -> None:
        self.history.clear()


@dataclass
class Transition:
    """One environment step, with both the combined internal reward ``r``
    and the raw sparse environment reward ``sparse_r``."""

    o: np.ndarray
    a: np.ndarray
    r: float
    o_next: np.ndarray
    terminal: bool
    sparse_r: float


class ReplayBuffer:
    """Uniform ring buffer of transitions; oldest entries overwritten first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self._items: list[Transition] = []
        self._cursor = 0

    def push(self, tr: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(tr)
        else:
            self._items[self._cursor] = tr
        self._cursor = (self._cursor + 1) % self.capacity

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, i: int) -> Transition:
        return self._items[i]


def sample_combined(
    buf: ReplayBuffer,
    batch: int,
    current: Transition,
    rng: np.random.Generator,
    demo: list[Transition] | None = None,
    demo_fraction: float = 0.25,
) -> list[Transition]:
    """Uniform sample (with replacement) that always places the current
    transition first; a fraction of the remainder is drawn from the
    demonstration pool when one is available."""
    if batch < 1:
        raise ValueError("batch must be >= 1")
    out = [current]
    rest = batch - 1
    if rest == 0:
        return out
    if len(buf) == 0:
        raise ValueError("cannot sample batch > 1 from an empty buffer")
    n_demo = int(rest * demo_fraction) if demo else 0
    for idx in rng.integers(0, len(demo), size=n_demo) if n_demo else ():
        out.append(demo[int(idx)])
    for idx in rng.integers(0, len(buf), size=rest - n_demo):
        out.append(buf[int(idx)])
    return out


class ActorBuffer:
    """Episode store for self-imitation: keeps only episodes whose cumulative
    sparse reward is positive and at least the best seen so far."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)  # in transitions
        self.episodes: list[list[Transition]] = []
        self.best_return = 0.0

    def __len__(self) -> int:
        return sum(len(ep) for ep in self.episodes)

    def store_episode_filtered(self, episode: list[Transition]) -> bool:
        if not episode:
            raise ValueError("episode must be non-empty")
        r_e = float(sum(tr.sparse_r for tr in episode))
        if not (r_e > 0 and r_e >= self.best_return):
            return False
        self.episodes.append(list(episode))
        self.best_return = r_e
        while len(self) > self.capacity and len(self.episodes) > 1:
            self.episodes.pop(0)
        return True

    def sample_transitions(self, n: int, rng: np.random.Generator) -> list[Transition]:
        flat = [tr for ep in self.episodes for tr in ep]
        if not flat:
            return []
        return [flat[int(i)] for i in rng.integers(0, len(flat), size=n)]


# ----------------------------------------------------------- demonstrations
#
# JSON-lines: one transition per line with fields o, a, sparse_r, o_next,
# terminal; episodes separated by a line {"episode_end": true}.


def save_demos(path, episodes: list[list[Transition]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ep in episodes:
            for tr in ep:
                fh.write(
                    json.dumps(
                        {
                            "o": np.asarray(tr.o).tolist(),
                            "a": np.asarray(tr.a).tolist(),
                            "sparse_r": float(tr.sparse_r),
                            "o_next": np.asarray(tr.o_next).tolist(),
                            "terminal": bool(tr.terminal),
                        }
                    )
                    + "\n"
                )
            fh.write(json.dumps({"episode_end": True}) + "\n")


def load_demos(path, dtype=np.float32) -> list[list[Transition]]:
    episodes: list[list[Transition]] = []
    current: list[Transition] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("episode_end"):
                if current:
                    episodes.append(current)
                    current = []
                continue
            sparse = float(rec["sparse_r"])
            current.append(
                Transition(
                    o=np.asarray(rec["o"], dtype=dtype),
                    a=np.asarray(rec["a"], dtype=dtype),
                    r=sparse,  # demos carry no internal reward; reuse sparse
                    o_next=np.asarray(rec["o_next"], dtype=dtype),
                    terminal=bool(rec["terminal"]),
                    sparse_r=sparse,
                )
            )
    if current:
        episodes.append(current)
    return episodes
