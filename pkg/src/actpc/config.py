"""Run and agent configuration, with defaults from the reference setup."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field


@dataclass
class AgentConfig:
    """Hyper-parameters for the four circuits and their training loop."""

    hidden: tuple[int, ...] = (256, 256)
    activation: str = "relu6"
    eta: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    tau: float = 0.005
    sync_period: int | None = None  # hard target sync every C steps, if set
    discount: float = 0.99
    k_steps: int = 15
    beta: float = 0.1
    leak: float = 0.001
    gamma_e: float = 0.95
    tied_feedback: bool = False
    row_norm_bound: float | None = 1.0
    replay_capacity: int = 1_000_000
    demo_capacity: int = 100_000
    actor_capacity: int = 100_000
    batch_size: int = 256
    alpha_ep: float = 1.0
    alpha_in: float = 1.0
    add_sparse_reward: bool = False
    explore_noise: float = 0.1  # as a fraction of the action bound
    demo_fraction: float = 0.25
    history_len: int = 7
    warmup_steps: int = 1000
    prior_epochs: int = 5
    seed_actor_buffer_with_demos: bool = True

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AgentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown agent config keys: {sorted(unknown)}")
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)


@dataclass
class RunConfig:
    """One training/evaluation run: environment, seeds, paths, agent setup."""

    env: str = "reacher"
    fail_reward: float = 0.0
    seeds: tuple[int, ...] = (0,)
    episodes: int = 600
    max_len: int | None = None  # None: use the environment's own episode limit
    demo_path: str | None = None
    checkpoint: str | None = None
    out_dir: str = "out"
    agent: AgentConfig = field(default_factory=AgentConfig)

    def to_dict(self) -> dict:
        return {
            "env": self.env,
            "fail_reward": self.fail_reward,
            "seeds": list(self.seeds),
            "episodes": self.episodes,
            "max_len": self.max_len,
            "demo_path": self.demo_path,
            "checkpoint": self.checkpoint,
            "out_dir": self.out_dir,
            "agent": self.agent.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        agent = AgentConfig.from_dict(d.pop("agent", {}))
        if "seeds" in d:
            d["seeds"] = tuple(d["seeds"])
        known = {f.name for f in dataclasses.fields(cls)} - {"agent"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown run config keys: {sorted(unknown)}")
        return cls(agent=agent, **d)

    def config_hash(self) -> str:
        """Stable digest of everything that shapes agent tensors."""
        payload = self.to_dict()
        payload.pop("out_dir", None)
        payload.pop("checkpoint", None)
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
