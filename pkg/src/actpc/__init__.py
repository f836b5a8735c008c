"""Backprop-free reinforcement learning with predictive-coding circuits."""

from .agent import ActPcAgent, EpisodeLog, EpisodeRecord, StepRecord, STEP_ORDER
from .circuits import (
    ActorCircuit,
    GeneratorCircuit,
    PolicyCircuit,
    PriorCircuit,
    actor_refresh,
    compute_td_target,
    pretrain_prior,
    update_actor_coupled,
    update_generator,
    update_policy,
)
from .config import AgentConfig, RunConfig
from .envs import ENV_REGISTRY, Environment, EnvSpec, make_env, scripted_expert
from .errors import (
    CheckpointError,
    FrozenCircuitError,
    MetricUndefinedError,
    NumericalDivergenceError,
    ShapeError,
)
from .memory import (
    ActorBuffer,
    ReplayBuffer,
    Transition,
    WorkingMemory,
    load_demos,
    sample_combined,
    save_demos,
)
from .metrics import r_stability, rolling_mean
from .ngc import Clamp, LayerSpec, NgcCircuit
from .optim import AdaptiveRule, apply_circuit_updates, hard_sync, polyak
from .persistence import check_env_compat, load, read_container, save
from .rewards import RewardState

__version__ = "0.1.0"

__all__ = [
    "ActPcAgent",
    "ActorBuffer",
    "ActorCircuit",
    "AdaptiveRule",
    "AgentConfig",
    "CheckpointError",
    "Clamp",
    "ENV_REGISTRY",
    "EnvSpec",
    "Environment",
    "EpisodeLog",
    "EpisodeRecord",
    "FrozenCircuitError",
    "GeneratorCircuit",
    "LayerSpec",
    "MetricUndefinedError",
    "NgcCircuit",
    "NumericalDivergenceError",
    "PolicyCircuit",
    "PriorCircuit",
    "ReplayBuffer",
    "RewardState",
    "RunConfig",
    "STEP_ORDER",
    "ShapeError",
    "StepRecord",
    "Transition",
    "WorkingMemory",
    "actor_refresh",
    "apply_circuit_updates",
    "check_env_compat",
    "compute_td_target",
    "hard_sync",
    "load",
    "load_demos",
    "make_env",
    "polyak",
    "pretrain_prior",
    "r_stability",
    "read_container",
    "rolling_mean",
    "sample_combined",
    "save",
    "save_demos",
    "scripted_expert",
    "update_actor_coupled",
    "update_generator",
    "update_policy",
]
