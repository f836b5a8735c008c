"""The orchestration loop tying circuits, memories and rewards together.

One agent step runs, in fixed order: act, environment step, world-model
settle (exploration signal), prior settle (goal signal), reward combination,
transition storage, batch sampling, coupled actor update, critic update,
world-model update, self-imitation refresh, and finally the working-memory
push. The order is recorded per step so it can be asserted in tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

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
from .config import AgentConfig
from .memory import (
    ActorBuffer,
    ReplayBuffer,
    Transition,
    WorkingMemory,
    sample_combined,
)
from .optim import AdaptiveRule
from .rewards import RewardState

STEP_ORDER = (
    "act",
    "env_step",
    "generator_settle",
    "epistemic",
    "prior_settle",
    "instrumental",
    "combine",
    "store",
    "sample",
    "update_actor",
    "update_policy",
    "update_generator",
    "actor_refresh",
    "wm_push",
)


@dataclass
class StepRecord:
    t: int
    r_ep: float
    r_in: float
    r_t: float
    sparse_r: float
    tod_gen: float
    terminal: bool
    tod_layers: tuple[float, ...] = ()


@dataclass
class EpisodeRecord:
    episode: int
    seed: int
    sparse_return: float
    combined_return: float
    success: bool
    r_ep_mean: float
    r_in_mean: float
    tod_gen_mean: float
    steps: int


@dataclass
class EpisodeLog:
    episodes: list[EpisodeRecord] = field(default_factory=list)

    def sparse_returns(self) -> list[float]:
        return [e.sparse_return for e in self.episodes]


class ActPcAgent:
    """Four predictive circuits plus memories, learning online from sparse
    rewards. Fully deterministic given (seed, environment seed, config)."""

    def __init__(
        self,
        config: AgentConfig,
        obs_dim: int,
        action_dim: int,
        action_bound: float,
        seed: int = 0,
    ):
        self.config = config
        self.obs_dim = int(obs_dim)
        self.action_dim = int(action_dim)
        self.action_bound = float(action_bound)
        self.seed = int(seed)

        ss = np.random.SeedSequence(seed)
        (s_actor, s_policy, s_gen, s_prior, s_wm, s_agent) = ss.spawn(6)
        self.rng = np.random.default_rng(s_agent)
        self.wm = WorkingMemory(
            obs_dim, config.history_len, rng=np.random.default_rng(s_wm)
        )
        ngc_kwargs = dict(
            hidden=tuple(config.hidden),
            activation=config.activation,
            k_steps=config.k_steps,
            beta=config.beta,
            leak=config.leak,
            gamma_e=config.gamma_e,
            tied_feedback=config.tied_feedback,
            row_norm_bound=config.row_norm_bound,
        )
        self.actor = ActorCircuit(
            obs_dim,
            action_dim,
            kappa=action_bound,
            memory_dim=self.wm.dim,
            tau=config.tau,
            sync_period=config.sync_period,
            rng=np.random.default_rng(s_actor),
            **ngc_kwargs,
        )
        self.policy = PolicyCircuit(
            obs_dim,
            action_dim,
            discount=config.discount,
            memory_dim=self.wm.dim,
            tau=config.tau,
            sync_period=config.sync_period,
            rng=np.random.default_rng(s_policy),
            **ngc_kwargs,
        )
        self.generator = GeneratorCircuit(
            obs_dim,
            action_dim,
            memory_dim=self.wm.dim,
            rng=np.random.default_rng(s_gen),
            **ngc_kwargs,
        )
        self.prior = PriorCircuit(
            obs_dim,
            memory_dim=self.wm.dim,
            rng=np.random.default_rng(s_prior),
            **ngc_kwargs,
        )
        adam = dict(beta1=config.beta1, beta2=config.beta2, eps=config.eps)
        self.rule_actor = AdaptiveRule(config.eta, **adam)
        self.rule_policy = AdaptiveRule(config.eta, **adam)
        self.rule_generator = AdaptiveRule(config.eta, **adam)
        self.rule_prior = AdaptiveRule(config.eta, **adam)

        self.replay = ReplayBuffer(config.replay_capacity)
        self.actor_buffer = ActorBuffer(config.actor_capacity)
        self.demo_episodes: list[list[Transition]] = []
        self.demo_transitions: list[Transition] = []
        self.reward_state = RewardState(
            alpha_ep=config.alpha_ep, alpha_in=config.alpha_in
        )
        self.total_steps = 0
        self.episodes_done = 0
        self.last_trace: list[str] = []
        self.last_transition: Transition | None = None

    # ----------------------------------------------------------------- setup

    def attach_demos(self, episodes: list[list[Transition]]) -> None:
        """Register demonstration episodes: they back the prior's training,
        mix into replay batches, and (optionally) seed the self-imitation
        buffer so the refresh step can guide the motor circuit early on."""
        cap = self.config.demo_capacity
        flat = [tr for ep in episodes for tr in ep][:cap]
        self.demo_episodes = episodes
        self.demo_transitions = flat
        if self.config.seed_actor_buffer_with_demos:
            for ep in episodes:
                self.actor_buffer.store_episode_filtered(ep)

    def pretrain_prior(self, episodes: list[list[Transition]] | None = None) -> None:
        demos = episodes if episodes is not None else self.demo_episodes
        pretrain_prior(
            self.prior, demos, self.config.prior_epochs, self.rule_prior, self.wm
        )

    # ------------------------------------------------------------------ core

    def act(self, o: np.ndarray, explore: bool = True) -> np.ndarray:
        noise = self.config.explore_noise * self.action_bound if explore else 0.0
        return self.actor.act(o, self.wm.vector(), noise_std=noise, rng=self.rng)

    def step(self, env, o: np.ndarray) -> tuple[np.ndarray, StepRecord]:
        """One full agent-environment interaction with learning."""
        trace = []
        o = np.asarray(o, dtype=np.float32).reshape(-1)
        m = self.wm.vector()

        a = self.act(o, explore=True)
        trace.append("act")
        sparse_r, o_next, terminal = env.step(a)
        o_next = np.asarray(o_next, dtype=np.float32).reshape(-1)
        trace.append("env_step")

        probe = Transition(o, a, 0.0, o_next, terminal, sparse_r)
        gen_errors = self.generator.settle_transition(probe, m)
        tod_gen = self.generator.core.total_discrepancy()
        trace.append("generator_settle")
        r_ep = self.reward_state.epistemic(gen_errors)
        trace.append("epistemic")
        prior_errors = self.prior.settle_transition(o, o_next, m)
        trace.append("prior_settle")
        r_in = self.reward_state.instrumental(prior_errors)
        trace.append("instrumental")
        r_t = self.reward_state.combine(r_ep, r_in)
        if self.config.add_sparse_reward:
            r_t += sparse_r
        trace.append("combine")

        tr = Transition(o, a, float(r_t), o_next, terminal, float(sparse_r))
        self.last_transition = tr
        self.replay.push(tr)
        trace.append("store")
        batch = sample_combined(
            self.replay,
            self.config.batch_size,
            tr,
            self.rng,
            demo=self.demo_transitions or None,
            demo_fraction=self.config.demo_fraction,
        )
        trace.append("sample")

        learning = self.total_steps >= self.config.warmup_steps
        if learning:
            obs_batch = np.stack(
                [np.asarray(b.o, dtype=np.float32) for b in batch], axis=1
            )
            update_actor_coupled(
                self.actor, self.policy, obs_batch, self.rule_actor, m, self.total_steps
            )
        trace.append("update_actor")
        if learning:
            targets = compute_td_target(self.policy, self.actor, batch, m)
            update_policy(self.policy, batch, targets, self.rule_policy, self.total_steps)
        trace.append("update_policy")
        if learning:
            update_generator(self.generator, tr, self.rule_generator, m)
        trace.append("update_generator")
        if learning:
            actor_refresh(
                self.actor,
                self.actor_buffer,
                self.config.batch_size,
                self.rule_actor,
                self.rng,
                m,
            )
        trace.append("actor_refresh")

        self.wm.push(o)
        trace.append("wm_push")
        self.total_steps += 1
        self.last_trace = trace
        record = StepRecord(
            t=self.total_steps,
            r_ep=float(r_ep),
            r_in=float(r_in),
            r_t=float(r_t),
            sparse_r=float(sparse_r),
            tod_gen=float(tod_gen),
            terminal=bool(terminal),
            tod_layers=tuple(
                float(0.5 * np.sum(np.asarray(e, dtype=np.float64) ** 2))
                for e in gen_errors
            ),
        )
        return o_next, record

    def run(
        self,
        env,
        episodes: int,
        max_len: int,
        reset_seed: int | None = None,
        step_writer=None,
    ) -> EpisodeLog:
        """Run full episodes, filtering finished ones into the self-imitation
        buffer. The first reset may seed the environment."""
        log = EpisodeLog()
        for ep_i in range(episodes):
            o = env.reset(reset_seed if ep_i == 0 else None)
            reset_seed = None
            self.wm.reset()
            episode: list[Transition] = []
            records: list[StepRecord] = []
            for _ in range(max_len):
                o, rec = self.step(env, o)
                records.append(rec)
                episode.append(self.last_transition)
                if step_writer is not None:
                    step_writer(rec)
                if rec.terminal:
                    break
            if episode:
                self.actor_buffer.store_episode_filtered(episode)
            log.episodes.append(_summarize(ep_i, self.seed, records))
            self.episodes_done += 1
        return log

    def rollout(self, env, episodes: int, max_len: int, reset_seed: int | None = None):
        """Greedy evaluation rollouts: no noise, no learning, no storage."""
        returns, successes = [], 0
        for ep_i in range(episodes):
            o = env.reset(reset_seed if ep_i == 0 else None)
            reset_seed = None
            self.wm.reset()
            total = 0.0
            success = False
            for _ in range(max_len):
                a = self.act(o, explore=False)
                r, o_next, done = env.step(a)
                self.wm.push(np.asarray(o, dtype=np.float32).reshape(-1))
                total += r
                success = success or r == 1.0
                o = o_next
                if done:
                    break
            returns.append(total)
            successes += bool(success)
        return returns, successes / max(episodes, 1)


def _summarize(ep_i: int, seed: int, records: list[StepRecord]) -> EpisodeRecord:
    n = max(len(records), 1)
    return EpisodeRecord(
        episode=ep_i,
        seed=seed,
        sparse_return=float(sum(r.sparse_r for r in records)),
        combined_return=float(sum(r.r_t for r in records)),
        success=any(r.sparse_r == 1.0 for r in records),
        r_ep_mean=float(sum(r.r_ep for r in records) / n),
        r_in_mean=float(sum(r.r_in for r in records) / n),
        tod_gen_mean=float(sum(r.tod_gen for r in records) / n),
        steps=len(records),
    )
