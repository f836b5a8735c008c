"""The four specialized circuits of the agent (actor, critic, world model,
prior preference) and the operations that couple them."""

from __future__ import annotations

import numpy as np

from .errors import FrozenCircuitError, ShapeError
from .memory import ActorBuffer, Transition
from .ngc import Clamp, LayerSpec, NgcCircuit
from .optim import AdaptiveRule, apply_circuit_updates, hard_sync, polyak


def _stack(vecs, dtype=np.float32) -> np.ndarray:
    """Column-stack a list of 1-D vectors into a (dim, batch) matrix."""
    return np.stack([np.asarray(v, dtype=dtype).reshape(-1) for v in vecs], axis=1)


def _build_core(
    in_dim: int,
    out_dim: int,
    hidden: tuple[int, ...],
    activation: str,
    *,
    output_fn: str = "identity",
    kappa: float = 1.0,
    alpha_m: int = 0,
    memory_dim: int = 0,
    rng=None,
    **ngc_kwargs,
) -> NgcCircuit:
    layers = [LayerSpec(out_dim, "identity", output_fn, kappa)]
    layers += [LayerSpec(h, activation) for h in hidden]
    layers += [LayerSpec(in_dim, "identity")]
    return NgcCircuit(
        layers,
        alpha_m=alpha_m,
        memory_dim=memory_dim,
        rng=rng,
        **ngc_kwargs,
    )


class _TargetedCircuit:
    """Base for circuits that keep a slowly tracking target copy."""

    core: NgcCircuit
    target: NgcCircuit

    def __init__(self, tau: float = 0.005, sync_period: int | None = None):
        self.tau = float(tau)
        self.sync_period = sync_period

    def init_target(self) -> None:
        self.target = self.core.clone()

    def sync_target(self, step: int | None = None) -> None:
        """Polyak-track the live circuit, or hard-copy every ``sync_period``
        steps when a period is configured."""
        if self.sync_period is not None:
            if step is not None and step % self.sync_period == 0:
                hard_sync(self.target.tensors(), self.core.tensors())
        else:
            polyak(self.target.tensors(), self.core.tensors(), self.tau)


class ActorCircuit(_TargetedCircuit):
    """Motor circuit: observation in, bounded continuous action out."""

    def __init__(
        self,
        obs_dim: int,
        action_dim: int,
        *,
        hidden: tuple[int, ...] = (256, 256),
        activation: str = "relu6",
        kappa: float = 1.0,
        memory_dim: int = 0,
        tau: float = 0.005,
        sync_period: int | None = None,
        rng=None,
        **ngc_kwargs,
    ):
        super().__init__(tau, sync_period)
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.kappa = float(kappa)
        self.core = _build_core(
            obs_dim,
            action_dim,
            hidden,
            activation,
            output_fn="scaled_tanh",
            kappa=kappa,
            alpha_m=1 if memory_dim > 0 else 0,
            memory_dim=memory_dim,
            rng=rng,
            **ngc_kwargs,
        )
        self.init_target()

    def act(
        self,
        o: np.ndarray,
        memory: np.ndarray | None = None,
        noise_std: float = 0.0,
        rng: np.random.Generator | None = None,
    ) -> np.ndarray:
        """Ancestral projection with optional exploration noise; always
        clipped back inside the action bounds."""
        a = self.core.project(np.asarray(o, dtype=self.core.dtype), memory)
        a = a.reshape(-1).copy()
        if noise_std > 0:
            if rng is None:
                raise ValueError("noise requires an rng")
            a += rng.normal(0.0, noise_std, size=a.shape).astype(a.dtype)
        return np.clip(a, -self.kappa, self.kappa)


class PolicyCircuit(_TargetedCircuit):
    """Critic: maps an action/observation pair to one value per action
    component. Carries two output error populations switched by ``u_a``:
    the ordinary mismatch when training itself, and a constant uniform
    error used to steer the actor when the two circuits are coupled."""

    def __init__(
        self,
        obs_dim: int,
        action_dim: int,
        *,
        hidden: tuple[int, ...] = (256, 256),
        activation: str = "relu6",
        discount: float = 0.99,
        memory_dim: int = 0,
        tau: float = 0.005,
        sync_period: int | None = None,
        rng=None,
        **ngc_kwargs,
    ):
        super().__init__(tau, sync_period)
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.discount = float(discount)
        self.u_a = 0
        # Memory synapses are allocated for parity with the other circuits
        # but gated off (alpha_m=0): the critic gets no working-memory term.
        self.core = _build_core(
            action_dim + obs_dim,
            action_dim,
            hidden,
            activation,
            alpha_m=0,
            memory_dim=memory_dim,
            rng=rng,
            **ngc_kwargs,
        )
        self.init_target()

    def actor_steering_error(self) -> np.ndarray:
        """The constant output error used while coupled to the actor."""
        a = self.action_dim
        return np.full((a, 1), -1.0 / a, dtype=self.core.dtype)

    def effective_output_error(self) -> np.ndarray:
        """u_a selects exactly one of the two output error populations."""
        e_p = self.core.e[0]
        e_a = np.broadcast_to(self.actor_steering_error(), e_p.shape)
        return self.u_a * e_a + (1 - self.u_a) * e_p

    def action_feedback(self) -> np.ndarray:
        """Error message the critic sends back to its action inputs: the
        top feedback synapses applied to the top hidden layer's error,
        restricted to the action rows."""
        top = self.core.num_sites - 1
        d = self.core.feedback(top) @ self.core.e[top]
        return d[: self.action_dim]


class GeneratorCircuit:
    """World model: predicts the next observation from (action, observation)."""

    def __init__(
        self,
        obs_dim: int,
        action_dim: int,
        *,
        hidden: tuple[int, ...] = (256, 256),
        activation: str = "relu6",
        memory_dim: int = 0,
        rng=None,
        **ngc_kwargs,
    ):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.core = _build_core(
            action_dim + obs_dim,
            obs_dim,
            hidden,
            activation,
            alpha_m=1 if memory_dim > 0 else 0,
            memory_dim=memory_dim,
            rng=rng,
            **ngc_kwargs,
        )

    def settle_transition(
        self, tr: Transition, memory: np.ndarray | None = None
    ) -> list[np.ndarray]:
        """Settle on one transition; returns the per-layer error vectors."""
        top = np.concatenate(
            [np.asarray(tr.a).reshape(-1), np.asarray(tr.o).reshape(-1)]
        )
        _, errors = self.core.settle(
            Clamp(top=top, bottom=np.asarray(tr.o_next).reshape(-1)), memory
        )
        return [e.copy() for e in errors]


class PriorCircuit:
    """Preference model trained on demonstrations then frozen: predicts the
    next observation along goal-reaching trajectories."""

    def __init__(
        self,
        obs_dim: int,
        *,
        hidden: tuple[int, ...] = (256, 256),
        activation: str = "relu6",
        memory_dim: int = 0,
        rng=None,
        **ngc_kwargs,
    ):
        self.obs_dim = obs_dim
        self.frozen = False
        self.core = _build_core(
            obs_dim,
            obs_dim,
            hidden,
            activation,
            alpha_m=1 if memory_dim > 0 else 0,
            memory_dim=memory_dim,
            rng=rng,
            **ngc_kwargs,
        )

    def settle_transition(
        self, o: np.ndarray, o_next: np.ndarray, memory: np.ndarray | None = None
    ) -> list[np.ndarray]:
        _, errors = self.core.settle(
            Clamp(top=np.asarray(o).reshape(-1), bottom=np.asarray(o_next).reshape(-1)),
            memory,
        )
        return [e.copy() for e in errors]

    def apply_updates(self, deltas, rule: AdaptiveRule) -> None:
        if self.frozen:
            raise FrozenCircuitError("prior circuit is frozen; updates rejected")
        apply_circuit_updates(self.core, deltas, rule)


# --------------------------------------------------------------- operations


def compute_td_target(
    policy: PolicyCircuit,
    actor: ActorCircuit,
    batch: list[Transition],
    memory: np.ndarray | None = None,
) -> np.ndarray:
    """Bootstrapped value targets, one column per transition.

    Terminal transitions collapse to the reward broadcast over all action
    components; otherwise the target actor proposes the next action and the
    target critic values it.
    """
    dtype = policy.core.dtype
    o_next = _stack([tr.o_next for tr in batch], dtype)
    r = np.asarray([tr.r for tr in batch], dtype=dtype)
    term = np.asarray([tr.terminal for tr in batch], dtype=bool)
    a_next = actor.target.project(o_next, memory)
    c = policy.target.project(np.concatenate([a_next, o_next], axis=0))
    t = r[None, :] + policy.discount * c
    t[:, term] = r[term][None, :]
    return t.astype(dtype)


def update_policy(
    policy: PolicyCircuit,
    batch: list[Transition],
    targets: np.ndarray,
    rule: AdaptiveRule,
    step: int | None = None,
) -> dict[str, np.ndarray]:
    """Settle the critic on (action, observation) -> target and apply the
    batch-mean Hebbian deltas, then move the target copy."""
    if policy.u_a != 0:
        raise ValueError("policy updates require u_a = 0")
    dtype = policy.core.dtype
    top = np.concatenate(
        [_stack([tr.a for tr in batch], dtype), _stack([tr.o for tr in batch], dtype)],
        axis=0,
    )
    policy.core.settle(Clamp(top=top, bottom=targets))
    deltas = policy.core.compute_weight_updates()
    apply_circuit_updates(policy.core, deltas, rule)
    policy.sync_target(step)
    return deltas


def update_actor_coupled(
    actor: ActorCircuit,
    policy: PolicyCircuit,
    observations: np.ndarray,
    rule: AdaptiveRule,
    memory: np.ndarray | None = None,
    step: int | None = None,
) -> dict[str, np.ndarray]:
    """Briefly link actor and critic and settle them jointly to produce
    actor updates.

    The critic's output error population is switched (u_a=1) to a constant
    uniform vector; the resulting error message at its action inputs is
    clamped, re-computed every settling step, onto the actor's output error
    neurons. Only actor synapses change.
    """
    observations = np.asarray(observations, dtype=actor.core.dtype)
    if observations.ndim == 1:
        observations = observations[:, None]
    a = actor.core.project(observations, memory)

    policy.u_a = 1
    try:
        top = np.concatenate([a, observations], axis=0)
        policy.core.project(top)
        steer = policy.actor_steering_error()
        policy_clamp = Clamp(top=top, output_error_override=steer)
        actor_clamp = Clamp(top=observations)
        for _ in range(actor.core.k_steps):
            policy.core.compute_errors(policy_clamp)
            # Sign: the critic settles *down* its clamped pseudo-objective,
            # so its raw action feedback points toward lower value; the
            # actor must follow the ascent direction instead.
            d_a = -policy.action_feedback()
            actor_clamp.output_error_override = d_a
            actor.core.compute_errors(actor_clamp, memory)
            policy.core.settle_step(policy_clamp)
            actor.core.settle_step(actor_clamp)
        deltas = actor.core.compute_weight_updates(memory)
    finally:
        policy.u_a = 0
    apply_circuit_updates(actor.core, deltas, rule)
    actor.sync_target(step)
    return deltas


def actor_refresh(
    actor: ActorCircuit,
    buf: ActorBuffer,
    batch: int,
    rule: AdaptiveRule,
    rng: np.random.Generator,
    memory: np.ndarray | None = None,
) -> dict[str, np.ndarray] | None:
    """Self-imitation step: regress the actor onto (observation, action)
    pairs from stored goal-reaching episodes. No-op on an empty buffer."""
    pairs = buf.sample_transitions(batch, rng)
    if not pairs:
        return None
    dtype = actor.core.dtype
    obs = _stack([tr.o for tr in pairs], dtype)
    acts = _stack([tr.a for tr in pairs], dtype)
    actor.core.settle(Clamp(top=obs, bottom=acts), memory)
    deltas = actor.core.compute_weight_updates(memory)
    apply_circuit_updates(actor.core, deltas, rule)
    return deltas


def update_generator(
    gen: GeneratorCircuit,
    tr: Transition,
    rule: AdaptiveRule,
    memory: np.ndarray | None = None,
) -> tuple[list[np.ndarray], dict[str, np.ndarray]]:
    """Settle the world model on a transition and apply its Hebbian deltas;
    returns the per-layer errors for the reward machinery."""
    errors = gen.settle_transition(tr, memory)
    deltas = gen.core.compute_weight_updates(memory)
    apply_circuit_updates(gen.core, deltas, rule)
    return errors, deltas


def pretrain_prior(
    prior: PriorCircuit,
    demos: list[list[Transition]],
    epochs: int,
    rule: AdaptiveRule,
    wm=None,
) -> PriorCircuit:
    """Train the preference model on demonstration transitions for a number
    of passes, then freeze it."""
    if prior.frozen:
        raise FrozenCircuitError("prior is already frozen")
    if not demos:
        raise ValueError("demonstration set must be non-empty")
    for _ in range(epochs):
        for episode in demos:
            if wm is not None:
                wm.reset()
            for tr in episode:
                m = wm.vector() if wm is not None else None
                prior.settle_transition(tr.o, tr.o_next, m)
                deltas = prior.core.compute_weight_updates(m)
                prior.apply_updates(deltas, rule)
                if wm is not None:
                    wm.push(tr.o)
    prior.frozen = True
    return prior
