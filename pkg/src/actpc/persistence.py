"""Binary agent checkpoints.

Container layout: 8 magic bytes, a little-endian uint32 header length, a
UTF-8 JSON header, then every tensor as row-major little-endian float32 in
header order. 64-bit data (optimizer moments, stored rewards) is carried
bit-exactly by viewing it as float32 with doubled columns, flagged by the
tensor's role, so resumed training matches uninterrupted training to the
bit. Writes are atomic (temp file + rename).
"""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

from .agent import ActPcAgent
from .config import AgentConfig
from .errors import CheckpointError
from .memory import Transition

MAGIC = b"ACTPCNGC"
VERSION = 1

ROLE_F32 = "weights-f32"
ROLE_F64 = "packed-f64"


def _as_f32_payload(arr: np.ndarray, role: str) -> np.ndarray:
    if role == ROLE_F64:
        return np.ascontiguousarray(arr, dtype=np.float64).view(np.float32)
    return np.ascontiguousarray(arr, dtype=np.float32)


def _from_f32_payload(arr: np.ndarray, role: str) -> np.ndarray:
    if role == ROLE_F64:
        return np.ascontiguousarray(arr).view(np.float64)
    return arr


def _circuit_map(agent: ActPcAgent) -> dict:
    return {
        "actor": agent.actor.core,
        "target_actor": agent.actor.target,
        "policy": agent.policy.core,
        "target_policy": agent.policy.target,
        "gen": agent.generator.core,
        "prior": agent.prior.core,
    }


def _rule_map(agent: ActPcAgent) -> dict:
    return {
        "actor": agent.rule_actor,
        "policy": agent.rule_policy,
        "gen": agent.rule_generator,
        "prior": agent.rule_prior,
    }


def _identity_hash(config: AgentConfig, obs_dim, action_dim, action_bound, seed) -> str:
    import hashlib

    payload = {
        "config": config.to_dict(),
        "obs_dim": int(obs_dim),
        "action_dim": int(action_dim),
        "action_bound": float(action_bound),
        "seed": int(seed),
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _pack_transitions(entries, prefix: str, trs: list[Transition]) -> None:
    if not trs:
        return
    o = np.stack([np.asarray(t.o, dtype=np.float32) for t in trs], axis=1)
    a = np.stack([np.asarray(t.a, dtype=np.float32) for t in trs], axis=1)
    o_next = np.stack([np.asarray(t.o_next, dtype=np.float32) for t in trs], axis=1)
    scalars = np.array(
        [
            [t.r for t in trs],
            [1.0 if t.terminal else 0.0 for t in trs],
            [t.sparse_r for t in trs],
        ],
        dtype=np.float64,
    )
    entries.append((f"{prefix}/o", ROLE_F32, o))
    entries.append((f"{prefix}/a", ROLE_F32, a))
    entries.append((f"{prefix}/o_next", ROLE_F32, o_next))
    entries.append((f"{prefix}/scalars", ROLE_F64, scalars))


def _unpack_transitions(tensors: dict, prefix: str) -> list[Transition]:
    if f"{prefix}/o" not in tensors:
        return []
    o = tensors[f"{prefix}/o"]
    a = tensors[f"{prefix}/a"]
    o_next = tensors[f"{prefix}/o_next"]
    scalars = tensors[f"{prefix}/scalars"]
    out = []
    for i in range(o.shape[1]):
        out.append(
            Transition(
                o=o[:, i].copy(),
                a=a[:, i].copy(),
                r=float(scalars[0, i]),
                o_next=o_next[:, i].copy(),
                terminal=bool(scalars[1, i]),
                sparse_r=float(scalars[2, i]),
            )
        )
    return out


def save(agent: ActPcAgent, path, include_buffers: bool = False) -> None:
    """Write the full agent state; buffers only when asked (file size)."""
    entries: list[tuple[str, str, np.ndarray]] = []
    for prefix, circuit in _circuit_map(agent).items():
        for name, tensor in circuit.tensors().items():
            entries.append((f"{prefix}/{name}", ROLE_F32, tensor))
    for rname, rule in _rule_map(agent).items():
        for tname in sorted(rule.m):
            entries.append((f"opt/{rname}/m/{tname}", ROLE_F64, rule.m[tname]))
            entries.append((f"opt/{rname}/v/{tname}", ROLE_F64, rule.v[tname]))
    entries.append(("wm/Q", ROLE_F32, agent.wm.Q))
    wm_hist = list(agent.wm.history)
    if wm_hist:
        entries.append(("wm/history", ROLE_F32, np.stack(wm_hist, axis=1)))

    buffers_meta = None
    if include_buffers:
        _pack_transitions(entries, "buf/replay", list(agent.replay._items))
        flat_actor = [tr for ep in agent.actor_buffer.episodes for tr in ep]
        _pack_transitions(entries, "buf/actor", flat_actor)
        _pack_transitions(entries, "buf/demo", agent.demo_transitions)
        buffers_meta = {
            "replay_cursor": agent.replay._cursor,
            "actor_episode_lens": [len(ep) for ep in agent.actor_buffer.episodes],
            "actor_best_return": agent.actor_buffer.best_return,
        }

    payloads = [_as_f32_payload(arr, role) for _, role, arr in entries]
    header = {
        "version": VERSION,
        "kind": "actpc-agent",
        "config": agent.config.to_dict(),
        "obs_dim": agent.obs_dim,
        "action_dim": agent.action_dim,
        "action_bound": agent.action_bound,
        "seed": agent.seed,
        "config_hash": _identity_hash(
            agent.config, agent.obs_dim, agent.action_dim, agent.action_bound, agent.seed
        ),
        "scalars": {
            "r_ep_max": agent.reward_state.r_ep_max,
            "r_in_max": agent.reward_state.r_in_max,
            "total_steps": agent.total_steps,
            "episodes_done": agent.episodes_done,
            "prior_frozen": agent.prior.frozen,
            "wm_len": len(wm_hist),
        },
        "rule_steps": {r: dict(rule.steps) for r, rule in _rule_map(agent).items()},
        "rng_state": agent.rng.bit_generator.state,
        "buffers": buffers_meta,
        "tensors": [
            {"name": n, "role": role, "rows": p.shape[0], "cols": p.shape[1]}
            for (n, role, _), p in zip(entries, payloads)
        ],
    }
    blob = json.dumps(header).encode("utf-8")

    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            for p in payloads:
                fh.write(p.astype("<f4", copy=False).tobytes(order="C"))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_container(path) -> tuple[dict, dict]:
    """Parse a container file into (header, {tensor name: array})."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"bad container magic in {path}")
    (hlen,) = struct.unpack_from("<I", raw, len(MAGIC))
    start = len(MAGIC) + 4
    if len(raw) < start + hlen:
        raise CheckpointError(f"truncated container header in {path}")
    try:
        header = json.loads(raw[start : start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable container header in {path}: {exc}") from exc
    offset = start + hlen
    tensors: dict[str, np.ndarray] = {}
    for entry in header.get("tensors", ()):
        name, role = entry["name"], entry["role"]
        rows, cols = int(entry["rows"]), int(entry["cols"])
        nbytes = rows * cols * 4
        if offset + nbytes > len(raw):
            raise CheckpointError(f"truncated container payload at tensor {name!r}")
        flat = np.frombuffer(raw, dtype="<f4", count=rows * cols, offset=offset)
        offset += nbytes
        tensors[name] = _from_f32_payload(
            flat.astype(np.float32).reshape(rows, cols), role
        )
    if offset != len(raw):
        raise CheckpointError(f"trailing bytes after payload in {path}")
    return header, tensors


def load(path, force: bool = False) -> ActPcAgent:
    """Rebuild an agent from a container file.

    The agent is first constructed from the stored config/seed and then every
    tensor, moment, counter and random-generator state is overwritten, so the
    result is bit-identical to the agent that was saved.
    """
    header, tensors = read_container(path)
    if header.get("kind") != "actpc-agent":
        raise CheckpointError(f"{path} is not an agent checkpoint")
    if header.get("version") != VERSION and not force:
        raise CheckpointError(
            f"checkpoint version {header.get('version')} != {VERSION} (use force)"
        )
    config = AgentConfig.from_dict(header["config"])
    expected = _identity_hash(
        config,
        header["obs_dim"],
        header["action_dim"],
        header["action_bound"],
        header["seed"],
    )
    if header.get("config_hash") != expected and not force:
        raise CheckpointError("checkpoint config hash mismatch (use force)")

    agent = ActPcAgent(
        config,
        header["obs_dim"],
        header["action_dim"],
        header["action_bound"],
        seed=header["seed"],
    )
    circuits = _circuit_map(agent)
    for name, value in tensors.items():
        parts = name.split("/")
        if parts[0] in circuits:
            try:
                circuits[parts[0]].set_tensor(parts[1], value)
            except Exception as exc:
                raise CheckpointError(f"tensor {name!r} does not fit: {exc}") from exc
    rules = _rule_map(agent)
    for rname, steps in header.get("rule_steps", {}).items():
        rule = rules[rname]
        for tname, count in steps.items():
            m = tensors.get(f"opt/{rname}/m/{tname}")
            v = tensors.get(f"opt/{rname}/v/{tname}")
            if m is None or v is None:
                raise CheckpointError(f"missing optimizer moments for {rname}/{tname}")
            rule.m[tname] = m.copy()
            rule.v[tname] = v.copy()
            rule.steps[tname] = int(count)

    scalars = header["scalars"]
    agent.reward_state.r_ep_max = float(scalars["r_ep_max"])
    agent.reward_state.r_in_max = float(scalars["r_in_max"])
    agent.total_steps = int(scalars["total_steps"])
    agent.episodes_done = int(scalars["episodes_done"])
    agent.prior.frozen = bool(scalars["prior_frozen"])
    agent.rng.bit_generator.state = header["rng_state"]

    agent.wm.Q = tensors["wm/Q"].astype(agent.wm.dtype).copy()
    agent.wm.reset()
    if int(scalars.get("wm_len", 0)):
        hist = tensors["wm/history"]
        for i in range(hist.shape[1]):
            agent.wm.history.append(hist[:, i].astype(agent.wm.dtype).copy())

    meta = header.get("buffers")
    if meta is not None:
        agent.replay._items = _unpack_transitions(tensors, "buf/replay")
        agent.replay._cursor = int(meta["replay_cursor"])
        flat_actor = _unpack_transitions(tensors, "buf/actor")
        agent.actor_buffer.episodes = []
        pos = 0
        for n in meta["actor_episode_lens"]:
            agent.actor_buffer.episodes.append(flat_actor[pos : pos + n])
            pos += n
        agent.actor_buffer.best_return = float(meta["actor_best_return"])
        agent.demo_transitions = _unpack_transitions(tensors, "buf/demo")
    return agent


def check_env_compat(agent: ActPcAgent, env) -> None:
    """Raise a descriptive error when a checkpoint cannot drive an env."""
    spec = env.spec
    if agent.obs_dim != spec.obs_dim:
        raise CheckpointError(
            f"checkpoint observation dim {agent.obs_dim} != env {spec.obs_dim} "
            f"(tensor actor/W{len(agent.config.hidden)})"
        )
    if agent.action_dim != spec.action_dim:
        raise CheckpointError(
            f"checkpoint action dim {agent.action_dim} != env {spec.action_dim} "
            "(tensor actor/W0)"
        )
    if agent.action_bound != spec.action_bound:
        raise CheckpointError(
            f"checkpoint action bound {agent.action_bound} != env {spec.action_bound}"
        )
