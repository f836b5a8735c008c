"""Step-size adaptation for Hebbian deltas and target-circuit tracking."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError
from .ngc import NgcCircuit


class AdaptiveRule:
    """Adam-style moment scaling applied to ascent-direction deltas.

    The Hebbian deltas are ascent directions, so ``-delta`` plays the role
    of the gradient and the tensor moves along ``+delta`` scaled by the
    bias-corrected moments. A delta of exactly zero is a no-op regardless
    of accumulated moment state.
    """

    def __init__(
        self,
        eta: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        if eta < 0:
            raise ValueError("eta must be >= 0")
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise ValueError("moment decays must lie in [0, 1)")
        self.eta = float(eta)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.steps: dict[str, int] = {}

    def apply_update(self, name: str, tensor: np.ndarray, delta: np.ndarray) -> np.ndarray:
        """Move ``tensor`` along ``delta`` in place; returns the tensor."""
        if tensor.shape != delta.shape:
            raise ShapeError(
                f"{name}: delta shape {delta.shape} != tensor shape {tensor.shape}"
            )
        if not np.any(delta):
            return tensor
        if name not in self.m:
            self.m[name] = np.zeros_like(tensor, dtype=np.float64)
            self.v[name] = np.zeros_like(tensor, dtype=np.float64)
            self.steps[name] = 0
        grad = -delta.astype(np.float64)
        self.steps[name] += 1
        t = self.steps[name]
        self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * grad
        self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * grad * grad
        m_hat = self.m[name] / (1 - self.beta1**t)
        v_hat = self.v[name] / (1 - self.beta2**t)
        step = self.eta * m_hat / (np.sqrt(v_hat) + self.eps)
        tensor -= step.astype(tensor.dtype)
        return tensor

    def state(self) -> dict:
        return {"m": self.m, "v": self.v, "steps": dict(self.steps)}


def apply_circuit_updates(
    circuit: NgcCircuit, deltas: dict[str, np.ndarray], rule: AdaptiveRule
) -> None:
    """Apply a delta dict to a circuit's tensors, then re-normalize rows."""
    tensors = circuit.tensors()
    for name, delta in deltas.items():
        if name not in tensors:
            raise ShapeError(f"unknown tensor {name!r} for this circuit")
        rule.apply_update(name, tensors[name], delta)
    circuit.renormalize_rows()


def polyak(
    target: dict[str, np.ndarray], source: dict[str, np.ndarray], tau: float
) -> dict[str, np.ndarray]:
    """target <- tau*source + (1-tau)*target, element-wise, in place."""
    if not 0 <= tau <= 1:
        raise ValueError("tau must lie in [0, 1]")
    if set(target) != set(source):
        raise ShapeError("target/source tensor sets differ")
    for name, tgt in target.items():
        src = source[name]
        if tgt.shape != src.shape:
            raise ShapeError(f"{name}: shapes {tgt.shape} vs {src.shape}")
        tgt *= 1 - tau
        tgt += tau * src.astype(tgt.dtype)
    return target


def hard_sync(target: dict[str, np.ndarray], source: dict[str, np.ndarray]) -> None:
    """target <- source (used with a fixed sync period instead of Polyak)."""
    if set(target) != set(source):
        raise ShapeError("target/source tensor sets differ")
    for name, tgt in target.items():
        np.copyto(tgt, source[name])
