"""Neural generative coding circuit.

A circuit is a stack of layers (index 0 = output, index L = input). Each
layer below the input carries a prediction of its own activity generated
from the layer above, an error population holding the mismatch, and a
settling process that relaxes the hidden states over ``k_steps`` discrete
steps. Learning is a local Hebbian outer product between a layer's error
and the (activated) state of the layer above; the whole process descends
the total discrepancy (sum of squared layer-wise errors).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalDivergenceError, ShapeError

STATE_LIMIT = 1e6

ACTIVATIONS = ("identity", "tanh", "relu", "relu6")
OUTPUT_FNS = ("identity", "scaled_tanh")


def _phi(name: str, v: np.ndarray) -> np.ndarray:
    if name == "identity":
        return v
    if name == "tanh":
        return np.tanh(v)
    if name == "relu":
        return np.maximum(v, 0)
    if name == "relu6":
        return np.clip(v, 0, 6)
    raise ValueError(f"unknown activation {name!r}")


def _dphi(name: str, v: np.ndarray) -> np.ndarray:
    # Subgradient 0 at the relu/relu6 kink points (deterministic convention).
    if name == "identity":
        return np.ones_like(v)
    if name == "tanh":
        t = np.tanh(v)
        return 1.0 - t * t
    if name == "relu":
        return (v > 0).astype(v.dtype)
    if name == "relu6":
        return ((v > 0) & (v < 6)).astype(v.dtype)
    raise ValueError(f"unknown activation {name!r}")


@dataclass(frozen=True)
class LayerSpec:
    """Size and nonlinearities of one circuit layer."""

    size: int
    activation: str = "identity"
    output_fn: str = "identity"
    kappa: float = 1.0

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("layer size must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.output_fn not in OUTPUT_FNS:
            raise ValueError(f"unknown output_fn {self.output_fn!r}")
        if self.output_fn == "scaled_tanh" and not self.kappa > 0:
            raise ValueError("scaled_tanh requires kappa > 0")

    def apply_output(self, v: np.ndarray) -> np.ndarray:
        if self.output_fn == "identity":
            return v
        return self.kappa * np.tanh(v)


@dataclass
class Clamp:
    """External constraints applied during a settling cycle.

    ``top`` pins the input layer, ``bottom`` pins the output layer, and
    ``output_error_override`` replaces the output error population with a
    supplied value (used to couple two circuits).
    """

    top: np.ndarray | None = None
    bottom: np.ndarray | None = None
    output_error_override: np.ndarray | None = None


def _as_col(v: np.ndarray, size: int, dtype, what: str) -> np.ndarray:
    arr = np.asarray(v, dtype=dtype)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != size:
        raise ShapeError(f"{what}: expected {size} rows, got shape {arr.shape}")
    return arr


class NgcCircuit:
    """A layered predict-then-correct circuit with local Hebbian learning.

    Parameter blocks are indexed by prediction site ``k`` (0..L-1): ``W[k]``
    maps the activity of layer ``k+1`` to the prediction of layer ``k``,
    ``E[k]`` feeds the layer-``k`` error back up to layer ``k+1``, ``M[k]``
    conditions the site on an external working-memory vector, and ``b[k]``
    is the prediction bias. States may carry a batch dimension (columns).
    """

    def __init__(
        self,
        layers: list[LayerSpec],
        *,
        beta: float = 0.1,
        leak: float = 0.0,
        k_steps: int = 15,
        gamma_e: float = 0.9,
        alpha_m: int = 0,
        memory_dim: int = 0,
        tied_feedback: bool = False,
        lambda_e: float = 1.0,
        row_norm_bound: float | None = 1.0,
        dtype=np.float32,
        rng: np.random.Generator | None = None,
    ):
        if len(layers) < 2:
            raise ValueError("a circuit needs at least an input and an output layer")
        if not 0 <= beta <= 1:
            raise ValueError("beta must lie in [0, 1]")
        if leak < 0:
            raise ValueError("leak must be >= 0")
        if k_steps < 0:
            raise ValueError("k_steps must be >= 0")
        if not 0 < gamma_e <= 1:
            raise ValueError("gamma_e must lie in (0, 1]")
        if alpha_m not in (0, 1):
            raise ValueError("alpha_m must be 0 or 1")
        if alpha_m == 1 and memory_dim <= 0:
            raise ValueError("alpha_m=1 requires a positive memory_dim")

        self.layers = list(layers)
        self.beta = float(beta)
        self.leak = float(leak)
        self.k_steps = int(k_steps)
        self.gamma_e = float(gamma_e)
        self.alpha_m = int(alpha_m)
        self.memory_dim = int(memory_dim)
        self.tied_feedback = bool(tied_feedback)
        self.lambda_e = float(lambda_e)
        self.row_norm_bound = row_norm_bound
        self.dtype = np.dtype(dtype)

        rng = rng if rng is not None else np.random.default_rng()
        L = self.num_sites
        self.W: list[np.ndarray] = []
        self.E: list[np.ndarray | None] = []
        self.M: list[np.ndarray | None] = []
        self.b: list[np.ndarray] = []
        for k in range(L):
            rows, cols = layers[k].size, layers[k + 1].size
            sigma = 0.1 / np.sqrt(cols)
            w = rng.normal(0.0, sigma, size=(rows, cols)).astype(self.dtype)
            self.W.append(w)
            self.E.append(None if tied_feedback else (self.lambda_e * w.T).copy())
            if memory_dim > 0:
                sig_m = 0.1 / np.sqrt(memory_dim)
                self.M.append(
                    rng.normal(0.0, sig_m, size=(rows, memory_dim)).astype(self.dtype)
                )
            else:
                self.M.append(None)
            self.b.append(np.zeros((rows, 1), dtype=self.dtype))

        self.z: list[np.ndarray] = [
            np.zeros((spec.size, 1), dtype=self.dtype) for spec in self.layers
        ]
        self.e: list[np.ndarray] = [
            np.zeros((self.layers[k].size, 1), dtype=self.dtype) for k in range(L)
        ]
        self._zbar: list[np.ndarray | None] = [None] * L

    # ---------------------------------------------------------------- shape

    @property
    def num_sites(self) -> int:
        return len(self.layers) - 1

    @property
    def input_dim(self) -> int:
        return self.layers[-1].size

    @property
    def output_dim(self) -> int:
        return self.layers[0].size

    def feedback(self, k: int) -> np.ndarray:
        """Error-feedback matrix for site k (derived from W when tied)."""
        if self.tied_feedback:
            return self.lambda_e * self.W[k].T
        return self.E[k]

    def _memory_col(self, memory: np.ndarray | None) -> np.ndarray | None:
        if self.alpha_m == 0:
            return None
        if memory is None:
            raise ShapeError("circuit uses memory synapses but no memory vector given")
        return _as_col(memory, self.memory_dim, self.dtype, "memory vector")

    # ------------------------------------------------------------- inference

    def predict_layer(self, layer: int, memory: np.ndarray | None = None) -> np.ndarray:
        """Prediction of ``layer`` generated from the layer above; no mutation."""
        if not 0 <= layer < self.num_sites:
            raise ShapeError(f"no prediction site for layer {layer}")
        above = self.layers[layer + 1]
        pre = self.W[layer] @ _phi(above.activation, self.z[layer + 1]) + self.b[layer]
        m = self._memory_col(memory)
        if m is not None:
            pre = pre + self.M[layer] @ m
        return self.layers[layer].apply_output(pre)

    def compute_errors(
        self, clamp: Clamp | None = None, memory: np.ndarray | None = None
    ) -> list[np.ndarray]:
        """Refresh predictions and mismatch signals e = z - z_pred for every site."""
        override = clamp.output_error_override if clamp is not None else None
        for k in range(self.num_sites):
            self._zbar[k] = self.predict_layer(k, memory)
            self.e[k] = self.z[k] - self._zbar[k]
        if override is not None:
            self.e[0] = np.broadcast_to(
                _as_col(override, self.output_dim, self.dtype, "error override"),
                self._zbar[0].shape,
            ).astype(self.dtype)
        return self.e

    def settle_step(self, clamp: Clamp | None = None) -> None:
        """One relaxation step of all non-clamped layers (Jacobi: every layer
        reads only the pre-step snapshot held in the current errors)."""
        clamp = clamp if clamp is not None else Clamp()
        new_z = list(self.z)
        for layer in range(1, self.num_sites):
            zl = self.z[layer]
            drive = (self.feedback(layer - 1) @ self.e[layer - 1]) * _dphi(
                self.layers[layer].activation, zl
            )
            new_z[layer] = zl + self.beta * (-self.leak * zl + drive - self.e[layer])
        if clamp.bottom is None and clamp.output_error_override is None:
            if self._zbar[0] is not None:
                new_z[0] = self._zbar[0].copy()
        for layer in range(self.num_sites):  # input layer stays clamped
            z = np.clip(new_z[layer], -STATE_LIMIT, STATE_LIMIT)
            if np.isnan(z).any():
                raise NumericalDivergenceError(layer)
            self.z[layer] = z.astype(self.dtype, copy=False)

    def settle(
        self, clamp: Clamp, memory: np.ndarray | None = None
    ) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Full settling cycle: clamp, initialise hidden states by ancestral
        projection, then run ``k_steps`` rounds of error computation and state
        relaxation. Returns the final states and errors."""
        if clamp.top is None and clamp.bottom is None:
            raise ShapeError("settle requires at least one of top/bottom clamps")
        if clamp.top is not None:
            self.project(clamp.top, memory)
        if clamp.bottom is not None:
            width = self.z[-1].shape[1] if clamp.top is not None else 1
            bottom = _as_col(clamp.bottom, self.output_dim, self.dtype, "bottom clamp")
            if bottom.shape[1] == 1 and width > 1:
                bottom = np.broadcast_to(bottom, (self.output_dim, width)).copy()
            self.z[0] = bottom.astype(self.dtype, copy=False)
        for _ in range(self.k_steps):
            self.compute_errors(clamp, memory)
            self.settle_step(clamp)
        return self.z, self.e

    def project(
        self, inputs: np.ndarray, memory: np.ndarray | None = None
    ) -> np.ndarray:
        """Ancestral projection: clamp the input layer and run a single
        top-down pass setting every layer to its prediction."""
        self.z[-1] = _as_col(inputs, self.input_dim, self.dtype, "projection input")
        width = self.z[-1].shape[1]
        for k in range(self.num_sites - 1, -1, -1):
            self.z[k] = self.predict_layer(k, memory)
        for k in range(self.num_sites):
            self._zbar[k] = self.z[k].copy()
            self.e[k] = np.zeros((self.layers[k].size, width), dtype=self.dtype)
        return self.z[0]

    # -------------------------------------------------------------- learning

    def compute_weight_updates(
        self, memory: np.ndarray | None = None
    ) -> dict[str, np.ndarray]:
        """Hebbian deltas from the current states/errors (not applied).

        Batched states contribute their mean. Deltas are ascent directions:
        adding them to the tensors reduces total discrepancy.
        """
        deltas: dict[str, np.ndarray] = {}
        m = self._memory_col(memory)
        for k in range(self.num_sites):
            batch = self.e[k].shape[1]
            pre = _phi(self.layers[k + 1].activation, self.z[k + 1])
            dW = (self.e[k] @ pre.T) / batch
            deltas[f"W{k}"] = dW
            if not self.tied_feedback:
                deltas[f"E{k}"] = self.gamma_e * dW.T
            if m is not None:
                mm = np.broadcast_to(m, (self.memory_dim, batch))
                deltas[f"M{k}"] = (self.e[k] @ mm.T) / batch
            deltas[f"b{k}"] = self.e[k].mean(axis=1, keepdims=True)
        return deltas

    def total_discrepancy(self) -> float:
        """Sum of squared prediction errors, halved; the settling objective."""
        return float(sum(0.5 * np.sum(e.astype(np.float64) ** 2) for e in self.e))

    # ----------------------------------------------------------- bookkeeping

    def tensors(self) -> dict[str, np.ndarray]:
        """All learnable tensors by name (views, not copies)."""
        out: dict[str, np.ndarray] = {}
        for k in range(self.num_sites):
            out[f"W{k}"] = self.W[k]
            if not self.tied_feedback:
                out[f"E{k}"] = self.E[k]
            if self.M[k] is not None:
                out[f"M{k}"] = self.M[k]
            out[f"b{k}"] = self.b[k]
        return out

    def set_tensor(self, name: str, value: np.ndarray) -> None:
        kind, k = name[0], int(name[1:])
        store = {"W": self.W, "E": self.E, "M": self.M, "b": self.b}[kind]
        if store[k] is None or store[k].shape != value.shape:
            raise ShapeError(f"tensor {name}: shape {value.shape} does not fit")
        store[k] = value.astype(self.dtype, copy=True)

    def renormalize_rows(self) -> None:
        """Rescale any W/E row whose L2 norm exceeds the configured bound."""
        if self.row_norm_bound is None:
            return
        bound = self.row_norm_bound
        mats = self.W if self.tied_feedback else self.W + [e for e in self.E]
        for mat in mats:
            norms = np.linalg.norm(mat, axis=1, keepdims=True)
            over = norms > bound
            if over.any():
                scale = np.where(over, bound / np.maximum(norms, 1e-12), 1.0)
                mat *= scale.astype(mat.dtype)

    def clone(self) -> "NgcCircuit":
        return copy.deepcopy(self)
