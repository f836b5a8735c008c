"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Tensor/vector dimensions do not match what an operation requires."""


class NumericalDivergenceError(RuntimeError):
    """A circuit state became NaN during settling; names the offending layer."""

    def __init__(self, layer: int, message: str | None = None):
        self.layer = layer
        super().__init__(message or f"state divergence in layer {layer}")


class FrozenCircuitError(RuntimeError):
    """Synaptic change was attempted on a frozen circuit."""


class MetricUndefinedError(ArithmeticError):
    """A metric's formula is undefined for the given series (e.g. max <= 0)."""


class CheckpointError(RuntimeError):
    """Checkpoint file is malformed or incompatible with the target agent."""
