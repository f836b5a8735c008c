"""Internal reward signals derived from circuit error magnitudes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RewardState:
    """Running normalizers and weights for the two internal signals.

    The maxima start at 1 and never decrease, which pins the exploration
    signal to [0, 1] and the goal-seeking signal to [-1, 0] without any
    epsilon guard.
    """

    r_ep_max: float = 1.0
    r_in_max: float = 1.0
    alpha_ep: float = 1.0
    alpha_in: float = 1.0

    def epistemic(self, errors: list[np.ndarray]) -> float:
        """Normalized squared-error mass of the world model's settle."""
        raw = _squared_error_mass(errors)
        self.r_ep_max = max(self.r_ep_max, raw)
        return raw / self.r_ep_max

    def instrumental(self, errors: list[np.ndarray]) -> float:
        """Negative normalized squared-error mass of the frozen prior's settle."""
        raw = _squared_error_mass(errors)
        self.r_in_max = max(self.r_in_max, raw)
        return -raw / self.r_in_max

    def combine(self, r_ep: float, r_in: float) -> float:
        return self.alpha_in * r_in + self.alpha_ep * r_ep


def _squared_error_mass(errors: list[np.ndarray]) -> float:
    return float(sum(np.sum(np.asarray(e, dtype=np.float64) ** 2) for e in errors))
