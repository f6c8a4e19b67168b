"""Core series containers shared by the generators and the phase pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass
class TimeSeries:
    """Uniformly sampled real-valued signal.

    Sample ``i`` corresponds to time ``(start_index + i) / rate_hz`` seconds.
    """

    samples: np.ndarray
    rate_hz: float
    start_index: int = 0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.rate_hz <= 0:
            raise ValueError(f"rate_hz must be positive, got {self.rate_hz}")

    def __len__(self) -> int:
        return len(self.samples)

    def times(self) -> np.ndarray:
        """Sample times in seconds."""
        return (self.start_index + np.arange(len(self.samples))) / self.rate_hz


@dataclass
class PhaseSeries:
    """Instantaneous phase estimate in radians.

    ``burn_in`` marks the number of leading samples contaminated by the filter
    start-up transient; inference should use ``values[burn_in:]``.
    """

    values: np.ndarray
    rate_hz: float
    burn_in: int = 0
    straightened: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.rate_hz <= 0:
            raise ValueError(f"rate_hz must be positive, got {self.rate_hz}")

    def __len__(self) -> int:
        return len(self.values)

    def analysis_values(self) -> np.ndarray:
        """Values with the burn-in region removed."""
        return self.values[self.burn_in:]


def wrap_phase(values: np.ndarray) -> np.ndarray:
    """Wrap angles into (-pi, pi]."""
    values = np.asarray(values, dtype=float)
    wrapped = np.mod(values + np.pi, TWO_PI) - np.pi
    # np.mod maps exact multiples of 2*pi to -pi; the convention here is (-pi, pi]
    wrapped[wrapped == -np.pi] = np.pi
    return wrapped
