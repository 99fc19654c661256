"""This module contains the Trajectory and VerificationResult classes."""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from src.data.density_operator import DensityOperator


@dataclass(frozen=True)
class Trajectory:
    """Data class representing sampled states of a propagated model."""

    times: np.ndarray
    states: Tuple[DensityOperator, ...]
    model_digest: str

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=float).ravel()
        if times.size != len(self.states):
            raise ValueError(f"{times.size} sample times for {len(self.states)} states")
        if times.size and times[0] != 0:
            raise ValueError(f"Sample times must start at 0, got {times[0]}")
        if np.any(np.diff(times) <= 0):
            raise ValueError("Sample times must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", tuple(self.states))

    @property
    def final_state(self) -> DensityOperator:
        return self.states[-1]


@dataclass
class VerificationResult:
    """Data class holding the outcome of a Monte Carlo convergence check."""

    passed: bool
    worst_deficit: float
    worst_initial_state: Optional[DensityOperator]
    worst_seed: Optional[int]
    horizon: float
    eps: float
    deficits: List[float] = field(default_factory=list)
