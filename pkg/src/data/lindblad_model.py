"""This module contains the LindbladModel and FeedbackModel classes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from src.core.exceptions import DimensionError, DomainError


def _square(name: str, matrix: np.ndarray, dim: int = -1) -> np.ndarray:
    array = np.array(matrix, dtype=complex)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {array.shape}")
    if dim >= 0 and array.shape[0] != dim:
        raise DimensionError(f"{name} is {array.shape[0]}x{array.shape[0]}, expected {dim}x{dim}")
    if not np.all(np.isfinite(array)):
        raise DomainError(f"{name} has non-finite entries")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class NoiseChannel:
    """Data class holding one dissipative channel: a noise operator and its rate."""

    operator: np.ndarray
    rate: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "operator", _square("Noise operator", self.operator))
        if not np.isfinite(self.rate):
            raise DomainError("Noise rate must be finite")
        object.__setattr__(self, "rate", float(self.rate))


@dataclass(frozen=True)
class LindbladModel:
    """Data class representing a Hamiltonian plus noise channels of a Markovian generator."""

    hamiltonian: np.ndarray
    noise: Tuple[NoiseChannel, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        hamiltonian = _square("Hamiltonian", self.hamiltonian)
        noise = tuple(c if isinstance(c, NoiseChannel) else NoiseChannel(*c) for c in self.noise)
        for k, channel in enumerate(noise):
            _square(f"Noise operator {k}", channel.operator, hamiltonian.shape[0])
        object.__setattr__(self, "hamiltonian", hamiltonian)
        object.__setattr__(self, "noise", noise)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def absorbed_noise(self) -> Tuple[np.ndarray, ...]:
        """Noise operators with their rates absorbed, sqrt(rate) * L."""
        return tuple(np.sqrt(max(c.rate, 0.0)) * c.operator for c in self.noise)


@dataclass(frozen=True)
class FeedbackModel:
    """Data class representing the (H, M, F) triple of a Markovian feedback master equation."""

    hamiltonian: np.ndarray
    measurement: np.ndarray
    feedback: np.ndarray = None

    def __post_init__(self) -> None:
        hamiltonian = _square("Hamiltonian", self.hamiltonian)
        dim = hamiltonian.shape[0]
        feedback = np.zeros((dim, dim), dtype=complex) if self.feedback is None else self.feedback
        object.__setattr__(self, "hamiltonian", hamiltonian)
        object.__setattr__(self, "measurement", _square("Measurement operator", self.measurement, dim))
        object.__setattr__(self, "feedback", _square("Feedback Hamiltonian", feedback, dim))

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]
