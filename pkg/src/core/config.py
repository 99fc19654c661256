"""This module contains the configuration classes for analysis, synthesis and simulation."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum, auto
from typing import Optional

import numpy as np

from src.utils.settings import RuntimeSettings

_SETTINGS = RuntimeSettings()


class TargetKind(Enum):
    """Enum for the kinds of stabilization targets."""

    PURE_STATE = "pure_state"
    SUBSPACE = "subspace"
    SUBSYSTEM = "subsystem"


class FactorSide(Enum):
    """Enum for the side of a one-sided tensor factorization I_S⊗C_F or C_S⊗I_F."""

    IDENTITY_ON_S = auto()
    IDENTITY_ON_F = auto()


class ExitCode(IntEnum):
    """Process exit codes of the command-line surface."""

    SUCCESS = 0
    INPUT_ERROR = 1
    INVARIANT_ONLY = 2
    NOT_INVARIANT = 3
    INFEASIBLE = 4


@dataclass
class ToleranceConfig:
    """Configuration for numerical tolerances"""

    # Rank decisions, relative to the operator scale
    tol: float = _SETTINGS.tol

    # Structural checks on inputs
    hermitian_tol: float = 1e-10
    orthonormal_tol: float = 1e-10
    trace_tol: float = 1e-10
    positivity_tol: float = 1e-9

    # Propagated states may dip this far below zero before it counts as a failure
    trajectory_positivity_tol: float = 1e-7

    def __post_init__(self) -> None:
        self._validate_tolerances()

    def _validate_tolerances(self) -> None:
        for name in ("tol", "hermitian_tol", "orthonormal_tol", "trace_tol", "positivity_tol"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ValueError(f"Tolerance {name} must lie in (0, 1), got {value}")
        if self.trajectory_positivity_tol < self.positivity_tol:
            raise ValueError("Trajectory positivity tolerance must not be tighter than the state tolerance")


@dataclass
class SynthesisConfig:
    """Configuration for controller synthesis"""

    coupling_scale: float = _SETTINGS.coupling_scale
    seed: int = 0
    strict_initfree: bool = False

    # None bounds the open-loop iteration by dim(H_R')
    max_rounds: Optional[int] = None

    def __post_init__(self) -> None:
        self._validate_synthesis()

    def _validate_synthesis(self) -> None:
        if not np.isfinite(self.coupling_scale) or self.coupling_scale <= 0:
            raise ValueError("Coupling scale must be a positive finite number")
        if self.seed < 0:
            raise ValueError("Seed must be non-negative")
        if self.max_rounds is not None and self.max_rounds < 0:
            raise ValueError("Maximum number of rounds must be non-negative")


@dataclass
class SimulationConfig:
    """Configuration for propagation and Monte Carlo verification"""

    horizon: Optional[float] = None
    steps: int = 200
    ensemble: int = 20
    eps: float = 1e-6
    seed: int = 0
    max_dim: int = _SETTINGS.max_dim

    def __post_init__(self) -> None:
        self._validate_simulation()

    def _validate_simulation(self) -> None:
        if self.horizon is not None and self.horizon < 0:
            raise ValueError("Simulation horizon must be non-negative")
        if self.steps < 1:
            raise ValueError("Number of steps must be at least 1")
        if self.ensemble < 1:
            raise ValueError("Ensemble size must be at least 1")
        if not 0 < self.eps < 1:
            raise ValueError("Verification threshold eps must lie in (0, 1)")
        if self.max_dim < 1:
            raise ValueError("Maximum dimension must be positive")

    def sample_times(self, horizon: float) -> np.ndarray:
        """
        Build the sampling grid of a trajectory.

        :param horizon: Final time T.
        :return: ``[0]`` when T is zero, otherwise ``steps + 1`` equally spaced times on [0, T].
        """
        if horizon == 0:
            return np.zeros(1)
        return np.linspace(0.0, horizon, self.steps + 1)


@dataclass
class StabilizerConfig:
    """Configuration for a complete analyze/synthesize/verify run"""

    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)

    def __post_init__(self) -> None:
        self._validate_config()

    def _validate_config(self) -> None:
        """Validate the combined configuration."""
        if self.simulation.eps <= self.tolerances.tol:
            raise ValueError("Verification threshold must be looser than the rank tolerance")
