"""This module contains the DensityOperator class."""

from dataclasses import dataclass

import numpy as np

from src.core.exceptions import DimensionError, DomainError


@dataclass(frozen=True)
class DensityOperator:
    """Data class representing a state of a finite-dimensional quantum system."""

    rho: np.ndarray

    def __post_init__(self) -> None:
        rho = np.array(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise DimensionError(f"Density operator must be square, got shape {rho.shape}")
        if not np.all(np.isfinite(rho)):
            raise DomainError("Density operator has non-finite entries")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T)).min())
