"""This module contains the SubspaceBasis class."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.core.exceptions import DimensionError, DomainError

ORTHONORMAL_TOL = 1e-10


@dataclass(frozen=True)
class SubspaceBasis:
    """Data class holding an orthonormal frame as the columns of an ``ambient_dim x dim`` array."""

    vectors: np.ndarray

    def __post_init__(self) -> None:
        frame = np.asarray(self.vectors, dtype=complex)
        if frame.ndim != 2:
            raise DimensionError(f"Subspace frame must be two-dimensional, got shape {frame.shape}")
        if frame.shape[1] > frame.shape[0]:
            raise DimensionError(f"Frame holds {frame.shape[1]} vectors in a {frame.shape[0]}-dimensional space")
        if not np.all(np.isfinite(frame)):
            raise DomainError("Subspace frame has non-finite entries")
        if frame.shape[1]:
            residual = np.linalg.norm(frame.conj().T @ frame - np.eye(frame.shape[1]))
            if residual > ORTHONORMAL_TOL:
                raise DomainError(f"Subspace frame is not orthonormal (residual {residual:.3e})")
        frame.setflags(write=False)
        object.__setattr__(self, "vectors", frame)

    @classmethod
    def zero(cls, ambient_dim: int) -> SubspaceBasis:
        """The zero subspace of a given ambient space."""
        return cls(np.zeros((ambient_dim, 0), dtype=complex))

    @classmethod
    def full(cls, ambient_dim: int) -> SubspaceBasis:
        """The whole ambient space in its standard frame."""
        return cls(np.eye(ambient_dim, dtype=complex))

    @classmethod
    def span(cls, *columns: np.ndarray) -> SubspaceBasis:
        """Frame for the span of already orthonormal column vectors."""
        return cls(np.column_stack([np.asarray(c, dtype=complex).ravel() for c in columns]))

    @property
    def ambient_dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def is_zero(self) -> bool:
        return self.dim == 0

    @property
    def projector(self) -> np.ndarray:
        """Orthogonal projector onto the subspace."""
        return self.vectors @ self.vectors.conj().T

    def contains(self, other: SubspaceBasis, tol: float = 1e-10) -> bool:
        """Returns True if every vector of ``other`` lies in this subspace up to ``tol``."""
        if other.ambient_dim != self.ambient_dim:
            raise DimensionError("Subspaces live in different ambient spaces")
        if other.is_zero:
            return True
        return bool(np.linalg.norm(other.vectors - self.projector @ other.vectors) <= tol)
