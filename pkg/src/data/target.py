"""This module contains the SpaceDecomposition and TargetSpec classes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg

from src.core.config import TargetKind
from src.core.exceptions import DimensionError, DomainError
from src.data.subspace_basis import ORTHONORMAL_TOL, SubspaceBasis


def _complement(frame: np.ndarray) -> np.ndarray:
    if frame.shape[1] == 0:
        return np.eye(frame.shape[0], dtype=complex)
    return scipy.linalg.null_space(frame.conj().T).astype(complex)


@dataclass(frozen=True)
class SpaceDecomposition:
    """
    Data class realizing H = (H_S ⊗ H_F) ⊕ H_R.

    ``system`` is the frame of the SF block, ordered |s_j>⊗|f_k> with the S index slow; ``factor_dims`` is
    ``(dim S, dim F)`` or ``None`` for a plain subspace target, in which case ``system`` spans H_S itself.
    """

    system: SubspaceBasis
    remainder: SubspaceBasis
    factor_dims: Optional[Tuple[int, int]] = None

    def __post_init__(self) -> None:
        if self.system.ambient_dim != self.remainder.ambient_dim:
            raise DimensionError("System and remainder frames live in different ambient spaces")
        if self.system.dim + self.remainder.dim != self.system.ambient_dim:
            raise DimensionError(
                f"dim(SF) + dim(R) = {self.system.dim + self.remainder.dim}, ambient is {self.system.ambient_dim}"
            )
        if self.factor_dims is not None:
            d_s, d_f = self.factor_dims
            if d_s < 1 or d_f < 1 or d_s * d_f != self.system.dim:
                raise DimensionError(f"Factor dims {self.factor_dims} do not multiply to dim(SF) = {self.system.dim}")
        overlap = np.linalg.norm(self.system.vectors.conj().T @ self.remainder.vectors)
        if overlap > ORTHONORMAL_TOL:
            raise DomainError(f"System and remainder frames are not orthogonal (overlap {overlap:.3e})")

    @classmethod
    def from_subspace(cls, subspace: SubspaceBasis) -> SpaceDecomposition:
        """H = H_S ⊕ H_S^⊥."""
        return cls(subspace, SubspaceBasis(_complement(subspace.vectors)))

    @classmethod
    def from_factor_basis(cls, basis: SubspaceBasis, factor_dims: Tuple[int, int]) -> SpaceDecomposition:
        """H = (H_S ⊗ H_F) ⊕ H_R with R the orthogonal complement of the ordered SF frame."""
        return cls(basis, SubspaceBasis(_complement(basis.vectors)), tuple(int(d) for d in factor_dims))

    @property
    def ambient_dim(self) -> int:
        return self.system.ambient_dim

    @property
    def has_factor(self) -> bool:
        return self.factor_dims is not None


@dataclass(frozen=True)
class TargetSpec:
    """Data class describing what should be stabilized."""

    kind: TargetKind
    payload: Union[np.ndarray, SubspaceBasis, SpaceDecomposition]

    def __post_init__(self) -> None:
        if self.kind is TargetKind.PURE_STATE:
            state = np.array(self.payload, dtype=complex).ravel()
            norm = np.linalg.norm(state)
            if abs(norm - 1.0) > ORTHONORMAL_TOL:
                raise DomainError(f"Pure-state payload is not normalized (norm {norm:.12f})")
            state.setflags(write=False)
            object.__setattr__(self, "payload", state)
        elif self.kind is TargetKind.SUBSPACE and not isinstance(self.payload, SubspaceBasis):
            raise DomainError("Subspace targets need a SubspaceBasis payload")
        elif self.kind is TargetKind.SUBSYSTEM:
            if not isinstance(self.payload, SpaceDecomposition) or not self.payload.has_factor:
                raise DomainError("Subsystem targets need a SpaceDecomposition payload with factor dims")

    @property
    def dim(self) -> int:
        if self.kind is TargetKind.PURE_STATE:
            return self.payload.shape[0]
        return self.payload.ambient_dim

    @property
    def subspace(self) -> SubspaceBasis:
        """H_S for pure states and subspaces, H_SF for subsystems."""
        if self.kind is TargetKind.PURE_STATE:
            return SubspaceBasis(self.payload.reshape(-1, 1))
        if self.kind is TargetKind.SUBSPACE:
            return self.payload
        return self.payload.system

    def decomposition(self) -> SpaceDecomposition:
        if self.kind is TargetKind.SUBSYSTEM:
            return self.payload
        return SpaceDecomposition.from_subspace(self.subspace)
