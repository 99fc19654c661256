"""This module contains the AnalysisReport class and the subsystem factorization report."""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, TypedDict

from src.data.density_operator import DensityOperator
from src.data.subspace_basis import SubspaceBasis


class FactorizationReport(TypedDict):
    """A dictionary describing how the SF-blocks of a model factorize."""

    sides: List[str]
    kronecker_residuals: List[float]
    identity_on_s_residuals: List[float]
    identity_on_f_residuals: List[float]
    noise_q: float
    interplay: float
    hamiltonian_split: float


@dataclass
class AnalysisReport:
    """Data class holding invariance and attractivity verdicts together with their witnesses."""

    invariant: bool
    attractive: Optional[bool]
    hr_prime: SubspaceBasis
    obstruction_witness: Optional[SubspaceBasis] = None
    residuals: Dict[str, float] = field(default_factory=dict)
    lasalle_decay_check: bool = False
    hermitian_obstruction: bool = False
    witness_state: Optional[DensityOperator] = None
    notes: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._validate_verdicts()

    def _validate_verdicts(self) -> None:
        if self.attractive and not self.invariant:
            raise ValueError("An attractive target must be invariant")
        has_witness = self.obstruction_witness is not None and not self.obstruction_witness.is_zero
        if has_witness != (self.invariant and self.attractive is False):
            raise ValueError("Obstruction witness must be present exactly for invariant, non-attractive targets")
