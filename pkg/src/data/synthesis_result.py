"""This module contains the SynthesisResult class."""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.data.lindblad_model import LindbladModel

HERMITIAN_OUTPUT_TOL = 1e-12


@dataclass
class SynthesisResult:
    """Data class representing the outcome of a controller synthesis."""

    feasible: bool
    closed_loop: LindbladModel
    feedback: Optional[np.ndarray] = None
    hamiltonian_correction: Optional[np.ndarray] = None
    iterations: int = 0
    infeasibility_reason: Optional[str] = None
    verified_attractive: Optional[bool] = None
    hr_prime_dim: int = 0
    used_random_h2: bool = False
    factor_state: Optional[np.ndarray] = None
    notes: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._validate_result()

    def _validate_result(self) -> None:
        for name in ("feedback", "hamiltonian_correction"):
            operator = getattr(self, name)
            if operator is None:
                continue
            residual = np.linalg.norm(operator - operator.conj().T)
            if residual > HERMITIAN_OUTPUT_TOL * max(1.0, np.linalg.norm(operator)):
                raise ValueError(f"Synthesized {name} is not Hermitian (residual {residual:.3e})")
        if not self.feasible and not self.infeasibility_reason:
            raise ValueError("An infeasible result must name the violated condition")
