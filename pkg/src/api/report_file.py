"""This module contains the machine-readable report writer."""

from __future__ import annotations

import json
import pathlib
from typing import Any, Dict, List, Optional, Union

import numpy as np

from src import __version__
from src.api.model_file import decode_matrix, encode_complex, encode_matrix, encode_vector
from src.core.exceptions import NumericalError
from src.data.analysis_report import AnalysisReport
from src.data.subspace_basis import SubspaceBasis
from src.data.synthesis_result import SynthesisResult
from src.data.trajectory import VerificationResult
from src.utils.logger import logger


def encode_basis(basis: Optional[SubspaceBasis]) -> Optional[List[List[List[float]]]]:
    """Columns of a frame as a list of encoded vectors."""
    if basis is None:
        return None
    return [encode_vector(column) for column in basis.vectors.T]


def encode_spectrum(eigenvalues: np.ndarray) -> List[List[float]]:
    """Eigenvalues sorted by decreasing real part, then increasing imaginary part, rounded to 12 digits."""
    eigenvalues = np.asarray(eigenvalues, dtype=complex)
    rounded = np.round(eigenvalues.real, 12) + 1j * np.round(eigenvalues.imag, 12)
    order = np.lexsort((rounded.imag, -rounded.real))
    return [encode_complex(value) for value in rounded[order]]


def analysis_section(report: AnalysisReport) -> Dict[str, Any]:
    return {
        "invariant": report.invariant,
        "attractive": report.attractive,
        "hr_prime": encode_basis(report.hr_prime),
        "obstruction_witness": encode_basis(report.obstruction_witness),
        "witness_state": None if report.witness_state is None else encode_matrix(report.witness_state.rho),
        "residuals": dict(report.residuals),
        "lasalle_decay_check": report.lasalle_decay_check,
        "hermitian_obstruction": report.hermitian_obstruction,
        "notes": list(report.notes),
    }


def synthesis_section(result: SynthesisResult) -> Dict[str, Any]:
    return {
        "feasible": result.feasible,
        "feedback": None if result.feedback is None else encode_matrix(result.feedback),
        "hamiltonian_correction": (
            None if result.hamiltonian_correction is None else encode_matrix(result.hamiltonian_correction)
        ),
        "iterations": result.iterations,
        "infeasibility_reason": result.infeasibility_reason,
        "verified_attractive": result.verified_attractive,
        "hr_prime_dim": result.hr_prime_dim,
        "used_random_h2": result.used_random_h2,
        "factor_state": None if result.factor_state is None else encode_vector(result.factor_state),
        "notes": list(result.notes),
    }


def verification_section(result: VerificationResult) -> Dict[str, Any]:
    return {
        "passed": result.passed,
        "worst_deficit": result.worst_deficit,
        "worst_seed": result.worst_seed,
        "horizon": result.horizon,
        "eps": result.eps,
        "ensemble": len(result.deficits),
    }


def build_report(command: str, input_digest: str, **sections: Any) -> Dict[str, Any]:
    """
    Assemble a report document; ``None`` sections are dropped.

    :raises NumericalError: when a numeric entry is not finite.
    """
    document = {"command": command, "tool_version": __version__, "input_digest": input_digest}
    document.update({name: value for name, value in sections.items() if value is not None})
    _check_finite(document, "report")
    return document


def _check_finite(value: Any, path: str) -> None:
    if isinstance(value, float) and not np.isfinite(value):
        raise NumericalError(f"Report entry {path} is not finite")
    if isinstance(value, dict):
        for key, item in value.items():
            _check_finite(item, f"{path}.{key}")
    elif isinstance(value, list):
        for i, item in enumerate(value):
            _check_finite(item, f"{path}[{i}]")


def report_text(document: Dict[str, Any]) -> str:
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def write_report(path: Union[str, pathlib.Path], document: Dict[str, Any]) -> None:
    pathlib.Path(path).write_text(report_text(document), encoding="utf-8")
    logger.info("Wrote report %s", path)


def read_report(path: Union[str, pathlib.Path]) -> Dict[str, Any]:
    return json.loads(pathlib.Path(path).read_text(encoding="utf-8"))


def decode_operator(encoded: List[List[List[float]]]) -> np.ndarray:
    """Inverse of the matrix encoding used in reports."""
    return decode_matrix(encoded, len(encoded), "report")
