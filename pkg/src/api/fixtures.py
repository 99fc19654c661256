"""This module contains the built-in demo fixtures and their published operators."""

from __future__ import annotations

import pathlib
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from src.api.model_file import parse_model
from src.core.exceptions import DomainError
from src.core.matrix_core import SIGMA_PLUS, SIGMA_X, SIGMA_Y, dagger, pauli, spin_operators, tensor_product
from src.data.parsed_model import ParsedModel
from src.data.subspace_basis import SubspaceBasis

MODELS_DIR = pathlib.Path(__file__).resolve().parents[2] / "models"

_SQRT_HALF = 1.0 / np.sqrt(2.0)

# Example 1 Hamiltonian coefficients: H = n0 I + n_x σx + n_y σy + n_z σz
QUBIT_FIELD = {"n0": 0.5, "n_x": 0.3, "n_y": -0.2, "n_z": 0.0}

# |00>, (|01>+|10>)/√2, |11> as columns
TRIPLET_ISOMETRY = np.array(
    [[1, 0, 0], [0, _SQRT_HALF, 0], [0, _SQRT_HALF, 0], [0, 0, 1]],
    dtype=complex,
)


@dataclass(frozen=True)
class DemoFixture:
    """Data class describing one bundled example and the operators published for it."""

    name: str
    model_file: str
    description: str
    horizon: float
    published: Dict[str, np.ndarray] = field(default_factory=dict)
    published_hr_prime: Optional[SubspaceBasis] = None
    free_blocks: Optional[np.ndarray] = None
    notes: Tuple[str, ...] = ()

    @property
    def path(self) -> pathlib.Path:
        return MODELS_DIR / self.model_file

    def load(self) -> ParsedModel:
        return parse_model(self.path)


def triplet_restriction(operator: np.ndarray) -> np.ndarray:
    """Compress a two-qubit operator to the symmetric (triplet) subspace."""
    return dagger(TRIPLET_ISOMETRY) @ operator @ TRIPLET_ISOMETRY


def collective_spin(label: str) -> np.ndarray:
    """J_a = (σ_a⊗I + I⊗σ_a)/2 on two qubits."""
    sigma = pauli(label)
    return 0.5 * (tensor_product(sigma, np.eye(2)) + tensor_product(np.eye(2), sigma))


def bloch_state(theta: float, phi: float) -> np.ndarray:
    """cos(θ/2)|0> + e^{iφ} sin(θ/2)|1>."""
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], dtype=complex)


def bloch_rotation(theta: float, phi: float) -> np.ndarray:
    """SU(2) rotation taking |0> to :func:`bloch_state`."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -np.exp(-1j * phi) * s], [np.exp(1j * phi) * s, c]], dtype=complex)


def spin_axis_measurement(theta: float, phi: float) -> np.ndarray:
    """R σx R† / 2 with R|0> = |ψ(θ, φ)>: measuring it stabilizes |ψ(θ, φ)> the way σx/2 stabilizes |0>."""
    rotation = bloch_rotation(theta, phi)
    return 0.5 * rotation @ SIGMA_X @ dagger(rotation)


def _qubit_published() -> Dict[str, np.ndarray]:
    n_x, n_y = QUBIT_FIELD["n_x"], QUBIT_FIELD["n_y"]
    return {
        "feedback": -0.5 * SIGMA_Y,
        "hamiltonian_correction": -n_x * SIGMA_X - n_y * SIGMA_Y,
        "noise": SIGMA_PLUS.copy(),
    }


def _qutrit_published() -> Dict[str, np.ndarray]:
    j_x, j_y, _ = spin_operators(1)
    return {"feedback": -j_y, "noise": j_x + 1j * j_y}


def _bell_published() -> Dict[str, np.ndarray]:
    identity = np.eye(2)
    return {
        "feedback": tensor_product(SIGMA_Y, SIGMA_X),
        "hamiltonian_correction": tensor_product(SIGMA_Y, identity) + tensor_product(identity, SIGMA_Y),
    }


def _triplet_published() -> Dict[str, np.ndarray]:
    _, j_y, j_z = (triplet_restriction(collective_spin(label)) for label in ("X", "Y", "Z"))
    return {"feedback": j_z @ j_y + j_y @ j_z, "hamiltonian_correction": j_z}


_FIXTURES: Dict[str, DemoFixture] = {
    "example1": DemoFixture(
        name="example1",
        model_file="example1.json",
        description="qubit, measurement of σx/2, target |0>",
        horizon=40.0,
        published=_qubit_published(),
    ),
    "example2": DemoFixture(
        name="example2",
        model_file="example2.json",
        description="qutrit, measurement of J_x, target |m=1>",
        horizon=60.0,
        published=_qutrit_published(),
        free_blocks=-spin_operators(1)[1],
        notes=("the published feedback fixes the free diagonal blocks to those of -J_y",),
    ),
    "example3": DemoFixture(
        name="example3",
        model_file="example3.json",
        description="two qubits, measurement of σz⊗I, target (|00>+|11>)/√2",
        horizon=80.0,
        published=_bell_published(),
        published_hr_prime=SubspaceBasis.span(
            np.array([0, _SQRT_HALF, _SQRT_HALF, 0]), np.array([0, _SQRT_HALF, -_SQRT_HALF, 0])
        ),
        free_blocks=tensor_product(SIGMA_Y, SIGMA_X),
        notes=("both the measurement and Hamiltonian compensation can be implemented locally",),
    ),
    "example4": DemoFixture(
        name="example4",
        model_file="example4.json",
        description="two qubits restricted to the triplet, collective J_x measurement, target (|01>+|10>)/√2",
        horizon=80.0,
        published=_triplet_published(),
        published_hr_prime=SubspaceBasis.span(np.array([_SQRT_HALF, 0, -_SQRT_HALF])),
        notes=("collective measurement of spin along the x-axis, restricted to the triplet subspace",),
    ),
}


def fixture_names() -> Tuple[str, ...]:
    return tuple(sorted(_FIXTURES))


def get_fixture(name: str) -> DemoFixture:
    """
    Look up a bundled example by name.

    :raises DomainError: for unknown names.
    """
    try:
        return _FIXTURES[name]
    except KeyError:
        raise DomainError(f"Unknown demo {name!r}, expected one of {', '.join(fixture_names())}") from None
