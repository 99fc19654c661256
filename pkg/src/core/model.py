"""This module contains the generator engine: Lindblad action, superoperator and feedback reduction."""

from __future__ import annotations

import hashlib
from typing import List, Optional, Union

import numpy as np

from src.core.config import ToleranceConfig
from src.core.exceptions import DimensionError, DomainError
from src.core.matrix_core import anticommutator, as_square, dagger, hermitian_residual
from src.data.density_operator import DensityOperator
from src.data.lindblad_model import FeedbackModel, LindbladModel, NoiseChannel
from src.utils.logger import logger


def vec(x: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization, vec(A X B) = (B^T ⊗ A) vec(X)."""
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: Optional[int] = None) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v)
    dim = dim or int(round(np.sqrt(v.shape[0])))
    return v.reshape(dim, dim, order="F")


def apply_generator(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    """
    Apply the Lindblad generator to an arbitrary (not necessarily Hermitian) operator.

    :param model: Hamiltonian and noise channels.
    :param rho: Operator of the model's dimension.
    :return: -i[H, rho] + sum_k g_k (L_k rho L_k† - 1/2 {L_k† L_k, rho}).
    """
    rho = as_square(rho, "State operand")
    if rho.shape[0] != model.dim:
        raise DimensionError(f"Operand is {rho.shape[0]}-dimensional, model is {model.dim}-dimensional")
    hamiltonian = model.hamiltonian
    result = -1j * (hamiltonian @ rho - rho @ hamiltonian)
    for channel in model.noise:
        jump = channel.operator
        jump_dag = dagger(jump)
        result = result + channel.rate * (jump @ rho @ jump_dag - 0.5 * anticommutator(jump_dag @ jump, rho))
    return result


def superoperator(model: LindbladModel) -> np.ndarray:
    """
    Matrix S of the generator acting on column-stacked operators, S vec(rho) = vec(L(rho)).

    S = -i(I⊗H - H^T⊗I) + sum_k g_k (conj(L_k)⊗L_k - 1/2 I⊗L_k†L_k - 1/2 (L_k†L_k)^T⊗I).
    """
    dim = model.dim
    identity = np.eye(dim)
    hamiltonian = model.hamiltonian
    generator = -1j * (np.kron(identity, hamiltonian) - np.kron(hamiltonian.T, identity))
    for channel in model.noise:
        jump = channel.operator
        decay = dagger(jump) @ jump
        generator = generator + channel.rate * (
            np.kron(jump.conj(), jump) - 0.5 * np.kron(identity, decay) - 0.5 * np.kron(decay.T, identity)
        )
    return generator


def fme_reduce(feedback_model: FeedbackModel, tolerances: Optional[ToleranceConfig] = None) -> LindbladModel:
    """
    Rewrite a feedback master equation as an ordinary Lindblad model.

    :param feedback_model: The (H, M, F) triple.
    :param tolerances: Hermiticity tolerance for H and F.
    :return: Model with Hamiltonian H + (F M + M† F)/2 and the single channel (M - iF, 1).
    :raises DomainError: when H or F is not Hermitian.
    """
    tolerances = tolerances or ToleranceConfig()
    hamiltonian = feedback_model.hamiltonian
    measurement = feedback_model.measurement
    feedback = feedback_model.feedback
    for name, operator in (("Hamiltonian", hamiltonian), ("Feedback Hamiltonian", feedback)):
        residual = hermitian_residual(operator)
        if residual > tolerances.hermitian_tol * max(1.0, np.linalg.norm(operator)):
            raise DomainError(f"{name} is not Hermitian (residual {residual:.3e})")
    effective = hamiltonian + 0.5 * (feedback @ measurement + dagger(measurement) @ feedback)
    effective = 0.5 * (effective + dagger(effective))
    return LindbladModel(effective, (NoiseChannel(measurement - 1j * feedback, 1.0),))


def with_hamiltonian(model: LindbladModel, correction: np.ndarray) -> LindbladModel:
    """Same noise, Hamiltonian shifted by ``correction``."""
    return LindbladModel(model.hamiltonian + correction, model.noise)


def validate(
    subject: Union[LindbladModel, FeedbackModel, DensityOperator], tolerances: Optional[ToleranceConfig] = None
) -> List[str]:
    """
    List the violated invariants of a model or state, each with its numeric residual.

    :param subject: A Lindblad model, a feedback model or a density operator.
    :param tolerances: Thresholds for the individual checks.
    :return: Human-readable violations; empty when the subject is valid.
    """
    tolerances = tolerances or ToleranceConfig()
    violations: List[str] = []
    if isinstance(subject, DensityOperator):
        rho = subject.rho
        residual = hermitian_residual(rho)
        if residual > tolerances.hermitian_tol:
            violations.append(f"rho not Hermitian ({residual:.3g})")
        deviation = abs(np.trace(rho) - 1.0)
        if deviation > tolerances.trace_tol:
            violations.append(f"trace deviation {deviation:.3g}")
        smallest = subject.min_eigenvalue
        if smallest < -tolerances.positivity_tol:
            violations.append(f"negative eigenvalue {smallest:.3g}")
        return violations

    residual = hermitian_residual(subject.hamiltonian)
    if residual > tolerances.hermitian_tol:
        violations.append(f"H not Hermitian ({residual:.3g})")
    if isinstance(subject, FeedbackModel):
        residual = hermitian_residual(subject.feedback)
        if residual > tolerances.hermitian_tol:
            violations.append(f"F not Hermitian ({residual:.3g})")
        return violations
    for k, channel in enumerate(subject.noise):
        if channel.rate < 0:
            violations.append(f"negative rate for noise operator {k} ({channel.rate:.3g})")
    return violations


def random_density(dim: int, seed: int) -> DensityOperator:
    """
    Seeded full-rank state G G† / trace(G G†) with G a complex Ginibre draw.

    :raises DimensionError: when ``dim`` is not positive.
    """
    if dim < 1:
        raise DimensionError("Dimension must be at least 1")
    rng = np.random.default_rng(seed)
    ginibre = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = ginibre @ dagger(ginibre)
    rho = 0.5 * (rho + dagger(rho))
    return DensityOperator(rho / np.trace(rho).real)


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    ginibre = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * scale * (ginibre + dagger(ginibre))


def random_model(dim: int, seed: int, n_noise: int = 2) -> LindbladModel:
    """Seeded Lindblad model with a GUE-like Hamiltonian and Ginibre noise operators of random rates."""
    if dim < 1:
        raise DimensionError("Dimension must be at least 1")
    rng = np.random.default_rng(seed)
    hamiltonian = random_hermitian(dim, rng)
    noise = tuple(
        NoiseChannel(
            (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2 * dim),
            float(rng.uniform(0.2, 1.5)),
        )
        for _ in range(n_noise)
    )
    return LindbladModel(hamiltonian, noise)


def model_digest(model: Union[LindbladModel, FeedbackModel]) -> str:
    """Content hash of the operators defining a model."""
    digest = hashlib.sha256()
    digest.update(type(model).__name__.encode())
    digest.update(np.ascontiguousarray(model.hamiltonian).tobytes())
    if isinstance(model, FeedbackModel):
        digest.update(np.ascontiguousarray(model.measurement).tobytes())
        digest.update(np.ascontiguousarray(model.feedback).tobytes())
    else:
        for channel in model.noise:
            digest.update(np.ascontiguousarray(channel.operator).tobytes())
            digest.update(np.float64(channel.rate).tobytes())
    logger.debug("Computed digest for %s of dimension %d", type(model).__name__, model.dim)
    return digest.hexdigest()
