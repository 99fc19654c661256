"""This module contains the controller synthesis procedures: Hamiltonian compensation, open-loop attractivity
corrections and Markovian feedback design for subspaces, pure states and subsystems."""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from src.core.analysis import (
    check_invariance_subsystem,
    factor_generator,
    h_r_prime,
    is_attractive,
    largest_invariant_subspace,
    operator_scale,
    subspace_blocks,
    unique_steady_state,
)
from src.core.exceptions import DimensionError, DomainError, HypothesisError, PreconditionError
from src.core.matrix_core import (
    DEFAULT_TOL,
    as_square,
    block_embed,
    block_extract,
    commutator,
    dagger,
    hermitian_residual,
    hermitian_split,
    one_sided_factor,
    orthogonal_complement,
    partial_trace,
    unitary_with_first_column,
)
from src.core.model import fme_reduce, random_hermitian, with_hamiltonian
from src.data.lindblad_model import FeedbackModel, LindbladModel
from src.data.subspace_basis import SubspaceBasis
from src.data.synthesis_result import SynthesisResult
from src.data.target import SpaceDecomposition
from src.utils.logger import logger


def _off_diagonal(block: np.ndarray, row_space: SubspaceBasis, col_space: SubspaceBasis) -> np.ndarray:
    """V_row B V_col† plus its adjoint; exactly Hermitian."""
    upper = block_embed(block, row_space, col_space)
    return upper + dagger(upper)


def _diagonal_part(operator: Optional[np.ndarray], first: SubspaceBasis, second: SubspaceBasis) -> np.ndarray:
    """The two diagonal blocks of ``operator`` (zero when absent), symmetrized."""
    dim = first.ambient_dim
    if operator is None:
        return np.zeros((dim, dim), dtype=complex)
    operator = as_square(operator, "Free blocks")
    if operator.shape[0] != dim:
        raise DimensionError(f"Free blocks are {operator.shape[0]}-dimensional, expected {dim}")
    diagonal = first.projector @ operator @ first.projector + second.projector @ operator @ second.projector
    return 0.5 * (diagonal + dagger(diagonal))


def _symmetrized(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + dagger(x))


def _require_hermitian(name: str, operator: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    operator = as_square(operator, name)
    residual = hermitian_residual(operator)
    if residual > tol * max(1.0, np.linalg.norm(operator)):
        raise DomainError(f"{name} is not Hermitian (residual {residual:.3e})")
    return operator


def invariance_compensation(model: LindbladModel, subspace: SubspaceBasis, tol: float = DEFAULT_TOL) -> SynthesisResult:
    """
    Hamiltonian correction that makes ``subspace`` invariant.

    The correction only touches the off-diagonal blocks: its P-block is -(i/2) sum_k L_S,k† L_P,k - H_P, so the
    corrected Hamiltonian satisfies the interplay condition exactly. No Hamiltonian helps when a noise operator maps
    the target into the remainder.

    :param model: Model to correct.
    :param subspace: Target subspace.
    :param tol: Rank tolerance relative to the operator scale.
    :return: Result whose ``feasible`` flag reports invariance, not attractivity, of the corrected model.
    """
    remainder, blocks = subspace_blocks(model, subspace)
    threshold = tol * operator_scale(model)
    for k, block in enumerate(blocks):
        residual = float(np.linalg.norm(block.q))
        if residual > threshold:
            logger.info("Compensation infeasible: noise operator %d leaks out of the target (%.3e)", k, residual)
            return SynthesisResult(
                feasible=False,
                closed_loop=model,
                infeasibility_reason=f"noise operator {k} maps the target into the remainder (L_Q norm {residual:.3e})",
            )

    correction_block = -block_extract(model.hamiltonian, subspace, remainder)
    for block in blocks:
        correction_block = correction_block - 0.5j * dagger(block.s) @ block.p
    correction = _off_diagonal(correction_block, subspace, remainder)
    closed_loop = with_hamiltonian(model, correction)
    logger.debug("Compensation P-block norm %.3e", np.linalg.norm(correction_block))
    return SynthesisResult(
        feasible=True,
        closed_loop=closed_loop,
        hamiltonian_correction=correction,
        notes=["compensation renders the target invariant; attractivity is decided separately"],
    )


def openloop_attractor(
    model: LindbladModel,
    subspace: SubspaceBasis,
    coupling_scale: float = 1.0,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    max_rounds: Optional[int] = None,
) -> SynthesisResult:
    """
    Hamiltonian correction on the remainder that makes an invariant ``subspace`` attractive.

    Each round finds the largest invariant subspace T inside H_R', splits H_R = T ⊕ Z and couples T to Z with a
    full-rank block of magnitude ``coupling_scale``. When a round fails to shrink T, a seeded random Hermitian term on
    T is added as well. The loop ends after at most dim(H_R') rounds.

    :raises PreconditionError: when the target is not invariant.
    """
    if coupling_scale <= 0:
        raise DomainError("Coupling scale must be positive")
    hr_prime = h_r_prime(model, subspace, tol)
    remainder = orthogonal_complement(subspace)
    dim = model.dim
    correction = np.zeros((dim, dim), dtype=complex)
    if remainder.is_zero:
        return SynthesisResult(
            feasible=True, closed_loop=model, hamiltonian_correction=correction, verified_attractive=True
        )
    if hr_prime.dim == remainder.dim:
        return SynthesisResult(
            feasible=False,
            closed_loop=model,
            hr_prime_dim=hr_prime.dim,
            infeasibility_reason="the remainder is invariant: every noise P-block vanishes",
        )

    rng = np.random.default_rng(seed)
    bound = hr_prime.dim if max_rounds is None else min(max_rounds, hr_prime.dim)
    closed_loop = model
    used_random_h2 = False
    iterations = 0
    trapped = largest_invariant_subspace(closed_loop, hr_prime, tol)
    while not trapped.is_zero and iterations < bound:
        escape = orthogonal_complement(trapped, within=remainder)
        pairs = min(trapped.dim, escape.dim)
        coupling = coupling_scale * escape.vectors[:, :pairs] @ dagger(trapped.vectors[:, :pairs])
        correction = correction + coupling + dagger(coupling)
        closed_loop = with_hamiltonian(model, correction)
        iterations += 1
        shrunk = largest_invariant_subspace(closed_loop, hr_prime, tol)
        if shrunk.dim >= trapped.dim:
            logger.warning("Coupling round %d left dim T = %d; adding a random term on T", iterations, trapped.dim)
            local = random_hermitian(trapped.dim, rng, coupling_scale)
            correction = correction + _symmetrized(trapped.vectors @ local @ dagger(trapped.vectors))
            closed_loop = with_hamiltonian(model, correction)
            used_random_h2 = True
            shrunk = largest_invariant_subspace(closed_loop, hr_prime, tol)
        logger.debug("Open-loop round %d: dim T %d -> %d", iterations, trapped.dim, shrunk.dim)
        trapped = shrunk

    report = is_attractive(closed_loop, subspace, tol)
    result = SynthesisResult(
        feasible=bool(report.attractive),
        closed_loop=closed_loop,
        hamiltonian_correction=correction,
        iterations=iterations,
        verified_attractive=bool(report.attractive),
        hr_prime_dim=hr_prime.dim,
        used_random_h2=used_random_h2,
        infeasibility_reason=None if report.attractive else f"an invariant subspace survived {iterations} rounds",
    )
    if used_random_h2:
        result.notes.append("a seeded random Hamiltonian term on the trapped subspace was needed")
    logger.info(
        "Open-loop synthesis: attractive=%s after %d rounds, dim H_R'=%d", report.attractive, iterations, hr_prime.dim
    )
    return result


def _measurement_scale(hamiltonian: np.ndarray, measurement: np.ndarray) -> float:
    return 1.0 + float(np.linalg.norm(hamiltonian, 2)) + float(np.linalg.norm(measurement, 2))


def _close_loop(
    hamiltonian: np.ndarray,
    measurement: np.ndarray,
    feedback: np.ndarray,
    subspace: SubspaceBasis,
    coupling_scale: float,
    tol: float,
    seed: int,
) -> Tuple[np.ndarray, SynthesisResult]:
    """Compensation then open-loop correction on the reduced feedback model; returns H_c and the open-loop result."""
    reduced = fme_reduce(FeedbackModel(hamiltonian, measurement, feedback))
    compensation = invariance_compensation(reduced, subspace, tol)
    if not compensation.feasible:
        raise PreconditionError(f"Feedback left a leak out of the target: {compensation.infeasibility_reason}")
    openloop = openloop_attractor(compensation.closed_loop, subspace, coupling_scale, tol, seed)
    correction = compensation.hamiltonian_correction
    if openloop.hamiltonian_correction is not None:
        correction = correction + openloop.hamiltonian_correction
    return correction, openloop


def feedback_subspace(
    hamiltonian: np.ndarray,
    measurement: np.ndarray,
    subspace: SubspaceBasis,
    coupling_scale: float = 1.0,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    free_blocks: Optional[np.ndarray] = None,
) -> SynthesisResult:
    """
    Markovian feedback plus Hamiltonian correction that make ``subspace`` attractive.

    Feasible iff the projector onto the target does not commute with M + M†. With M = M^H + i M^A the feedback P-block
    is i M^H_P + M^A_P, which gives L = M - iF a vanishing Q-block and the P-block 2 M^H_P. The diagonal feedback
    blocks are free; they are taken from ``free_blocks`` (zero when omitted).

    :param hamiltonian: Hermitian open-loop Hamiltonian.
    :param measurement: Measurement operator M.
    :param subspace: Target subspace.
    :param coupling_scale: Magnitude of the open-loop coupling blocks.
    :param tol: Rank tolerance relative to the operator scale.
    :param seed: Seed for the random fallback term of the open-loop iteration.
    :param free_blocks: Hermitian operator whose S and R diagonal blocks seed the free feedback blocks.
    :return: Feedback F, correction H_c and the verified closed loop.
    """
    hamiltonian = _require_hermitian("Hamiltonian", hamiltonian)
    measurement = as_square(measurement, "Measurement operator")
    if measurement.shape != hamiltonian.shape or subspace.ambient_dim != hamiltonian.shape[0]:
        raise DimensionError("Hamiltonian, measurement and target live in different dimensions")
    remainder = orthogonal_complement(subspace)
    threshold = tol * _measurement_scale(hamiltonian, measurement)

    leak = float(np.linalg.norm(commutator(subspace.projector, measurement + dagger(measurement))))
    if leak <= threshold:
        logger.info("Feedback synthesis infeasible: commutator norm %.3e", leak)
        return SynthesisResult(
            feasible=False,
            closed_loop=fme_reduce(FeedbackModel(hamiltonian, measurement)),
            infeasibility_reason="target projector commutes with the Hermitian part of the measurement",
        )

    hermitian_part, antihermitian_part = hermitian_split(measurement)
    feedback_block = 1j * block_extract(hermitian_part, subspace, remainder) + block_extract(
        antihermitian_part, subspace, remainder
    )
    feedback = _off_diagonal(feedback_block, subspace, remainder) + _diagonal_part(free_blocks, subspace, remainder)

    correction, openloop = _close_loop(hamiltonian, measurement, feedback, subspace, coupling_scale, tol, seed)
    closed_loop = fme_reduce(FeedbackModel(hamiltonian + correction, measurement, feedback))
    report = is_attractive(closed_loop, subspace, tol)
    verified = bool(report.attractive)
    if not verified:
        logger.warning("Closed loop failed the attractivity check: %s", report.notes)
    logger.info("Feedback synthesis: attractive=%s, %d open-loop rounds", verified, openloop.iterations)
    return SynthesisResult(
        feasible=verified,
        closed_loop=closed_loop,
        feedback=feedback,
        hamiltonian_correction=correction,
        iterations=openloop.iterations,
        verified_attractive=verified,
        hr_prime_dim=report.hr_prime.dim,
        used_random_h2=openloop.used_random_h2,
        infeasibility_reason=None if verified else "closed loop failed the attractivity check",
        notes=list(openloop.notes),
    )


def feedback_purestate(
    hamiltonian: np.ndarray,
    measurement: np.ndarray,
    state: np.ndarray,
    coupling_scale: float = 1.0,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    free_blocks: Optional[np.ndarray] = None,
) -> SynthesisResult:
    """
    Feedback design for a pure target state, by rotating the state onto e_1 and designing for span{e_1}.

    Feasible iff the target state does not commute with M + M†; on a qubit with M = σ+ this excludes exactly the
    equatorial states.
    """
    hamiltonian = _require_hermitian("Hamiltonian", hamiltonian)
    measurement = as_square(measurement, "Measurement operator")
    state = np.asarray(state, dtype=complex).ravel()
    if state.shape[0] != hamiltonian.shape[0]:
        raise DimensionError(f"Target state has dimension {state.shape[0]}, model {hamiltonian.shape[0]}")
    rotation = unitary_with_first_column(state)
    rotated_free = None if free_blocks is None else dagger(rotation) @ free_blocks @ rotation
    rotated = feedback_subspace(
        dagger(rotation) @ hamiltonian @ rotation,
        dagger(rotation) @ measurement @ rotation,
        SubspaceBasis(np.eye(state.shape[0], 1, dtype=complex)),
        coupling_scale,
        tol,
        seed,
        rotated_free,
    )
    target = SubspaceBasis(state.reshape(-1, 1) / np.linalg.norm(state))
    if rotated.feedback is None:
        return SynthesisResult(
            feasible=False,
            closed_loop=fme_reduce(FeedbackModel(hamiltonian, measurement)),
            infeasibility_reason=(
                "commutation condition [rho_d, M + M†] != 0 violated: "
                "target state commutes with the Hermitian part of the measurement"
            ),
        )

    feedback = _symmetrized(rotation @ rotated.feedback @ dagger(rotation))
    correction = _symmetrized(rotation @ rotated.hamiltonian_correction @ dagger(rotation))
    closed_loop = fme_reduce(FeedbackModel(hamiltonian + correction, measurement, feedback))
    verified = bool(is_attractive(closed_loop, target, tol).attractive)
    return SynthesisResult(
        feasible=verified,
        closed_loop=closed_loop,
        feedback=feedback,
        hamiltonian_correction=correction,
        iterations=rotated.iterations,
        verified_attractive=verified,
        hr_prime_dim=rotated.hr_prime_dim,
        used_random_h2=rotated.used_random_h2,
        infeasibility_reason=None if verified else "closed loop failed the attractivity check",
        notes=list(rotated.notes),
    )


def _swap_factors(decomposition: SpaceDecomposition) -> SpaceDecomposition:
    """Same SF block with the frame reordered |f>⊗|s>, so C_S⊗I becomes I⊗C_S."""
    d_s, d_f = decomposition.factor_dims
    order = [s * d_f + f for f in range(d_f) for s in range(d_s)]
    frame = SubspaceBasis(decomposition.system.vectors[:, order])
    return SpaceDecomposition(frame, decomposition.remainder, (d_f, d_s))


def _infeasible_subsystem(hamiltonian: np.ndarray, measurement: np.ndarray, reason: str) -> SynthesisResult:
    logger.info("Subsystem synthesis infeasible: %s", reason)
    return SynthesisResult(
        feasible=False, closed_loop=fme_reduce(FeedbackModel(hamiltonian, measurement)), infeasibility_reason=reason
    )


def feedback_subsystem(
    hamiltonian: np.ndarray,
    measurement: np.ndarray,
    decomposition: SpaceDecomposition,
    coupling_scale: float = 1.0,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
) -> SynthesisResult:
    """
    Feedback design making the S factor of H = (H_S ⊗ H_F) ⊕ H_R an attractive subsystem.

    Requires (i) the Hermitian part of M to couple H_R and H_SF, (ii) its SF-block to read I_S⊗C_F or C_S⊗I_F and
    (iii) that block not to be scalar. The SF-block of the closed loop is then made I_S⊗L_F with Hamiltonian
    I_S⊗H_F, where (L_F, H_F) stabilize a pure factor state, so the factor generator has a unique attractive state.
    The I_S⊗C_F reading wins when both apply.

    :raises HypothesisError: when a factor has dimension below two.
    """
    if not decomposition.has_factor:
        raise DimensionError("Subsystem synthesis needs a decomposition with factor dims")
    if min(decomposition.factor_dims) < 2:
        raise HypothesisError(f"Both factors need dimension at least 2, got {decomposition.factor_dims}")
    hamiltonian = _require_hermitian("Hamiltonian", hamiltonian)
    measurement = as_square(measurement, "Measurement operator")
    if decomposition.ambient_dim != hamiltonian.shape[0] or measurement.shape != hamiltonian.shape:
        raise DimensionError("Hamiltonian, measurement and decomposition live in different dimensions")
    threshold = tol * _measurement_scale(hamiltonian, measurement)
    hermitian_part, antihermitian_part = hermitian_split(measurement)
    system, remainder = decomposition.system, decomposition.remainder

    if not remainder.is_zero and np.linalg.norm(block_extract(hermitian_part, remainder, system)) <= threshold:
        return _infeasible_subsystem(
            hamiltonian, measurement, "Hermitian part of the measurement does not couple H_R and H_SF"
        )
    sf_block = block_extract(hermitian_part, system, system)
    _, on_s = one_sided_factor(sf_block, decomposition.factor_dims, identity_on=0)
    _, on_f = one_sided_factor(sf_block, decomposition.factor_dims, identity_on=1)
    if on_s > threshold and on_f > threshold:
        return _infeasible_subsystem(
            hamiltonian, measurement, "SF-block of the measurement is neither I_S⊗C_F nor C_S⊗I_F"
        )
    scalar = np.trace(sf_block) / system.dim
    if np.linalg.norm(sf_block - scalar * np.eye(system.dim)) <= threshold:
        return _infeasible_subsystem(
            hamiltonian, measurement, "SF-block of the measurement is a multiple of the identity"
        )

    notes = []
    working = decomposition
    if on_s > threshold:
        working = _swap_factors(decomposition)
        notes.append("measurement acts on the S factor, factor roles swapped")
    else:
        notes.append("measurement SF-block read as I_S⊗C_F")
    d_s, d_f = working.factor_dims
    system = working.system

    factor_hermitian = partial_trace(block_extract(hermitian_part, system, system), (d_s, d_f), which=0) / d_s
    factor_measurement = partial_trace(block_extract(measurement, system, system), (d_s, d_f), which=0) / d_s
    _, eigenvectors = np.linalg.eigh(_symmetrized(factor_hermitian))
    factor_state = (eigenvectors[:, -1] + eigenvectors[:, 0]) / np.sqrt(2.0)
    factor = feedback_purestate(
        np.zeros((d_f, d_f), dtype=complex), factor_measurement, factor_state, coupling_scale, tol, seed
    )
    if not factor.feasible:
        reason = f"factor synthesis failed: {factor.infeasibility_reason}"
        return _infeasible_subsystem(hamiltonian, measurement, reason)

    identity_s = np.eye(d_s)
    antihermitian_sf = block_extract(antihermitian_part, system, system)
    factor_antihermitian = partial_trace(antihermitian_sf, (d_s, d_f), which=0) / d_s
    feedback_sf = antihermitian_sf - np.kron(identity_s, factor_antihermitian) + np.kron(identity_s, factor.feedback)
    feedback = block_embed(_symmetrized(feedback_sf), system, system)
    if not remainder.is_zero:
        feedback_block = 1j * block_extract(hermitian_part, system, remainder) + block_extract(
            antihermitian_part, system, remainder
        )
        feedback = feedback + _off_diagonal(feedback_block, system, remainder)
    feedback = _symmetrized(feedback)

    reduced = fme_reduce(FeedbackModel(hamiltonian, measurement, feedback))
    desired_sf = np.kron(identity_s, factor.closed_loop.hamiltonian)
    sf_correction = desired_sf - block_extract(reduced.hamiltonian, system, system)
    correction = _symmetrized(block_embed(sf_correction, system, system))
    compensation = invariance_compensation(with_hamiltonian(reduced, correction), system, tol)
    if not compensation.feasible:
        return _infeasible_subsystem(hamiltonian, measurement, compensation.infeasibility_reason)
    correction = correction + compensation.hamiltonian_correction
    openloop = openloop_attractor(compensation.closed_loop, system, coupling_scale, tol, seed)
    if openloop.hamiltonian_correction is not None:
        correction = correction + openloop.hamiltonian_correction

    closed_loop = fme_reduce(FeedbackModel(hamiltonian + correction, measurement, feedback))
    sf_attractive = bool(is_attractive(closed_loop, system, tol).attractive)
    subsystem_invariant, _ = check_invariance_subsystem(closed_loop, working, tol)
    _, factor_model = factor_generator(closed_loop, working, tol) if subsystem_invariant else (None, None)
    factor_unique = factor_model is not None and unique_steady_state(factor_model, tol)
    verified = sf_attractive and subsystem_invariant and factor_unique
    logger.info(
        "Subsystem synthesis: SF attractive=%s, subsystem invariant=%s, unique factor state=%s",
        sf_attractive,
        subsystem_invariant,
        factor_unique,
    )
    return SynthesisResult(
        feasible=verified,
        closed_loop=closed_loop,
        feedback=feedback,
        hamiltonian_correction=correction,
        iterations=openloop.iterations,
        verified_attractive=verified,
        hr_prime_dim=openloop.hr_prime_dim,
        used_random_h2=openloop.used_random_h2 or factor.used_random_h2,
        factor_state=factor_state,
        infeasibility_reason=None if verified else "closed loop failed the subsystem verification",
        notes=notes + list(openloop.notes),
    )
