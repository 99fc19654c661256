"""This module contains the decision procedures for invariance and attractivity of subspaces and subsystems."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg

from src.core.exceptions import DimensionError, NumericalError, PreconditionError
from src.core.matrix_core import (
    DEFAULT_TOL,
    block_extract,
    dagger,
    embed,
    kernel,
    local_split,
    nearest_kronecker,
    one_sided_factor,
    orthogonal_complement,
    stacked_blocks,
)
from src.core.model import apply_generator, superoperator, unvec, vec
from src.data.analysis_report import AnalysisReport, FactorizationReport
from src.data.density_operator import DensityOperator
from src.data.lindblad_model import LindbladModel, NoiseChannel
from src.data.subspace_basis import SubspaceBasis
from src.data.target import SpaceDecomposition
from src.utils.logger import logger


@dataclass(frozen=True)
class NoiseBlocks:
    """Blocks of one rate-absorbed noise operator with respect to H = S ⊕ R."""

    s: np.ndarray
    p: np.ndarray
    q: np.ndarray
    r: np.ndarray


def operator_scale(model: LindbladModel) -> float:
    """1 + the largest spectral norm among H and the rate-absorbed noise operators."""
    norms = [np.linalg.norm(model.hamiltonian, 2)] + [np.linalg.norm(op, 2) for op in model.absorbed_noise]
    return 1.0 + float(max(norms))


def _remainder(subspace: SubspaceBasis) -> SubspaceBasis:
    if subspace.is_zero:
        raise DimensionError("Target subspace must be nonzero")
    return orthogonal_complement(subspace)


def subspace_blocks(model: LindbladModel, subspace: SubspaceBasis) -> Tuple[SubspaceBasis, List[NoiseBlocks]]:
    """
    Split every rate-absorbed noise operator into its S, P, Q and R blocks.

    :return: The remainder frame and one :class:`NoiseBlocks` per channel.
    """
    if subspace.ambient_dim != model.dim:
        raise DimensionError(f"Target lives in dimension {subspace.ambient_dim}, model in {model.dim}")
    remainder = _remainder(subspace)
    blocks = [
        NoiseBlocks(
            s=block_extract(op, subspace, subspace),
            p=block_extract(op, subspace, remainder),
            q=block_extract(op, remainder, subspace),
            r=block_extract(op, remainder, remainder),
        )
        for op in model.absorbed_noise
    ]
    return remainder, blocks


def _interplay(model: LindbladModel, subspace: SubspaceBasis, remainder: SubspaceBasis, blocks: List[NoiseBlocks]):
    """i H_P - 1/2 sum_k L_S,k† L_P,k."""
    residual = 1j * block_extract(model.hamiltonian, subspace, remainder)
    for block in blocks:
        residual = residual - 0.5 * dagger(block.s) @ block.p
    return residual


def check_invariance_subspace(
    model: LindbladModel, subspace: SubspaceBasis, tol: float = DEFAULT_TOL, strict_initfree: bool = False
) -> Tuple[bool, Dict[str, float]]:
    """
    Decide whether states supported on ``subspace`` stay there.

    The conditions are L_Q,k = 0 for every rate-absorbed noise operator and i H_P - 1/2 sum_k L_S,k† L_P,k = 0. With
    ``strict_initfree`` the P-blocks must vanish as well, which decouples the target from the rest.

    :return: The verdict and the residual norms of every condition.
    """
    remainder, blocks = subspace_blocks(model, subspace)
    threshold = tol * operator_scale(model)
    residuals = {
        "noise_q": max((np.linalg.norm(b.q) for b in blocks), default=0.0),
        "interplay": float(np.linalg.norm(_interplay(model, subspace, remainder, blocks))),
        "noise_p": max((np.linalg.norm(b.p) for b in blocks), default=0.0),
    }
    residuals = {k: float(v) for k, v in residuals.items()}
    invariant = residuals["noise_q"] <= threshold and residuals["interplay"] <= threshold
    if strict_initfree:
        invariant = invariant and residuals["noise_p"] <= threshold
    logger.debug("Invariance residuals %s against threshold %.3e", residuals, threshold)
    return invariant, residuals


def check_invariance_subsystem(
    model: LindbladModel, decomposition: SpaceDecomposition, tol: float = DEFAULT_TOL
) -> Tuple[bool, FactorizationReport]:
    """
    Decide whether H_S supports an invariant subsystem of H = (H_S ⊗ H_F) ⊕ H_R.

    Every SF-block must be I_S⊗L_F or L_S⊗I_F (nearest one-sided factor within tolerance), the Q-blocks must vanish,
    the Hamiltonian interplay must hold and H_SF must split as H_S⊗I + I⊗H_F.
    """
    if not decomposition.has_factor:
        raise DimensionError("Subsystem invariance needs a decomposition with factor dims")
    dims = decomposition.factor_dims
    system, remainder = decomposition.system, decomposition.remainder
    threshold = tol * operator_scale(model)

    report: FactorizationReport = {
        "sides": [],
        "kronecker_residuals": [],
        "identity_on_s_residuals": [],
        "identity_on_f_residuals": [],
        "noise_q": 0.0,
        "interplay": 0.0,
        "hamiltonian_split": 0.0,
    }
    interplay = 1j * block_extract(model.hamiltonian, system, remainder)
    factorizes = True
    for op in model.absorbed_noise:
        sf_block = block_extract(op, system, system)
        _, _, kron_residual = nearest_kronecker(sf_block, dims)
        _, on_s = one_sided_factor(sf_block, dims, identity_on=0)
        _, on_f = one_sided_factor(sf_block, dims, identity_on=1)
        side = "identity_on_s" if on_s <= threshold else "identity_on_f" if on_f <= threshold else "none"
        factorizes = factorizes and side != "none"
        report["sides"].append(side)
        report["kronecker_residuals"].append(kron_residual)
        report["identity_on_s_residuals"].append(on_s)
        report["identity_on_f_residuals"].append(on_f)
        report["noise_q"] = max(report["noise_q"], float(np.linalg.norm(block_extract(op, remainder, system))))
        interplay = interplay - 0.5 * dagger(sf_block) @ block_extract(op, system, remainder)
    report["interplay"] = float(np.linalg.norm(interplay))
    _, _, report["hamiltonian_split"] = local_split(block_extract(model.hamiltonian, system, system), dims)

    invariant = (
        factorizes
        and report["noise_q"] <= threshold
        and report["interplay"] <= threshold
        and report["hamiltonian_split"] <= threshold
    )
    return invariant, report


def _require_invariant(model: LindbladModel, subspace: SubspaceBasis, tol: float) -> None:
    invariant, residuals = check_invariance_subspace(model, subspace, tol)
    if not invariant:
        raise PreconditionError(
            f"Target is not invariant (noise_q={residuals['noise_q']:.3e}, interplay={residuals['interplay']:.3e})"
        )


def h_r_prime(model: LindbladModel, subspace: SubspaceBasis, tol: float = DEFAULT_TOL) -> SubspaceBasis:
    """
    Intersection over k of the kernels of the P-blocks, embedded back into ambient coordinates.

    :raises PreconditionError: when the target is not invariant.
    """
    _require_invariant(model, subspace, tol)
    remainder = orthogonal_complement(subspace)
    if remainder.is_zero:
        return SubspaceBasis.zero(model.dim)
    stacked = stacked_blocks(model.absorbed_noise, subspace, remainder)
    coordinates = kernel(stacked, tol, scale=operator_scale(model))
    return embed(remainder, coordinates.vectors)


def _drift(model: LindbladModel) -> np.ndarray:
    """G = -iH - 1/2 sum_k L_k† L_k."""
    drift = -1j * model.hamiltonian
    for op in model.absorbed_noise:
        drift = drift - 0.5 * dagger(op) @ op
    return drift


def largest_invariant_subspace(
    model: LindbladModel, container: SubspaceBasis, tol: float = DEFAULT_TOL
) -> SubspaceBasis:
    """
    Largest V inside ``container`` with L_k V ⊆ V for every k and G V ⊆ V.

    Shrinks V_{j+1} = {x in V_j : L_k x in V_j, G x in V_j} until the dimension stops dropping, which takes at most
    dim(container) rounds. Any invariant subspace of the container survives every round.
    """
    if container.ambient_dim != model.dim:
        raise DimensionError(f"Container lives in dimension {container.ambient_dim}, model in {model.dim}")
    operators = list(model.absorbed_noise) + [_drift(model)]
    scale = operator_scale(model)
    current = container
    for round_index in range(container.dim + 1):
        if current.is_zero:
            return current
        leak = np.eye(model.dim) - current.projector
        stacked = np.vstack([leak @ op @ current.vectors for op in operators])
        coordinates = kernel(stacked, tol, scale=scale)
        logger.debug("Invariant-subspace round %d: dim %d -> %d", round_index, current.dim, coordinates.dim)
        if coordinates.dim == current.dim:
            return current
        current = embed(current, coordinates.vectors)
    return current


def compress(model: LindbladModel, subspace: SubspaceBasis) -> LindbladModel:
    """Generator compressed to an invariant subspace, V† X V for H and every noise operator."""
    return LindbladModel(
        block_extract(model.hamiltonian, subspace, subspace),
        tuple(NoiseChannel(block_extract(op, subspace, subspace), 1.0) for op in model.absorbed_noise),
    )


def lasalle_operator(model: LindbladModel, subspace: SubspaceBasis) -> np.ndarray:
    """sum_k L_P,k† L_P,k on H_R; V(rho) = trace(Pi_R rho) decays at rate trace(this · rho_R)."""
    remainder, blocks = subspace_blocks(model, subspace)
    operator = np.zeros((remainder.dim, remainder.dim), dtype=complex)
    for block in blocks:
        operator = operator + dagger(block.p) @ block.p
    return operator


def lasalle_derivative(
    model: LindbladModel, subspace: SubspaceBasis, rho: DensityOperator, tol: float = DEFAULT_TOL
) -> float:
    """
    d/dt trace(Pi_R rho) = -trace(sum_k L_P,k† L_P,k rho_R) along the flow, for an invariant target.

    :raises PreconditionError: when the target is not invariant.
    """
    _require_invariant(model, subspace, tol)
    remainder = orthogonal_complement(subspace)
    rho_r = block_extract(rho.rho, remainder, remainder)
    return -float(np.real(np.trace(lasalle_operator(model, subspace) @ rho_r)))


def hermitian_noise_obstruction(model: LindbladModel, subspace: SubspaceBasis, tol: float = DEFAULT_TOL) -> bool:
    """
    True when every noise operator is block diagonal (vanishing P and Q blocks): the remainder is then invariant
    too and the target cannot be attractive.
    """
    _require_invariant(model, subspace, tol)
    remainder, blocks = subspace_blocks(model, subspace)
    if remainder.is_zero:
        raise PreconditionError("The remainder space is zero, so there is nothing to obstruct")
    threshold = tol * operator_scale(model)
    return all(np.linalg.norm(b.p) <= threshold and np.linalg.norm(b.q) <= threshold for b in blocks)


def steady_states(model: LindbladModel, tol: float = DEFAULT_TOL) -> Tuple[List[np.ndarray], DensityOperator]:
    """
    Kernel of the generator and the fixed state reached from the maximally mixed state.

    The fixed state is P_0(I/d), with P_0 = R (W† R)^{-1} W† the spectral projection built from the right (R) and
    left (W) kernel frames of the superoperator.
    Kernel thresholds scale with the generator norm floored at 1, so a generator made of round-off has a full kernel.

    :return: A Hermitian basis of the kernel (orthonormal in the Hilbert-Schmidt product) and the fixed state.
    :raises NumericalError: when the zero eigenvalue looks defective at this tolerance.
    """
    generator = superoperator(model)
    scale = max(1.0, np.linalg.norm(generator, 2))
    right = kernel(generator, tol, scale=scale).vectors
    left = kernel(dagger(generator), tol, scale=scale).vectors
    if right.shape[1] != left.shape[1] or right.shape[1] == 0:
        raise NumericalError(
            f"Zero eigenspace looks defective (right kernel {right.shape[1]}, left kernel {left.shape[1]}); "
            "try a different tolerance"
        )
    gram = dagger(left) @ right
    if np.linalg.cond(gram) > 1.0 / np.sqrt(tol):
        raise NumericalError("Zero eigenspace is numerically defective; try a different tolerance")

    dim = model.dim
    mixed = vec(np.eye(dim, dtype=complex) / dim)
    fixed = unvec(right @ np.linalg.solve(gram, dagger(left) @ mixed), dim)
    fixed = 0.5 * (fixed + dagger(fixed))
    fixed = fixed / np.real(np.trace(fixed))

    candidates = []
    for column in right.T:
        matrix = unvec(column, dim)
        for part in (0.5 * (matrix + dagger(matrix)), -0.5j * (matrix - dagger(matrix))):
            flat = vec(part)
            candidates.append(np.concatenate([flat.real, flat.imag]))
    real_frame = scipy.linalg.orth(np.column_stack(candidates), rcond=np.sqrt(tol))
    basis = []
    for column in real_frame.T[: right.shape[1]]:
        half = column.shape[0] // 2
        matrix = unvec(column[:half] + 1j * column[half:], dim)
        basis.append(0.5 * (matrix + dagger(matrix)))
    return basis, DensityOperator(fixed)


def spectrum(model: LindbladModel) -> np.ndarray:
    """Superoperator eigenvalues sorted by decreasing real part, ties by imaginary part."""
    eigenvalues = scipy.linalg.eigvals(superoperator(model))
    order = np.lexsort((np.round(eigenvalues.imag, 12), -np.round(eigenvalues.real, 12)))
    return eigenvalues[order]


def unique_steady_state(model: LindbladModel, tol: float = DEFAULT_TOL) -> bool:
    """
    True iff the generator has a one-dimensional kernel and no purely imaginary nonzero eigenvalues, in which case
    the unique fixed state is globally attractive.
    """
    generator = superoperator(model)
    scale = max(1.0, np.linalg.norm(generator, 2))
    if kernel(generator, tol, scale=scale).dim != 1:
        return False
    eigenvalues = scipy.linalg.eigvals(generator)
    peripheral = (np.abs(eigenvalues.real) <= tol * scale) & (np.abs(eigenvalues.imag) > tol * scale)
    return not bool(np.any(peripheral))


def _witness_state(model: LindbladModel, witness: SubspaceBasis, tol: float) -> Optional[DensityOperator]:
    try:
        _, reduced = steady_states(compress(model, witness), tol)
    except NumericalError as e:
        logger.warning("Could not build a fixed state on the obstruction witness: %s", e)
        return None
    return DensityOperator(witness.vectors @ reduced.rho @ dagger(witness.vectors))


def _lasalle_decay_check(
    model: LindbladModel, subspace: SubspaceBasis, remainder: SubspaceBasis, hr_prime: SubspaceBasis, tol: float
) -> bool:
    """The decay operator on H_R is PSD and vanishes exactly on H_R'."""
    if remainder.is_zero:
        return True
    decay = lasalle_operator(model, subspace)
    threshold = tol * operator_scale(model) ** 2
    if np.linalg.eigvalsh(0.5 * (decay + dagger(decay))).min() < -threshold:
        return False
    coordinates = dagger(remainder.vectors) @ hr_prime.vectors
    return bool(np.linalg.norm(decay @ coordinates) <= threshold)


def is_attractive(
    model: LindbladModel, subspace: SubspaceBasis, tol: float = DEFAULT_TOL, strict_initfree: bool = False
) -> AnalysisReport:
    """
    Decide attractivity of ``subspace``: it must be invariant and H_R' must not contain a nonzero invariant subspace.

    :return: Report with H_R', the obstruction witness (the largest invariant subspace inside H_R') and a fixed state
        supported on the witness.
    """
    invariant, residuals = check_invariance_subspace(model, subspace, tol, strict_initfree)
    if not invariant:
        logger.info("Target is not invariant: %s", residuals)
        return AnalysisReport(False, False, SubspaceBasis.zero(model.dim), residuals=residuals)

    hr_prime = h_r_prime(model, subspace, tol)
    witness = largest_invariant_subspace(model, hr_prime, tol)
    attractive = witness.is_zero
    report = AnalysisReport(
        invariant=True,
        attractive=attractive,
        hr_prime=hr_prime,
        obstruction_witness=None if attractive else witness,
        residuals=residuals,
    )

    remainder = orthogonal_complement(subspace)
    report.lasalle_decay_check = _lasalle_decay_check(model, subspace, remainder, hr_prime, tol)
    if not remainder.is_zero:
        report.hermitian_obstruction = hermitian_noise_obstruction(model, subspace, tol)
        if report.hermitian_obstruction:
            report.notes.append("every noise operator is block diagonal, so the remainder is invariant as well")

    if not attractive:
        report.witness_state = _witness_state(model, witness, tol)
        if report.witness_state is not None:
            stationarity = float(np.linalg.norm(apply_generator(model, report.witness_state.rho)))
            report.residuals["witness_stationarity"] = stationarity
            if stationarity > np.sqrt(tol) * operator_scale(model):
                report.notes.append("subspace-level and state-level verdicts disagree at this tolerance")
    logger.info(
        "Attractivity: invariant=%s attractive=%s dim H_R'=%d witness=%d",
        invariant,
        attractive,
        hr_prime.dim,
        0 if attractive else witness.dim,
    )
    return report


def factor_generator(
    model: LindbladModel, decomposition: SpaceDecomposition, tol: float = DEFAULT_TOL
) -> Tuple[LindbladModel, LindbladModel]:
    """
    Reduced generators on the two factors when the SF-block generator has the product form L_S⊗I + I⊗L_F.

    Noise SF-blocks of the form I⊗C feed the F-factor, those of the form C⊗I the S-factor; scalar blocks feed
    neither.

    :raises PreconditionError: when the SF-blocks do not have a one-sided tensor form.
    """
    dims = decomposition.factor_dims
    system = decomposition.system
    threshold = tol * operator_scale(model)
    h_s, h_f, split_residual = local_split(block_extract(model.hamiltonian, system, system), dims)
    if split_residual > threshold:
        raise PreconditionError(f"H_SF does not split into local terms (residual {split_residual:.3e})")
    noise_s, noise_f = [], []
    for op in model.absorbed_noise:
        sf_block = block_extract(op, system, system)
        on_f_factor, on_s = one_sided_factor(sf_block, dims, identity_on=0)
        on_s_factor, on_f = one_sided_factor(sf_block, dims, identity_on=1)
        if on_s <= threshold and on_f <= threshold:
            continue
        if on_s <= threshold:
            noise_f.append(NoiseChannel(on_f_factor, 1.0))
        elif on_f <= threshold:
            noise_s.append(NoiseChannel(on_s_factor, 1.0))
        else:
            raise PreconditionError("A noise SF-block is not of one-sided tensor form")
    return LindbladModel(h_s, tuple(noise_s)), LindbladModel(h_f, tuple(noise_f))


def is_attractive_subsystem(
    model: LindbladModel, decomposition: SpaceDecomposition, tol: float = DEFAULT_TOL
) -> AnalysisReport:
    """
    Subsystem verdict: invariance of the subsystem, attractivity of H_SF and the product-generator criterion.

    A factor generator with a unique attractive state is sufficient. A trivial generator on one factor combined with
    several invariant states of the other is an obstruction. Anything else is reported as undecided.
    """
    invariant, factorization = check_invariance_subsystem(model, decomposition, tol)
    residuals = {
        "noise_q": factorization["noise_q"],
        "interplay": factorization["interplay"],
        "hamiltonian_split": factorization["hamiltonian_split"],
    }
    if not invariant:
        return AnalysisReport(False, False, SubspaceBasis.zero(model.dim), residuals=residuals)

    subspace_report = is_attractive(model, decomposition.system, tol)
    subspace_report.residuals.update(residuals)
    if not subspace_report.attractive:
        subspace_report.notes.append("H_SF itself is not attractive")
        return subspace_report

    generator_s, generator_f = factor_generator(model, decomposition, tol)
    unique_s = unique_steady_state(generator_s, tol)
    unique_f = unique_steady_state(generator_f, tol)
    if unique_s or unique_f:
        subspace_report.notes.append(
            f"reduced generator on the {'F' if unique_f else 'S'} factor has a unique attractive state"
        )
        return subspace_report

    trivial_s = np.allclose(superoperator(generator_s), 0, atol=tol)
    trivial_f = np.allclose(superoperator(generator_f), 0, atol=tol)
    if trivial_s or trivial_f:
        subspace_report.attractive = False
        subspace_report.obstruction_witness = decomposition.system
        subspace_report.notes.append("one factor evolves trivially and the other has several invariant states")
        return subspace_report
    subspace_report.attractive = None
    subspace_report.notes.append("product-generator criterion is inconclusive")
    return subspace_report
