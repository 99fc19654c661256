"""
Dense complex linear algebra used by every other engine.

Conventions: hbar = 1, tensor products are row-major (index of |a>⊗|b> is a * dim_b + b) and subspaces are carried
as orthonormal frames (:class:`SubspaceBasis`), never as bare projectors.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from src.core.exceptions import DimensionError, DomainError, NumericalError
from src.data.subspace_basis import SubspaceBasis

DEFAULT_TOL = 1e-9

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)


def as_matrix(x: np.ndarray, name: str = "matrix") -> np.ndarray:
    array = np.asarray(x, dtype=complex)
    if array.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise DomainError(f"{name} has non-finite entries")
    return array


def as_square(x: np.ndarray, name: str = "matrix") -> np.ndarray:
    array = as_matrix(x, name)
    if array.shape[0] != array.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {array.shape}")
    return array


def dagger(x: np.ndarray) -> np.ndarray:
    return np.conj(x).T


def hermitian_residual(x: np.ndarray) -> float:
    """Frobenius norm of X - X†."""
    return float(np.linalg.norm(x - dagger(x)))


def hermitian_split(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Split a square matrix as X = X^H + i X^A with both parts Hermitian.

    :param x: Square complex matrix.
    :return: ``(X^H, X^A)`` with X^H = (X + X†)/2 and X^A = (X - X†)/(2i).
    """
    x = as_square(x, "Operand of the Hermitian split")
    return 0.5 * (x + dagger(x)), -0.5j * (x - dagger(x))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = as_square(a, "Left commutator operand")
    b = as_square(b, "Right commutator operand")
    if a.shape != b.shape:
        raise DimensionError(f"Commutator operands differ in shape: {a.shape} vs {b.shape}")
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b + b @ a


def canonical_phase(frame: np.ndarray) -> np.ndarray:
    """
    Fix the free phase of each column: the first entry whose modulus is (numerically) maximal is made real positive.

    Keeps frames returned by SVD-based routines reproducible, which in turn makes synthesized couplings
    deterministic.
    """
    frame = np.array(frame, dtype=complex)
    for j in range(frame.shape[1]):
        column = frame[:, j]
        moduli = np.abs(column)
        if moduli.max() == 0:
            continue
        pivot = int(np.argmax(moduli >= moduli.max() * (1 - 1e-9)))
        frame[:, j] = column * np.conj(column[pivot]) / moduli[pivot]
    return frame


def kernel(a: np.ndarray, tol: float = DEFAULT_TOL, scale: Optional[float] = None) -> SubspaceBasis:
    """
    Orthonormal basis of the numerical kernel of ``a``.

    Singular directions with singular value at most ``tol * scale`` are kept; ``scale`` defaults to the largest
    singular value (so the test reads ||A v|| <= tol ||A|| ||v||). Callers that decide exact-zero conditions pass an
    absolute operator scale instead, so that a block made of pure round-off is still recognized as zero.

    :param a: Matrix of shape (m, n).
    :param tol: Relative threshold, must be positive.
    :param scale: Reference magnitude for the threshold.
    :return: Kernel frame in C^n.
    """
    if tol <= 0:
        raise DomainError("Kernel tolerance must be positive")
    a = as_matrix(a, "Kernel operand")
    n = a.shape[1]
    if a.shape[0] == 0 or n == 0:
        return SubspaceBasis(np.eye(n, dtype=complex))
    _, singular_values, vh = scipy.linalg.svd(a, full_matrices=True)
    reference = singular_values[0] if scale is None else scale
    rank = int(np.sum(singular_values > tol * reference))
    return SubspaceBasis(canonical_phase(dagger(vh[rank:])))


def rank(a: np.ndarray, tol: float = DEFAULT_TOL) -> int:
    a = as_matrix(a, "Rank operand")
    return a.shape[1] - kernel(a, tol).dim


def orthogonal_complement(basis: SubspaceBasis, within: Optional[SubspaceBasis] = None) -> SubspaceBasis:
    """Complement of ``basis`` inside ``within`` (the whole space by default)."""
    container = within if within is not None else SubspaceBasis.full(basis.ambient_dim)
    if container.ambient_dim != basis.ambient_dim:
        raise DimensionError("Complement taken inside a subspace of a different ambient space")
    if container.is_zero:
        return container
    if basis.is_zero:
        return SubspaceBasis(canonical_phase(container.vectors))
    coordinates = kernel(dagger(basis.vectors) @ container.vectors, DEFAULT_TOL, scale=1.0)
    return embed(container, coordinates.vectors)


def embed(container: SubspaceBasis, coordinates: np.ndarray) -> SubspaceBasis:
    """Map coordinate vectors relative to ``container`` back to ambient coordinates."""
    if coordinates.shape[1] == 0:
        return SubspaceBasis.zero(container.ambient_dim)
    frame, _ = np.linalg.qr(container.vectors @ coordinates)
    return SubspaceBasis(canonical_phase(frame))


def subspace_intersection(subspaces: Sequence[SubspaceBasis], tol: float = DEFAULT_TOL) -> SubspaceBasis:
    """
    Intersection of subspaces of a common ambient space.

    The intersection is the kernel of the stacked complement projectors I - P_i.

    :param subspaces: At least one frame.
    :param tol: Rank threshold, absolute since projectors have unit scale.
    :return: Frame of the intersection.
    """
    subspaces = list(subspaces)
    if not subspaces:
        raise DimensionError("Intersection of an empty family is undefined without an ambient space")
    ambient = subspaces[0].ambient_dim
    if any(s.ambient_dim != ambient for s in subspaces):
        raise DimensionError("Subspaces live in different ambient spaces")
    if len(subspaces) == 1:
        return subspaces[0]
    stacked = np.vstack([np.eye(ambient) - s.projector for s in subspaces])
    return kernel(stacked, tol, scale=1.0)


def tensor_product(*factors: np.ndarray) -> np.ndarray:
    """Kronecker product, first factor slow."""
    result = np.ones((1, 1), dtype=complex)
    for factor in factors:
        result = np.kron(result, as_matrix(factor, "Tensor factor"))
    return result


def _check_factorization(x: np.ndarray, dims: Tuple[int, int]) -> Tuple[int, int]:
    x = as_square(x, "Operand")
    d1, d2 = int(dims[0]), int(dims[1])
    if d1 < 1 or d2 < 1 or d1 * d2 != x.shape[0]:
        raise DimensionError(f"Dimensions {dims} do not factor a {x.shape[0]}x{x.shape[0]} operator")
    return d1, d2


def partial_trace(x: np.ndarray, dims: Tuple[int, int], which: int = 1) -> np.ndarray:
    """
    Contract one tensor factor.

    :param x: Operator on C^d1 ⊗ C^d2.
    :param dims: ``(d1, d2)``.
    :param which: Factor to trace out, 0 for the first and 1 for the second.
    :return: Reduced operator on the remaining factor.
    """
    d1, d2 = _check_factorization(x, dims)
    blocks = np.asarray(x, dtype=complex).reshape(d1, d2, d1, d2)
    if which == 1:
        return np.einsum("ajbj->ab", blocks)
    if which == 0:
        return np.einsum("iaib->ab", blocks)
    raise DimensionError(f"Factor selector must be 0 or 1, got {which}")


def rearrange_kronecker(x: np.ndarray, dims: Tuple[int, int]) -> np.ndarray:
    """
    Rearrangement R with R(A⊗B) = vec(A) vec(B)^T (row-major vec), so X is a single Kronecker product iff R(X) has
    rank one.
    """
    d1, d2 = _check_factorization(x, dims)
    blocks = np.asarray(x, dtype=complex).reshape(d1, d2, d1, d2)
    return blocks.transpose(0, 2, 1, 3).reshape(d1 * d1, d2 * d2)


def nearest_kronecker(x: np.ndarray, dims: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Best Frobenius approximation X ≈ A⊗B.

    :return: ``(A, B, residual)`` with residual ||X - A⊗B||_F.
    """
    d1, d2 = _check_factorization(x, dims)
    u, s, vh = scipy.linalg.svd(rearrange_kronecker(x, dims))
    a = np.sqrt(s[0]) * u[:, 0].reshape(d1, d1)
    b = np.sqrt(s[0]) * vh[0].reshape(d2, d2)
    return a, b, float(np.sqrt(np.sum(s[1:] ** 2)))


def one_sided_factor(x: np.ndarray, dims: Tuple[int, int], identity_on: int) -> Tuple[np.ndarray, float]:
    """
    Closest operator of the form I⊗C (``identity_on=0``) or C⊗I (``identity_on=1``).

    The factor is the trace-normalized partial contraction, which is the exact Frobenius projection.

    :return: ``(C, residual)``.
    """
    d1, d2 = _check_factorization(x, dims)
    if identity_on == 0:
        factor = partial_trace(x, dims, which=0) / d1
        return factor, float(np.linalg.norm(x - np.kron(np.eye(d1), factor)))
    factor = partial_trace(x, dims, which=1) / d2
    return factor, float(np.linalg.norm(x - np.kron(factor, np.eye(d2))))


def local_split(x: np.ndarray, dims: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Closest operator of the form X_1⊗I + I⊗X_2.

    :return: ``(X_1, X_2, residual)`` with the scalar part assigned to X_1.
    """
    d1, d2 = _check_factorization(x, dims)
    scalar = np.trace(x) / (d1 * d2)
    first = partial_trace(x, dims, which=1) / d2
    second = partial_trace(x, dims, which=0) / d1 - scalar * np.eye(d2)
    fitted = np.kron(first, np.eye(d2)) + np.kron(np.eye(d1), second)
    return first, second, float(np.linalg.norm(x - fitted))


def block_extract(x: np.ndarray, row_space: SubspaceBasis, col_space: SubspaceBasis) -> np.ndarray:
    """
    V_row† X V_col, the block of X mapping ``col_space`` into ``row_space``.

    With H = S ⊕ R: X_P = block(X, S, R) and X_Q = block(X, R, S).
    """
    x = as_square(x, "Operand of the block extraction")
    if row_space.ambient_dim != x.shape[0] or col_space.ambient_dim != x.shape[0]:
        raise DimensionError(
            f"Frames of ambient dims {row_space.ambient_dim}/{col_space.ambient_dim} do not match a "
            f"{x.shape[0]}x{x.shape[0]} operator"
        )
    return dagger(row_space.vectors) @ x @ col_space.vectors


def block_embed(block: np.ndarray, row_space: SubspaceBasis, col_space: SubspaceBasis) -> np.ndarray:
    """Inverse of :func:`block_extract` on one block: V_row B V_col†."""
    return row_space.vectors @ block @ dagger(col_space.vectors)


def support_projector(x: np.ndarray, tol: float = DEFAULT_TOL) -> SubspaceBasis:
    """
    Range of a Hermitian positive semidefinite operator.

    :param x: Hermitian PSD operator.
    :param tol: Eigenvalues above ``tol * lambda_max`` count as support.
    :return: Frame of the support.
    """
    x = as_square(x, "Operand of the support projector")
    scale = max(np.linalg.norm(x, 2), 1.0)
    if hermitian_residual(x) > tol * scale:
        raise DomainError(f"Operator is not Hermitian (residual {hermitian_residual(x):.3e})")
    eigenvalues, eigenvectors = scipy.linalg.eigh(0.5 * (x + dagger(x)))
    largest = eigenvalues.max(initial=0.0)
    if eigenvalues.min(initial=0.0) < -max(tol * scale, 1e-12):
        raise DomainError(f"Operator has a negative eigenvalue {eigenvalues.min():.3e}")
    if largest <= 0:
        return SubspaceBasis.zero(x.shape[0])
    keep = eigenvalues > tol * largest
    return SubspaceBasis(canonical_phase(eigenvectors[:, keep][:, ::-1]))


def matrix_exponential(a: np.ndarray, t: float = 1.0) -> np.ndarray:
    """
    exp(t A) by scaling and squaring with Padé approximants.

    :raises NumericalError: when the result is not finite.
    """
    a = as_square(a, "Exponent")
    with np.errstate(over="raise", invalid="raise"):
        try:
            result = scipy.linalg.expm(t * a)
        except FloatingPointError as e:
            raise NumericalError(f"Matrix exponential overflowed: {e}") from e
    if not np.all(np.isfinite(result)):
        raise NumericalError("Matrix exponential produced non-finite entries")
    return result


def principal_angles(a: SubspaceBasis, b: SubspaceBasis) -> np.ndarray:
    """Principal angles between two subspaces, in radians."""
    if a.ambient_dim != b.ambient_dim:
        raise DimensionError("Subspaces live in different ambient spaces")
    if a.is_zero or b.is_zero:
        return np.zeros(0)
    return scipy.linalg.subspace_angles(a.vectors, b.vectors)


def same_subspace(a: SubspaceBasis, b: SubspaceBasis, tol: float = 1e-9) -> bool:
    """Returns True if both frames span the same subspace up to principal angle ``tol``."""
    if a.dim != b.dim:
        return False
    angles = principal_angles(a, b)
    return bool(angles.size == 0 or angles.max() <= tol)


def pauli(label: str) -> np.ndarray:
    """Pauli matrix by label: one of I, X, Y, Z."""
    table = {"I": np.eye(2, dtype=complex), "X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}
    return table[label.upper()].copy()


def spin_operators(j: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Spin-j angular momentum matrices (J_x, J_y, J_z) in the J_z eigenbasis ordered m = j, j-1, ..., -j.
    """
    m = np.arange(j, -j - 1, -1)
    raising = np.diag(np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    j_x = 0.5 * (raising + dagger(raising))
    j_y = -0.5j * (raising - dagger(raising))
    return j_x, j_y, np.diag(m).astype(complex)


def unitary_with_first_column(psi: np.ndarray) -> np.ndarray:
    """
    Unitary U with U e_1 = psi, completed by modified Gram-Schmidt over the standard basis.

    The standard vector aligned with the largest |component| of psi is dropped first so that the remaining candidates
    are never close to dependent.
    """
    psi = np.asarray(psi, dtype=complex).ravel()
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-10:
        raise DomainError(f"State vector is not normalized (norm {norm:.12f})")
    dim = psi.shape[0]
    pivot = int(np.argmax(np.abs(psi)))
    columns = [psi]
    for index in (i for i in range(dim) if i != pivot):
        candidate = np.zeros(dim, dtype=complex)
        candidate[index] = 1.0
        for column in columns:
            candidate = candidate - np.vdot(column, candidate) * column
        columns.append(candidate / np.linalg.norm(candidate))
    return np.column_stack(columns)


def stacked_blocks(operators: Iterable[np.ndarray], row_space: SubspaceBasis, col_space: SubspaceBasis) -> np.ndarray:
    """Vertical stack of the blocks of several operators, for joint kernel computations."""
    blocks = [block_extract(op, row_space, col_space) for op in operators]
    if not blocks:
        return np.zeros((0, col_space.dim), dtype=complex)
    return np.vstack(blocks)
