import numpy as np
import pytest
import scipy.linalg
from numpy.testing import assert_allclose

from src.api.fixtures import MODELS_DIR, get_fixture
from src.api.model_file import parse_model
from src.core.analysis import (
    check_invariance_subspace,
    check_invariance_subsystem,
    factor_generator,
    h_r_prime,
    hermitian_noise_obstruction,
    is_attractive,
    is_attractive_subsystem,
    largest_invariant_subspace,
    lasalle_derivative,
    spectrum,
    steady_states,
    unique_steady_state,
)
from src.core.exceptions import DimensionError, PreconditionError
from src.core.matrix_core import SIGMA_PLUS, SIGMA_X, SIGMA_Z, dagger, same_subspace
from src.core.model import apply_generator, random_density, random_hermitian, superoperator, vec
from src.core.synthesis import invariance_compensation
from src.data.density_operator import DensityOperator
from src.data.lindblad_model import LindbladModel, NoiseChannel
from src.data.subspace_basis import SubspaceBasis
from src.data.target import SpaceDecomposition

GROUND = SubspaceBasis(np.eye(2, 1, dtype=complex))
PLANTED_CASES = ["attractive", "leaky", "decoupled", "weak"]
WEAK_COUPLING = 0.2
DEFICIT_THRESHOLD = 1e-6


def amplitude_damping(rate: float = 1.0) -> LindbladModel:
    return LindbladModel(np.zeros((2, 2)), (NoiseChannel(SIGMA_PLUS, rate),))


def _ginibre(rng, rows, cols=None):
    cols = rows if cols is None else cols
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def planted_model(seed: int, case: str, dim: int = 3, target_dim: int = 1, witness_dim: int = 1) -> LindbladModel:
    """
    Random model with planted structure around the target span{e_1, ..., e_s}, s = ``target_dim``.

    attractive: noise Q-blocks zeroed, Hamiltonian compensated.
    leaky: untouched random model, generically not invariant.
    decoupled: as attractive, with the last ``witness_dim`` levels cut off from all others, so they are an invariant
        subspace of the remainder.
    weak: as decoupled, plus a weak Hamiltonian coupling between the cut-off levels and the rest of the remainder.

    Finally the remainder is rotated by a random unitary, which puts the planted levels in a generic direction.
    """
    rng = np.random.default_rng(seed)
    trapped, rest = slice(dim - witness_dim, dim), slice(0, dim - witness_dim)
    hamiltonian = random_hermitian(dim, rng)
    noise = []
    for _ in range(2):
        operator = _ginibre(rng, dim) / np.sqrt(2 * dim)
        if case != "leaky":
            operator[target_dim:, :target_dim] = 0
        if case in ("decoupled", "weak"):
            operator[trapped, rest] = 0
            operator[rest, trapped] = 0
        noise.append(NoiseChannel(operator, float(rng.uniform(0.5, 1.5))))
    if case in ("decoupled", "weak"):
        hamiltonian[trapped, rest] = 0
        hamiltonian[rest, trapped] = 0
    if case == "weak":
        hamiltonian[dim - witness_dim, target_dim] += WEAK_COUPLING
        hamiltonian[target_dim, dim - witness_dim] += WEAK_COUPLING

    model = LindbladModel(hamiltonian, tuple(noise))
    if case != "leaky":
        model = invariance_compensation(model, SubspaceBasis(np.eye(dim, target_dim, dtype=complex))).closed_loop

    rotation = np.eye(dim, dtype=complex)
    rotation[target_dim:, target_dim:] = np.linalg.qr(_ginibre(rng, dim - target_dim))[0]
    return LindbladModel(
        rotation @ model.hamiltonian @ dagger(rotation),
        tuple(NoiseChannel(rotation @ c.operator @ dagger(rotation), c.rate) for c in model.noise),
    )


def _planted_dims(seed: int, case: str):
    rng = np.random.default_rng(10_000 + seed)
    if case == "weak":
        dim = int(rng.integers(3, 7))
        target_dim = int(rng.integers(1, dim - 1))
        return dim, target_dim, int(rng.integers(1, dim - target_dim))
    dim = int(rng.integers(2, 7))
    target_dim = int(rng.integers(1, dim))
    return dim, target_dim, int(rng.integers(1, dim - target_dim + 1))


def spanning_states(dim: int) -> np.ndarray:
    """Column-stacked |i><i| and the two superpositions of every pair i < j: dim² states spanning all operators."""
    basis = np.eye(dim)
    columns = []
    for i in range(dim):
        columns.append(vec(np.outer(basis[i], basis[i])))
        for j in range(i + 1, dim):
            for phase in (1.0, 1j):
                psi = (basis[i] + phase * basis[j]) / np.sqrt(2)
                columns.append(vec(np.outer(psi, psi.conj())))
    return np.column_stack(columns)


def propagation_verdict(model: LindbladModel, subspace: SubspaceBasis, squarings: int = 10) -> bool:
    """
    Attractivity decided by brute force: every spanning state keeps at most DEFICIT_THRESHOLD outside the target.

    The propagator at T = 200/γ_min is squared ``squarings`` times so slow weakly coupled modes have settled too.
    """
    horizon = 200.0 / min(channel.rate for channel in model.noise)
    propagator = scipy.linalg.expm(horizon * superoperator(model))
    for _ in range(squarings):
        propagator = propagator @ propagator
    remainder = np.eye(model.dim) - subspace.projector
    deficits = np.real(vec(remainder.T) @ propagator @ spanning_states(model.dim))
    return bool(np.max(deficits) <= DEFICIT_THRESHOLD)


def assert_fixed_on_witness(model: LindbladModel, report) -> None:
    assert report.witness_state is not None
    state = report.witness_state.rho
    projector = report.obstruction_witness.projector
    assert np.linalg.norm(state - projector @ state @ projector) <= 1e-8
    assert np.linalg.norm(apply_generator(model, state)) <= 1e-8


class TestInvariance:
    def test_amplitude_damping_ground_state(self):
        invariant, residuals = check_invariance_subspace(amplitude_damping(), GROUND)
        assert invariant
        assert residuals["noise_q"] == 0.0
        assert residuals["noise_p"] == pytest.approx(1.0)

    def test_excited_state_is_not_invariant(self):
        excited = SubspaceBasis(np.array([[0], [1]], dtype=complex))
        invariant, residuals = check_invariance_subspace(amplitude_damping(), excited)
        assert not invariant
        assert residuals["noise_q"] == pytest.approx(1.0)

    def test_strict_initfree_requires_vanishing_p_blocks(self):
        invariant, _ = check_invariance_subspace(amplitude_damping(), GROUND, strict_initfree=True)
        assert not invariant

    def test_hamiltonian_coupling_breaks_invariance(self):
        model = LindbladModel(SIGMA_X, (NoiseChannel(SIGMA_PLUS, 1.0),))
        invariant, residuals = check_invariance_subspace(model, GROUND)
        assert not invariant
        assert residuals["interplay"] == pytest.approx(1.0)

    def test_zero_target_is_rejected(self):
        with pytest.raises(DimensionError):
            check_invariance_subspace(amplitude_damping(), SubspaceBasis.zero(2))


class TestHRPrime:
    def test_amplitude_damping_has_no_trapped_directions(self):
        assert h_r_prime(amplitude_damping(), GROUND).is_zero

    def test_requires_invariance(self):
        with pytest.raises(PreconditionError):
            h_r_prime(LindbladModel(SIGMA_X), GROUND)

    def test_bell_target_without_control(self):
        parsed = parse_model(MODELS_DIR / "example3_no_control.json")
        expected = get_fixture("example3").published_hr_prime
        assert same_subspace(h_r_prime(parsed.model, parsed.target.subspace), expected)


class TestAttractivity:
    def test_amplitude_damping_is_attractive(self):
        report = is_attractive(amplitude_damping(), GROUND)
        assert report.invariant and report.attractive
        assert report.obstruction_witness is None
        assert report.lasalle_decay_check
        assert not report.hermitian_obstruction

    def test_dephasing_is_obstructed(self):
        model = LindbladModel(np.zeros((2, 2)), (NoiseChannel(SIGMA_Z, 1.0),))
        report = is_attractive(model, GROUND)
        assert report.invariant and report.attractive is False
        assert report.hermitian_obstruction
        assert report.obstruction_witness.dim == 1
        assert_allclose(report.witness_state.rho, np.diag([0, 1]), atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_one_dimensional_witness_carries_a_fixed_state(self, seed):
        model = planted_model(seed, "decoupled", dim=4, target_dim=1, witness_dim=1)
        report = is_attractive(model, SubspaceBasis(np.eye(4, 1, dtype=complex)))
        assert report.invariant and report.attractive is False
        assert report.obstruction_witness.dim == 1
        assert_fixed_on_witness(model, report)
        assert_allclose(report.witness_state.rho, report.obstruction_witness.projector, atol=1e-10)

    def test_not_invariant_target(self):
        report = is_attractive(LindbladModel(SIGMA_X), GROUND)
        assert not report.invariant and report.attractive is False
        assert report.obstruction_witness is None

    def test_bell_target_without_control_has_two_dimensional_witness(self):
        parsed = parse_model(MODELS_DIR / "example3_no_control.json")
        report = is_attractive(parsed.model, parsed.target.subspace)
        assert report.invariant and report.attractive is False
        assert report.obstruction_witness.dim == 2
        assert report.witness_state is not None
        assert np.linalg.norm(apply_generator(parsed.model, report.witness_state.rho)) < 1e-8

    def test_whole_space_is_attractive(self):
        report = is_attractive(amplitude_damping(), SubspaceBasis.full(2))
        assert report.attractive
        assert report.hr_prime.is_zero


class TestPlantedOracle:
    """Verdicts on planted random models agree with brute-force propagation from a spanning set of states."""

    @pytest.mark.parametrize("seed", range(200))
    def test_verdict_matches_propagation(self, seed):
        case = PLANTED_CASES[seed % len(PLANTED_CASES)]
        dim, target_dim, witness_dim = _planted_dims(seed, case)
        model = planted_model(seed, case, dim, target_dim, witness_dim)
        target = SubspaceBasis(np.eye(dim, target_dim, dtype=complex))
        report = is_attractive(model, target)

        assert report.attractive == propagation_verdict(model, target)
        if case != "leaky":
            assert report.invariant
        if case == "decoupled":
            assert report.attractive is False
            assert report.obstruction_witness.dim >= witness_dim
            assert_fixed_on_witness(model, report)


class TestLargestInvariantSubspace:
    def test_container_without_invariant_part(self):
        model = LindbladModel(SIGMA_X, (NoiseChannel(SIGMA_PLUS, 1.0),))
        container = SubspaceBasis(np.array([[0], [1]], dtype=complex))
        assert largest_invariant_subspace(model, container).is_zero

    def test_invariant_container_survives(self):
        model = LindbladModel(np.zeros((2, 2)), (NoiseChannel(SIGMA_Z, 1.0),))
        container = SubspaceBasis(np.array([[0], [1]], dtype=complex))
        assert same_subspace(largest_invariant_subspace(model, container), container)


class TestLaSalle:
    def test_derivative_is_non_positive(self):
        model = planted_model(3, "attractive")
        target = SubspaceBasis(np.eye(3, 1, dtype=complex))
        for seed in range(5):
            assert lasalle_derivative(model, target, random_density(3, seed)) <= 1e-12

    def test_amplitude_damping_rate(self):
        excited = DensityOperator(np.diag([0.0, 1.0]))
        assert lasalle_derivative(amplitude_damping(), GROUND, excited) == pytest.approx(-1.0)

    def test_obstruction_needs_a_remainder(self):
        with pytest.raises(PreconditionError):
            hermitian_noise_obstruction(amplitude_damping(), SubspaceBasis.full(2))


class TestSteadyStates:
    def test_amplitude_damping_fixed_point(self):
        basis, fixed = steady_states(amplitude_damping())
        assert len(basis) == 1
        assert_allclose(fixed.rho, np.diag([1, 0]), atol=1e-10)
        assert unique_steady_state(amplitude_damping())

    def test_dephasing_has_two_dimensional_kernel(self):
        model = LindbladModel(np.zeros((2, 2)), (NoiseChannel(SIGMA_Z, 1.0),))
        basis, fixed = steady_states(model)
        assert len(basis) == 2
        assert_allclose(fixed.rho, np.eye(2) / 2, atol=1e-10)
        for matrix in basis:
            assert_allclose(matrix, dagger(matrix))
        assert not unique_steady_state(model)

    def test_closed_rotation_is_not_uniquely_attractive(self):
        assert not unique_steady_state(LindbladModel(SIGMA_Z))

    def test_spectrum_is_sorted(self):
        eigenvalues = spectrum(amplitude_damping())
        assert_allclose(eigenvalues.real, [0.0, -0.5, -0.5, -1.0], atol=1e-12)


def _two_qubit_frame():
    """Standard two-qubit frame, ordered |s>⊗|f> with S the first qubit and no remainder."""
    return SubspaceBasis(np.eye(4, dtype=complex))


class TestSubsystems:
    def test_local_damping_on_second_qubit(self):
        model = LindbladModel(np.zeros((4, 4)), (NoiseChannel(np.kron(np.eye(2), SIGMA_PLUS), 1.0),))
        decomposition = SpaceDecomposition.from_factor_basis(_two_qubit_frame(), (2, 2))
        invariant, factorization = check_invariance_subsystem(model, decomposition)
        assert invariant
        assert factorization["sides"] == ["identity_on_s"]
        generator_s, generator_f = factor_generator(model, decomposition)
        assert generator_s.noise == ()
        assert unique_steady_state(generator_f)
        report = is_attractive_subsystem(model, decomposition)
        assert report.attractive

    def test_entangling_noise_breaks_subsystem_invariance(self):
        model = LindbladModel(np.zeros((4, 4)), (NoiseChannel(np.kron(SIGMA_PLUS, SIGMA_PLUS), 1.0),))
        decomposition = SpaceDecomposition.from_factor_basis(_two_qubit_frame(), (2, 2))
        invariant, factorization = check_invariance_subsystem(model, decomposition)
        assert not invariant
        assert factorization["sides"] == ["none"]
        assert not is_attractive_subsystem(model, decomposition).invariant

    def test_trivial_factor_with_several_states_is_obstructed(self):
        model = LindbladModel(np.zeros((4, 4)), (NoiseChannel(np.kron(np.eye(2), SIGMA_Z), 1.0),))
        decomposition = SpaceDecomposition.from_factor_basis(_two_qubit_frame(), (2, 2))
        report = is_attractive_subsystem(model, decomposition)
        assert report.invariant
        assert report.attractive is False

    def test_requires_factor_dims(self):
        with pytest.raises(DimensionError):
            check_invariance_subsystem(amplitude_damping(), SpaceDecomposition.from_subspace(GROUND))
