import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.api.fixtures import bloch_state, collective_spin, get_fixture, spin_axis_measurement, triplet_restriction
from src.core.analysis import h_r_prime, is_attractive, is_attractive_subsystem
from src.core.config import TargetKind
from src.core.exceptions import DimensionError, HypothesisError, PreconditionError
from src.core.matrix_core import (
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Z,
    block_extract,
    commutator,
    dagger,
    hermitian_residual,
    orthogonal_complement,
    same_subspace,
    tensor_product,
)
from src.core.model import fme_reduce, random_hermitian, random_model
from src.core.stabilizer import Stabilizer
from src.core.synthesis import (
    feedback_purestate,
    feedback_subspace,
    feedback_subsystem,
    invariance_compensation,
    openloop_attractor,
)
from src.data.lindblad_model import FeedbackModel, LindbladModel, NoiseChannel
from src.data.subspace_basis import SubspaceBasis
from src.data.target import SpaceDecomposition, TargetSpec

GROUND = SubspaceBasis(np.eye(2, 1, dtype=complex))
XZ_ANGLES = [0.0, 0.3, 0.7, 1.1, 1.4, np.pi / 2, 1.8, 2.2, 2.7, 3.0]


def assert_well_formed(result, subspace):
    """Hermitian outputs, a closed loop with no leak out of the target and a bounded number of rounds."""
    assert hermitian_residual(result.feedback) <= 1e-14
    assert hermitian_residual(result.hamiltonian_correction) <= 1e-14
    remainder = orthogonal_complement(subspace)
    for operator in result.closed_loop.absorbed_noise:
        assert np.linalg.norm(block_extract(operator, remainder, subspace)) <= 1e-12
    assert result.iterations <= result.hr_prime_dim


class TestInvarianceCompensation:
    @pytest.mark.parametrize("seed", range(5))
    def test_compensation_restores_invariance(self, seed):
        model = random_model(3, seed)
        noise = []
        for channel in model.noise:
            operator = np.array(channel.operator)
            operator[1:, 0] = 0
            noise.append(NoiseChannel(operator, channel.rate))
        model = LindbladModel(model.hamiltonian, tuple(noise))
        target = SubspaceBasis(np.eye(3, 1, dtype=complex))
        result = invariance_compensation(model, target)
        assert result.feasible
        assert is_attractive(result.closed_loop, target).invariant
        assert hermitian_residual(result.hamiltonian_correction) == 0.0
        # only off-diagonal blocks are touched
        assert abs(result.hamiltonian_correction[0, 0]) < 1e-12
        assert_allclose(result.hamiltonian_correction[1:, 1:], 0)

    def test_leaky_noise_is_infeasible(self):
        model = LindbladModel(np.zeros((2, 2)), (NoiseChannel(SIGMA_PLUS.T, 1.0),))
        result = invariance_compensation(model, GROUND)
        assert not result.feasible
        assert "noise operator 0" in result.infeasibility_reason


class TestOpenLoopAttractor:
    def test_dephasing_remainder_is_infeasible(self):
        model = LindbladModel(np.zeros((2, 2)), (NoiseChannel(SIGMA_Z, 1.0),))
        result = openloop_attractor(model, GROUND)
        assert not result.feasible
        assert result.hr_prime_dim == 1

    def test_coupling_releases_a_trapped_level(self):
        # |0> <- |1> decay with a third level that no noise operator touches
        lowering = np.zeros((3, 3), dtype=complex)
        lowering[0, 1] = 1.0
        model = LindbladModel(np.diag([0.0, 0.0, 0.7]), (NoiseChannel(lowering, 1.0),))
        target = SubspaceBasis(np.eye(3, 1, dtype=complex))
        assert not is_attractive(model, target).attractive
        result = openloop_attractor(model, target)
        assert result.feasible and result.verified_attractive
        assert 1 <= result.iterations <= result.hr_prime_dim == 1
        assert is_attractive(result.closed_loop, target).attractive

    def test_requires_invariance(self):
        with pytest.raises(PreconditionError):
            openloop_attractor(LindbladModel(SIGMA_X), GROUND)

    def test_already_attractive_needs_no_rounds(self):
        model = LindbladModel(np.zeros((2, 2)), (NoiseChannel(SIGMA_PLUS, 1.0),))
        result = openloop_attractor(model, GROUND)
        assert result.feasible and result.iterations == 0
        assert_allclose(result.hamiltonian_correction, 0)


class TestQubitFeedback:
    def test_published_qubit_operators(self):
        fixture = get_fixture("example1")
        parsed = fixture.load()
        result = feedback_purestate(parsed.model.hamiltonian, parsed.model.measurement, parsed.target.payload)
        assert result.feasible and result.verified_attractive
        assert_allclose(result.feedback, fixture.published["feedback"], atol=1e-12)
        assert_allclose(result.hamiltonian_correction, fixture.published["hamiltonian_correction"], atol=1e-12)
        assert_allclose(result.closed_loop.noise[0].operator, fixture.published["noise"], atol=1e-12)
        assert result.iterations == 0
        assert_well_formed(result, parsed.target.subspace)

    @pytest.mark.parametrize("phi", [0.0, np.pi])
    @pytest.mark.parametrize("theta", XZ_ANGLES)
    def test_equatorial_states_are_exactly_the_infeasible_ones(self, theta, phi):
        state = bloch_state(theta, phi)
        result = feedback_purestate(np.zeros((2, 2)), SIGMA_PLUS, state)
        equatorial = np.isclose(theta, np.pi / 2)
        assert result.feasible != equatorial
        if equatorial:
            assert result.infeasibility_reason.startswith("commutation condition [rho_d, M + M†] != 0 violated")
        else:
            assert_well_formed(result, SubspaceBasis(state.reshape(-1, 1)))

    @pytest.mark.parametrize("theta, phi", [(0.4, 0.0), (1.0, 1.3), (2.0, -2.5), (np.pi, 0.0)])
    def test_rotated_measurement_stabilizes_rotated_state(self, theta, phi):
        state = bloch_state(theta, phi)
        result = feedback_purestate(np.zeros((2, 2)), spin_axis_measurement(theta, phi), state)
        assert result.feasible
        assert is_attractive(result.closed_loop, SubspaceBasis(state.reshape(-1, 1))).attractive

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            feedback_purestate(np.zeros((2, 2)), SIGMA_PLUS, np.array([1.0, 0.0, 0.0]))


class TestPublishedFeedback:
    def test_qutrit(self):
        fixture = get_fixture("example2")
        parsed = fixture.load()
        result = Stabilizer().synthesize(parsed.model, parsed.target, free_blocks=fixture.free_blocks)
        assert result.feasible
        assert_allclose(result.feedback, fixture.published["feedback"], atol=1e-12)
        assert_allclose(result.closed_loop.noise[0].operator, fixture.published["noise"], atol=1e-12)
        assert_well_formed(result, parsed.target.subspace)

    def test_bell_state(self):
        fixture = get_fixture("example3")
        parsed = fixture.load()
        result = Stabilizer().synthesize(parsed.model, parsed.target, free_blocks=fixture.free_blocks)
        assert result.feasible and result.verified_attractive
        assert_allclose(result.feedback, fixture.published["feedback"], atol=1e-12)
        report = is_attractive(result.closed_loop, parsed.target.subspace)
        assert report.attractive
        assert same_subspace(report.hr_prime, fixture.published_hr_prime)
        assert_well_formed(result, parsed.target.subspace)

    def test_bell_state_published_correction_is_attractive(self):
        fixture = get_fixture("example3")
        parsed = fixture.load()
        loop = fme_reduce(
            FeedbackModel(
                parsed.model.hamiltonian + fixture.published["hamiltonian_correction"],
                parsed.model.measurement,
                fixture.published["feedback"],
            )
        )
        assert is_attractive(loop, parsed.target.subspace).attractive

    def test_triplet(self):
        fixture = get_fixture("example4")
        parsed = fixture.load()
        result = Stabilizer().synthesize(parsed.model, parsed.target)
        assert result.feasible and result.verified_attractive
        assert_allclose(result.feedback, fixture.published["feedback"], atol=1e-12)
        assert_allclose(result.hamiltonian_correction, fixture.published["hamiltonian_correction"], atol=1e-12)
        assert result.iterations == 1
        assert same_subspace(h_r_prime(result.closed_loop, parsed.target.subspace), fixture.published_hr_prime)
        assert_well_formed(result, parsed.target.subspace)

    def test_triplet_operators_match_collective_spin(self):
        j_z = triplet_restriction(collective_spin("Z"))
        assert_allclose(j_z, np.diag([1.0, 0.0, -1.0]), atol=1e-12)


class TestSubspaceFeedback:
    def test_commuting_measurement_is_infeasible(self):
        target = SubspaceBasis(np.eye(3, 2, dtype=complex))
        result = feedback_subspace(np.zeros((3, 3)), np.diag([1.0, 2.0, 3.0]), target)
        assert not result.feasible
        assert "commutes" in result.infeasibility_reason

    @pytest.mark.parametrize("seed", range(5))
    def test_random_two_dimensional_targets(self, seed):
        rng = np.random.default_rng(seed)
        hamiltonian = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        hamiltonian = hamiltonian + hamiltonian.conj().T
        measurement = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        target = SubspaceBasis(np.linalg.qr(rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2)))[0])
        result = feedback_subspace(hamiltonian, measurement, target, seed=seed)
        assert result.feasible and result.verified_attractive
        assert_well_formed(result, target)


def _planted_measurement(rng, subspace: SubspaceBasis, commuting: bool) -> np.ndarray:
    """Ginibre measurement, or one whose Hermitian part is block diagonal with respect to the target."""
    dim = subspace.ambient_dim
    if not commuting:
        return rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    projector = subspace.projector
    complement = np.eye(dim) - projector
    hermitian = random_hermitian(dim, rng)
    return projector @ hermitian @ projector + complement @ hermitian @ complement + 1j * random_hermitian(dim, rng)


class TestFeasibilityCondition:
    @pytest.mark.parametrize("seed", range(500))
    def test_feasible_exactly_when_the_measurement_moves_the_target(self, seed):
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(2, 7))
        target_dim = int(rng.integers(1, dim))
        frame = rng.standard_normal((dim, target_dim)) + 1j * rng.standard_normal((dim, target_dim))
        target = SubspaceBasis(np.linalg.qr(frame)[0])
        measurement = _planted_measurement(rng, target, commuting=seed % 4 == 0)
        hamiltonian = random_hermitian(dim, rng)
        moved = np.linalg.norm(commutator(target.projector, measurement + dagger(measurement))) > 1e-6

        result = feedback_subspace(hamiltonian, measurement, target, seed=seed)
        assert result.feasible == moved
        assert moved == (seed % 4 != 0)
        if result.feasible:
            assert result.verified_attractive


def _measurement_with_remainder(coupling: float) -> np.ndarray:
    """(2⊗2) ⊕ 1 observable whose SF-block is I⊗σx, coupled to the remainder level."""
    measurement = np.zeros((5, 5), dtype=complex)
    measurement[:4, :4] = np.kron(np.eye(2), SIGMA_X)
    measurement[0, 4] = measurement[4, 0] = coupling
    return measurement


class TestSubsystemFeedback:
    def test_full_space_subsystem(self):
        decomposition = SpaceDecomposition.from_factor_basis(SubspaceBasis(np.eye(4, dtype=complex)), (2, 2))
        result = feedback_subsystem(np.zeros((4, 4)), np.kron(np.eye(2), SIGMA_X), decomposition)
        assert result.feasible and result.verified_attractive
        assert result.factor_state is not None
        assert hermitian_residual(result.feedback) <= 1e-14
        assert is_attractive_subsystem(result.closed_loop, decomposition).attractive

    def test_subsystem_with_remainder(self):
        decomposition = SpaceDecomposition.from_factor_basis(SubspaceBasis(np.eye(5, 4, dtype=complex)), (2, 2))
        result = feedback_subsystem(np.zeros((5, 5)), _measurement_with_remainder(1.0), decomposition)
        assert result.feasible and result.verified_attractive
        assert is_attractive_subsystem(result.closed_loop, decomposition).attractive

    def test_measurement_on_the_system_factor_swaps_roles(self):
        decomposition = SpaceDecomposition.from_factor_basis(SubspaceBasis(np.eye(4, dtype=complex)), (2, 2))
        result = feedback_subsystem(np.zeros((4, 4)), np.kron(SIGMA_X, np.eye(2)), decomposition)
        assert result.feasible
        assert any("swapped" in note for note in result.notes)

    def test_decoupled_remainder_is_infeasible(self):
        decomposition = SpaceDecomposition.from_factor_basis(SubspaceBasis(np.eye(5, 4, dtype=complex)), (2, 2))
        result = feedback_subsystem(np.zeros((5, 5)), _measurement_with_remainder(0.0), decomposition)
        assert not result.feasible
        assert "does not couple" in result.infeasibility_reason

    def test_entangled_measurement_is_infeasible(self):
        decomposition = SpaceDecomposition.from_factor_basis(SubspaceBasis(np.eye(4, dtype=complex)), (2, 2))
        result = feedback_subsystem(np.zeros((4, 4)), tensor_product(SIGMA_X, SIGMA_X), decomposition)
        assert not result.feasible
        assert "neither" in result.infeasibility_reason

    def test_scalar_measurement_is_infeasible(self):
        decomposition = SpaceDecomposition.from_factor_basis(SubspaceBasis(np.eye(4, dtype=complex)), (2, 2))
        result = feedback_subsystem(np.zeros((4, 4)), np.eye(4), decomposition)
        assert not result.feasible
        assert "multiple of the identity" in result.infeasibility_reason

    def test_one_dimensional_factor_is_rejected(self):
        decomposition = SpaceDecomposition.from_factor_basis(SubspaceBasis(np.eye(4, 2, dtype=complex)), (1, 2))
        with pytest.raises(HypothesisError):
            feedback_subsystem(np.zeros((4, 4)), np.eye(4), decomposition)


class TestStabilizerDispatch:
    def test_openloop_path_for_noise_models(self):
        lowering = np.zeros((3, 3), dtype=complex)
        lowering[0, 1] = 1.0
        model = LindbladModel(np.diag([0.0, 0.0, 0.7]), (NoiseChannel(lowering, 1.0),))
        target = TargetSpec(TargetKind.PURE_STATE, np.array([1.0, 0.0, 0.0]))
        result = Stabilizer().synthesize(model, target)
        assert result.feasible
        assert is_attractive(result.closed_loop, target.subspace).attractive
