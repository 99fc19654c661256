"""This module contains the verification engine: propagation, convergence metrics, rates and Monte Carlo checks."""

from __future__ import annotations

from typing import Dict, Iterable, Optional, Sequence

import numpy as np
import pandas as pd
import scipy.linalg

from src.core.analysis import is_attractive, operator_scale
from src.core.config import TargetKind, ToleranceConfig
from src.core.exceptions import DimensionError, NumericalError, PreconditionError
from src.core.matrix_core import DEFAULT_TOL, block_extract, matrix_exponential, partial_trace
from src.core.model import apply_generator, model_digest, random_density, superoperator, unvec, vec
from src.data.density_operator import DensityOperator
from src.data.lindblad_model import LindbladModel
from src.data.subspace_basis import SubspaceBasis
from src.data.target import TargetSpec
from src.data.trajectory import Trajectory, VerificationResult
from src.utils.logger import logger

MAX_PROPAGATION_DIM = 64
RK4_MAX_DIM = 4
METRIC_COLUMNS = ["t", "V", "fidelity", "purity"]


def _hermitized(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def propagate(
    model: LindbladModel,
    rho0: DensityOperator,
    times: Sequence[float],
    max_dim: int = MAX_PROPAGATION_DIM,
    tolerances: Optional[ToleranceConfig] = None,
) -> Trajectory:
    """
    Propagate a state with the dense superoperator exponential.

    Propagators are cached per distinct time step, so a uniform grid needs a single exponential. States are
    re-Hermitized after every step but never clipped.

    :param model: Generator to propagate with.
    :param rho0: Initial state.
    :param times: Strictly increasing sample times starting at 0.
    :param max_dim: Largest Hilbert-space dimension accepted.
    :param tolerances: Positivity and trace tolerances for the propagated states.
    :return: Trajectory sampled at ``times``.
    :raises NumericalError: when a propagated state loses positivity or trace beyond tolerance.
    """
    tolerances = tolerances or ToleranceConfig()
    if model.dim > max_dim:
        raise DimensionError(f"Dimension {model.dim} exceeds the propagation ceiling {max_dim}")
    if rho0.dim != model.dim:
        raise DimensionError(f"Initial state is {rho0.dim}-dimensional, model is {model.dim}-dimensional")
    times = np.asarray(times, dtype=float).ravel()
    if times.size == 0:
        raise DimensionError("At least one sample time is required")
    if times[0] != 0 or np.any(np.diff(times) <= 0):
        raise DimensionError("Sample times must start at 0 and be strictly increasing")

    generator = superoperator(model)
    propagators: Dict[float, np.ndarray] = {}
    initial_trace = float(np.real(np.trace(rho0.rho)))
    states = []
    current = rho0.rho
    previous_time = 0.0
    for t in times:
        step = float(t - previous_time)
        if step > 0:
            if step not in propagators:
                propagators[step] = matrix_exponential(generator, step)
            current = _hermitized(unvec(propagators[step] @ vec(current), model.dim))
        state = DensityOperator(current)
        if state.min_eigenvalue < -tolerances.trajectory_positivity_tol:
            raise NumericalError(f"State at t={t:.6g} has negative eigenvalue {state.min_eigenvalue:.3e}")
        drift = abs(float(np.real(np.trace(current))) - initial_trace)
        if drift > 1e-9:
            raise NumericalError(f"Trace drifted by {drift:.3e} at t={t:.6g}")
        states.append(state)
        previous_time = float(t)
    logger.debug("Propagated %d samples with %d distinct propagators", len(states), len(propagators))
    return Trajectory(times, tuple(states), model_digest(model))


def rk4_propagate(model: LindbladModel, rho0: DensityOperator, horizon: float, steps: int) -> DensityOperator:
    """
    Classical fourth-order Runge-Kutta integration of the master equation, used to cross-check :func:`propagate`.

    :raises DimensionError: for dimensions above four.
    """
    if model.dim > RK4_MAX_DIM:
        raise DimensionError(f"Runge-Kutta cross-check is limited to dimension {RK4_MAX_DIM}")
    if steps < 1:
        raise DimensionError("At least one integration step is required")
    dt = horizon / steps
    rho = np.array(rho0.rho, dtype=complex)
    for _ in range(steps):
        k1 = apply_generator(model, rho)
        k2 = apply_generator(model, rho + 0.5 * dt * k1)
        k3 = apply_generator(model, rho + 0.5 * dt * k2)
        k4 = apply_generator(model, rho + dt * k3)
        rho = _hermitized(rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4))
    return DensityOperator(rho)


def _trace_norm(x: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvalsh(_hermitized(x))).sum())


def factorization_residual(rho: np.ndarray, system: SubspaceBasis, factor_dims) -> float:
    """||rho_SF - tr_F(rho_SF) ⊗ tr_S(rho_SF) / trace(rho_SF)||_1 for the SF-block of ``rho``."""
    block = block_extract(rho, system, system)
    weight = float(np.real(np.trace(block)))
    if weight <= 1e-15:
        return 0.0
    product = np.kron(partial_trace(block, factor_dims, which=1), partial_trace(block, factor_dims, which=0)) / weight
    return _trace_norm(block - product)


def _state_metrics(rho: np.ndarray, target: TargetSpec) -> Dict[str, float]:
    decomposition = target.decomposition()
    row = {
        "V": float(np.real(np.trace(decomposition.remainder.projector @ rho))),
        "purity": float(np.real(np.trace(rho @ rho))),
    }
    if target.kind is TargetKind.PURE_STATE:
        row["fidelity"] = float(np.real(np.vdot(target.payload, rho @ target.payload)))
    else:
        row["fidelity"] = float(np.real(np.trace(decomposition.system.projector @ rho)))
    if target.kind is TargetKind.SUBSYSTEM:
        row["factorization_residual"] = factorization_residual(rho, decomposition.system, decomposition.factor_dims)
    return row


def metrics(trajectory: Trajectory, target: TargetSpec) -> pd.DataFrame:
    """
    Per-sample convergence metrics.

    :param trajectory: Propagated trajectory.
    :param target: Target whose dimension matches the trajectory.
    :return: DataFrame with columns t, V, fidelity, purity (and factorization_residual for subsystem targets).
    """
    if target.dim != trajectory.final_state.dim:
        raise DimensionError(
            f"Target is {target.dim}-dimensional, trajectory is {trajectory.final_state.dim}-dimensional"
        )
    rows = []
    for t, state in zip(trajectory.times, trajectory.states):
        row = {"t": float(t)}
        row.update(_state_metrics(state.rho, target))
        rows.append(row)
    columns = METRIC_COLUMNS + (["factorization_residual"] if target.kind is TargetKind.SUBSYSTEM else [])
    return pd.DataFrame(rows, columns=columns)


def metrics_frame(trajectories: Iterable[Trajectory], target: TargetSpec) -> pd.DataFrame:
    """Metrics of several trajectories stacked with a ``trajectory_id`` column."""
    frames = []
    for trajectory_id, trajectory in enumerate(trajectories):
        frame = metrics(trajectory, target)
        frame["trajectory_id"] = trajectory_id
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=METRIC_COLUMNS + ["trajectory_id"])
    return pd.concat(frames, ignore_index=True)


def convergence_rate(model: LindbladModel, subspace: SubspaceBasis, tol: float = DEFAULT_TOL) -> float:
    """
    Spectral gap -max{Re λ : Re λ < -tol} of the superoperator, the asymptotic exponential rate.

    :raises PreconditionError: when ``subspace`` is not attractive.
    """
    report = is_attractive(model, subspace, tol)
    if not report.attractive:
        raise PreconditionError("Convergence rate is only defined for an attractive target")
    eigenvalues = scipy.linalg.eigvals(superoperator(model))
    decaying = eigenvalues.real[eigenvalues.real < -tol * operator_scale(model)]
    if decaying.size == 0:
        return float("inf")
    rate = -float(decaying.max())
    logger.info("Spectral gap %.6g", rate)
    return rate


def fitted_decay_rate(trajectory: Trajectory, reference: np.ndarray, tail: float = 0.5, floor: float = 1e-12) -> float:
    """
    Least-squares decay rate of log ||rho(t) - reference||_F over the last ``tail`` fraction of the samples.

    :raises NumericalError: when fewer than two samples lie above ``floor``.
    """
    distances = np.array([np.linalg.norm(state.rho - reference) for state in trajectory.states])
    start = int(len(distances) * (1.0 - tail))
    times = trajectory.times[start:]
    distances = distances[start:]
    keep = distances > floor
    if keep.sum() < 2:
        raise NumericalError("Too few samples above the noise floor to fit a decay rate")
    slope, _ = np.polyfit(times[keep], np.log(distances[keep]), 1)
    return -float(slope)


def default_horizon(model: LindbladModel, subspace: SubspaceBasis, tol: float = DEFAULT_TOL) -> float:
    """50 / rate when the target is attractive with a finite rate, 100 otherwise."""
    try:
        rate = convergence_rate(model, subspace, tol)
    except PreconditionError:
        return 100.0
    if not np.isfinite(rate):
        return 100.0
    return 50.0 / rate


def target_deficit(rho: np.ndarray, target: TargetSpec) -> float:
    """Distance of a state from the target: 1 - fidelity, plus the factorization residual for subsystems."""
    row = _state_metrics(rho, target)
    deficit = 1.0 - row["fidelity"]
    if target.kind is TargetKind.SUBSYSTEM:
        deficit = max(deficit, row["factorization_residual"])
    return max(deficit, 0.0)


def monte_carlo_verify(
    model: LindbladModel,
    target: TargetSpec,
    n: int = 20,
    horizon: float = 100.0,
    eps: float = 1e-6,
    seed: int = 0,
    max_dim: int = MAX_PROPAGATION_DIM,
) -> VerificationResult:
    """
    Propagate ``n`` seeded random full-rank states to ``horizon`` and check every final deficit against ``eps``.

    :return: Verdict with the worst initial state and its deficit.
    """
    if n < 1:
        raise DimensionError("Ensemble size must be at least 1")
    if horizon <= 0:
        raise DimensionError("Verification horizon must be positive")
    if target.dim != model.dim:
        raise DimensionError(f"Target is {target.dim}-dimensional, model is {model.dim}-dimensional")
    deficits = []
    worst_index = 0
    initial_states = []
    for i in range(n):
        rho0 = random_density(model.dim, seed + i)
        final = propagate(model, rho0, [0.0, horizon], max_dim).final_state
        deficits.append(target_deficit(final.rho, target))
        initial_states.append(rho0)
        if deficits[-1] > deficits[worst_index]:
            worst_index = i
    worst = deficits[worst_index]
    passed = worst <= eps
    logger.info("Monte Carlo verification over %d states: worst deficit %.3e (passed=%s)", n, worst, passed)
    return VerificationResult(
        passed=passed,
        worst_deficit=worst,
        worst_initial_state=initial_states[worst_index],
        worst_seed=seed + worst_index,
        horizon=horizon,
        eps=eps,
        deficits=deficits,
    )
