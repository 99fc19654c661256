"""This module contains the Stabilizer class, which drives analysis, synthesis and verification of one target."""

from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.core.analysis import is_attractive, is_attractive_subsystem
from src.core.config import StabilizerConfig, TargetKind
from src.core.exceptions import DomainError
from src.core.model import fme_reduce, random_density
from src.core.simulate import default_horizon, metrics_frame, monte_carlo_verify, propagate
from src.core.synthesis import (
    feedback_purestate,
    feedback_subspace,
    feedback_subsystem,
    invariance_compensation,
    openloop_attractor,
)
from src.data.analysis_report import AnalysisReport
from src.data.lindblad_model import FeedbackModel, LindbladModel
from src.data.synthesis_result import SynthesisResult
from src.data.target import TargetSpec
from src.data.trajectory import VerificationResult
from src.utils.logger import logger


@dataclass
class SimulationRun:
    """Data class holding the metric series of an ensemble run and its verification verdict."""

    frame: pd.DataFrame
    horizon: float
    verification: Optional[VerificationResult] = None


class Stabilizer:
    """
    Analyze a model against a target, synthesize controls for it and verify the closed loop.
    """

    def __init__(self, config: Optional[StabilizerConfig] = None) -> None:
        """
        Initialize the Stabilizer.

        :param config: Tolerances, synthesis and simulation settings.
        """
        self.config = config or StabilizerConfig()
        self.history: List[SynthesisResult] = []

    @property
    def tol(self) -> float:
        return self.config.tolerances.tol

    def analyze(self, model: LindbladModel, target: TargetSpec) -> AnalysisReport:
        """
        Invariance and attractivity verdicts for the target.

        :param model: Lindblad model to analyze.
        :param target: Pure state, subspace or subsystem.
        :return: The analysis report.
        """
        if target.kind is TargetKind.SUBSYSTEM:
            return is_attractive_subsystem(model, target.decomposition(), self.tol)
        return is_attractive(model, target.subspace, self.tol, self.config.synthesis.strict_initfree)

    def synthesize(
        self,
        model: Union[LindbladModel, FeedbackModel],
        target: TargetSpec,
        free_blocks: Optional[np.ndarray] = None,
    ) -> SynthesisResult:
        """
        Dispatch to the synthesis procedure matching the model and target.

        Feedback models go through the pure-state, subspace or subsystem feedback design; plain Lindblad models get
        open-loop Hamiltonian compensation followed by the attractivity correction.

        :param model: Open-loop model, with or without a measurement.
        :param target: What should be stabilized.
        :param free_blocks: Optional seed for the free diagonal feedback blocks.
        :return: The synthesis result.
        """
        settings = self.config.synthesis
        if isinstance(model, FeedbackModel):
            hamiltonian, measurement = model.hamiltonian, model.measurement
            knobs = (settings.coupling_scale, self.tol, settings.seed)
            if target.kind is TargetKind.PURE_STATE:
                result = feedback_purestate(hamiltonian, measurement, target.payload, *knobs, free_blocks)
            elif target.kind is TargetKind.SUBSPACE:
                result = feedback_subspace(hamiltonian, measurement, target.subspace, *knobs, free_blocks)
            else:
                result = feedback_subsystem(hamiltonian, measurement, target.decomposition(), *knobs)
        else:
            result = self._openloop(model, target)
        self.history.append(result)
        logger.info("Synthesis for a %s target: feasible=%s", target.kind.value, result.feasible)
        return result

    def _openloop(self, model: LindbladModel, target: TargetSpec) -> SynthesisResult:
        if target.kind is TargetKind.SUBSYSTEM:
            raise DomainError("Subsystem synthesis needs a measurement operator")
        settings = self.config.synthesis
        compensation = invariance_compensation(model, target.subspace, self.tol)
        if not compensation.feasible:
            return compensation
        openloop = openloop_attractor(
            compensation.closed_loop,
            target.subspace,
            settings.coupling_scale,
            self.tol,
            settings.seed,
            settings.max_rounds,
        )
        correction = compensation.hamiltonian_correction
        if openloop.hamiltonian_correction is not None:
            correction = correction + openloop.hamiltonian_correction
        return SynthesisResult(
            feasible=openloop.feasible,
            closed_loop=openloop.closed_loop,
            hamiltonian_correction=correction,
            iterations=openloop.iterations,
            infeasibility_reason=openloop.infeasibility_reason,
            verified_attractive=openloop.verified_attractive,
            hr_prime_dim=openloop.hr_prime_dim,
            used_random_h2=openloop.used_random_h2,
            notes=openloop.notes,
        )

    def closed_loop(
        self, model: Union[LindbladModel, FeedbackModel], target: TargetSpec
    ) -> Tuple[LindbladModel, Optional[SynthesisResult]]:
        """
        The Lindblad model a command should work on.

        Feedback models are replaced by their synthesized closed loop, or by the feedback-off reduction when no
        feedback can be synthesized. Plain Lindblad models are returned as they are.
        """
        if not isinstance(model, FeedbackModel):
            return model, None
        result = self.synthesize(model, target)
        if result.feasible:
            return result.closed_loop, result
        logger.warning("No feedback could be synthesized (%s); using F = 0", result.infeasibility_reason)
        return fme_reduce(model), result

    def horizon(self, model: LindbladModel, target: TargetSpec) -> float:
        if self.config.simulation.horizon is not None:
            return self.config.simulation.horizon
        return default_horizon(model, target.subspace, self.tol)

    def simulate(self, model: LindbladModel, target: TargetSpec) -> SimulationRun:
        """
        Propagate the seeded ensemble on the sampling grid and verify the final states.

        :param model: Closed-loop model.
        :param target: Target the metrics are computed against.
        :return: Metric series of every trajectory and, for a positive horizon, the verification verdict.
        """
        settings = self.config.simulation
        horizon = self.horizon(model, target)
        times = settings.sample_times(horizon)
        tolerances = self.config.tolerances
        trajectories = [
            propagate(model, random_density(model.dim, settings.seed + i), times, settings.max_dim, tolerances)
            for i in range(settings.ensemble)
        ]
        frame = metrics_frame(trajectories, target)
        verification = None
        if horizon > 0:
            verification = monte_carlo_verify(
                model, target, settings.ensemble, horizon, settings.eps, settings.seed, settings.max_dim
            )
        return SimulationRun(frame, horizon, verification)
