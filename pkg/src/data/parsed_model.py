"""This module contains the ModelOptions and ParsedModel classes."""

from dataclasses import dataclass, field
from typing import Union

from src.core.config import ToleranceConfig
from src.data.lindblad_model import FeedbackModel, LindbladModel
from src.data.target import TargetSpec
from src.utils.settings import RuntimeSettings

_SETTINGS = RuntimeSettings()


@dataclass
class ModelOptions:
    """Data class holding the per-file numerical options."""

    tol: float = _SETTINGS.tol
    coupling_scale: float = _SETTINGS.coupling_scale
    seed: int = 0

    def __post_init__(self) -> None:
        self._validate_options()

    def _validate_options(self) -> None:
        ToleranceConfig(tol=self.tol)
        if self.coupling_scale <= 0:
            raise ValueError("Coupling scale must be positive")
        if self.seed < 0:
            raise ValueError("Seed must be non-negative")


@dataclass
class ParsedModel:
    """Data class representing a validated model file."""

    model: Union[LindbladModel, FeedbackModel]
    target: TargetSpec
    options: ModelOptions = field(default_factory=ModelOptions)
    digest: str = ""
    format_version: str = "1.0"

    @property
    def has_measurement(self) -> bool:
        return isinstance(self.model, FeedbackModel)
