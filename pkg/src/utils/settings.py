"""This module contains the environment-driven runtime settings."""

import os
from dataclasses import dataclass

from dotenv import load_dotenv

from src.utils.logger import logger

load_dotenv()


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning("Ignoring malformed %s=%r, using %s", name, raw, default)
        return default


@dataclass
class RuntimeSettings:
    """A class to hold defaults that may be overridden from the environment or a .env file."""

    tol: float = _env_float("STABILIZER_TOL", 1e-9)
    coupling_scale: float = _env_float("STABILIZER_COUPLING_SCALE", 1.0)
    max_dim: int = int(_env_float("STABILIZER_MAX_DIM", 64))
    log_file: str = os.getenv("STABILIZER_LOG_FILE", "")

    def __post_init__(self) -> None:
        logger.debug(
            "Runtime settings: tol=%s coupling_scale=%s max_dim=%s", self.tol, self.coupling_scale, self.max_dim
        )

    @property
    def logs_to_file(self) -> bool:
        """Returns True when a log file is configured; False otherwise"""
        return bool(self.log_file)
