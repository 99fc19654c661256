"""This module contains the logger configuration for the stabilizer toolkit."""

import logging
import os

from dotenv import load_dotenv

load_dotenv()

_handlers: list = [logging.StreamHandler()]  # Console output is always on
if os.getenv("STABILIZER_LOG_FILE"):
    _handlers.append(logging.FileHandler(os.getenv("STABILIZER_LOG_FILE")))

logging.basicConfig(
    level=os.getenv("STABILIZER_LOG_LEVEL", "INFO").upper(),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=_handlers,
)

logger = logging.getLogger("stabilizer")
