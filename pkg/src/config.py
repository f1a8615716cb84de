"""
This module provides configuration settings for the simulator.

It includes the logging setup shared by every module and the ambient
settings read from environment variables (log level, optional log file,
default output directory). Simulation parameters never come from the
environment; they are read from scenario documents by
``src.engine.scenario``.

Classes:
    Config: Holds the ambient configuration settings.
    ConfigError: Raised for invalid scenario or CLI parameters.

Functions:
    load_config: Loads the configuration settings.
"""

import logging
import os
from dotenv import load_dotenv

load_dotenv()

LOGGER = logging.getLogger("eecn")
logging.basicConfig(
    level=os.environ.get("LOG_LEVEL", "INFO"),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)

if os.environ.get("LOG_FILE"):
    file_handler = logging.FileHandler(os.environ["LOG_FILE"], encoding="utf-8")
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(
        logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
    )
    LOGGER.addHandler(file_handler)


class ConfigError(ValueError):
    """
    An invalid configuration value.

    ``field`` is the dotted path of the offending entry, e.g.
    ``queues.bottleneck.th1`` or ``flows[3].algo``.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class Config:
    """
    Ambient configuration settings.

    Values are read from environment variables (optionally through a
    ``.env`` file) and fall back to defaults when unset.
    """

    _instance = None

    def __init__(self):
        self.log_level = os.environ.get("LOG_LEVEL", "INFO")
        self.log_file = os.environ.get("LOG_FILE")
        self.output_dir = os.environ.get("EECN_OUTPUT_DIR", ".")
        jobs = os.environ.get("EECN_JOBS", "1")
        try:
            self.parallel_jobs = int(jobs)
        except ValueError:
            raise ConfigError("EECN_JOBS", f"must be an integer, got {jobs!r}") from None
        if self.parallel_jobs < 1:
            raise ConfigError("EECN_JOBS", "must be at least 1")

    @classmethod
    def instance(cls):
        """Create a singleton instance of the Config class.
        Returns:
            Config: The singleton instance of the Config class.
        """
        if cls._instance is None:
            LOGGER.debug("Creating new Config instance")
            cls._instance = Config()
        return cls._instance


def load_config():
    return Config.instance()
