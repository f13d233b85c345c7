"""
Runtime configuration.

Values come from the environment (optionally seeded from a `.env` file) and can be
overridden by command-line flags.
"""

import os
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field

# Defaults
DEFAULT_ROOT = "dfcatalog"
DEFAULT_CACHE_DIR = os.path.join(os.path.expanduser("~"), ".cache", "dsfactory")
DEFAULT_CACHE_MAX_BYTES = 10 * 1024 * 1024 * 1024
DEFAULT_CACHE_JOURNAL_RECORDS = 100_000
DEFAULT_COALESCE_GAP = 1024 * 1024
DEFAULT_UDF_TIMEOUT = 300.0
DEFAULT_BATCH_SIZE = 64
DEFAULT_READ_AHEAD_BATCHES = 4
DEFAULT_LOCK_TIMEOUT = 30.0


class Settings(BaseModel):
    """Resolved configuration for one process."""

    root: str = DEFAULT_ROOT
    cache_dir: str = DEFAULT_CACHE_DIR
    shared_cache_dir: Optional[str] = None
    cache_max_bytes: int = Field(default=DEFAULT_CACHE_MAX_BYTES, gt=0)
    coalesce_gap: int = Field(default=DEFAULT_COALESCE_GAP, ge=0)
    udf_timeout: float = Field(default=DEFAULT_UDF_TIMEOUT, gt=0)
    batch_size: int = Field(default=DEFAULT_BATCH_SIZE, ge=1)
    workers: int = Field(default=1, ge=1)
    lock_timeout: float = Field(default=DEFAULT_LOCK_TIMEOUT, ge=0)
    log_level: str = "WARNING"
    log_file: Optional[str] = None

    @classmethod
    def from_env(cls, environ=None, load_dotenv_file=True):
        """
        Build settings from environment variables.

        Args:
            environ (dict): Mapping to read instead of os.environ
            load_dotenv_file (bool): Whether to load a `.env` file first

        Returns:
            Settings: Populated settings
        """
        if environ is None:
            if load_dotenv_file:
                load_dotenv()
            environ = os.environ

        mapping = {
            "DF_ROOT": "root",
            "DF_CACHE_DIR": "cache_dir",
            "DF_SHARED_CACHE_DIR": "shared_cache_dir",
            "DF_CACHE_MAX_BYTES": "cache_max_bytes",
            "DF_COALESCE_GAP": "coalesce_gap",
            "DF_UDF_TIMEOUT": "udf_timeout",
            "DF_BATCH_SIZE": "batch_size",
            "DF_WORKERS": "workers",
            "DF_LOCK_TIMEOUT": "lock_timeout",
            "DF_LOG_LEVEL": "log_level",
            "DF_LOG_FILE": "log_file",
        }
        values = {}
        for env_name, field_name in mapping.items():
            raw = environ.get(env_name)
            if raw not in (None, ""):
                values[field_name] = raw
        return cls(**values)
