"""Configuration, persistence, orchestration and the command line."""

from .config import ConfigError, SimConfig, load_config, parse_config
from .io import (Snapshot, SnapshotChecksumError, SnapshotError, SnapshotFormatError,
                 SnapshotTruncatedError, SnapshotVersionError, read_snapshot, write_snapshot)
from .record import RunRecord
from .runner import RunFailure, run_config

__all__ = ["ConfigError", "SimConfig", "load_config", "parse_config", "Snapshot",
           "SnapshotError", "SnapshotFormatError", "SnapshotVersionError",
           "SnapshotTruncatedError", "SnapshotChecksumError", "read_snapshot",
           "write_snapshot", "RunRecord", "RunFailure", "run_config"]
