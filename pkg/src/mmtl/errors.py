"""Error hierarchy. Every class carries the exit code the CLI maps it to."""
from __future__ import annotations

from typing import Any


class MMTLError(Exception):
    """Base class for all mmtl failures."""

    exit_code: int = 3


class ConfigError(MMTLError):
    """Unknown config key, invalid value, or violated precondition."""

    exit_code = 1


class DataError(MMTLError):
    """Missing dataset files, malformed rows, count or shape mismatch."""

    exit_code = 2


class CheckpointError(DataError):
    """Checkpoint file cannot be decoded."""


class BadMagicError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class CheckpointBoundsError(CheckpointError):
    pass


class KernelError(MMTLError):
    """A numeric kernel rejected its inputs or produced a bad value."""

    exit_code = 3


class ShapeError(KernelError):
    pass


class NonFiniteError(KernelError):
    pass


class NumericError(MMTLError):
    exit_code = 3


class TrainingDiverged(NumericError):
    """Training loss went non-finite. `last_good` holds the best checkpoint so far."""

    def __init__(self, message: str, last_good: Any = None) -> None:
        super().__init__(message)
        self.last_good = last_good
