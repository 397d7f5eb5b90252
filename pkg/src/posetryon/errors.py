"""Exception types shared across PoseTryOn subpackages."""

from __future__ import annotations


class PoseTryOnError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(PoseTryOnError):
    """Raised when a setting, flag or model configuration is invalid."""


class ShapeError(PoseTryOnError, ValueError):
    """Raised when array or tensor shapes do not line up."""


class MaskError(PoseTryOnError, ValueError):
    """Raised when a mask contains values other than 0 and 1."""


class DataError(PoseTryOnError):
    """Raised when a dataset on disk is missing, empty or malformed."""
