"""Exception types shared across the package.

Everything raised on bad user input or bad data derives from PicryptError so
callers (and the CLI) can distinguish data problems from genuine bugs.
"""


class PicryptError(Exception):
    """Base class for all expected failures (bad input, bad data, bad config)."""


class DecodeError(PicryptError):
    """Malformed or truncated image file."""


class GeometryError(PicryptError):
    """Image/patch dimensions incompatible with the requested operation."""


class KeyMismatchError(PicryptError):
    """Permutation key inconsistent with the data or with its own seed."""


class ShapeError(PicryptError):
    """Tensor operands with incompatible shapes."""


class ConfigError(PicryptError):
    """Invalid or inconsistent configuration."""


class DataError(PicryptError):
    """Data that makes a requested measurement undefined (e.g. a leakage
    ratio over a corpus with zero baseline detections)."""
