"""Exception hierarchy shared by every acvspectra module."""


class AcvSpectraError(Exception):
    """Base class for all package errors."""


class ConfigError(AcvSpectraError, ValueError):
    """Invalid or missing configuration keys and flag values."""


class GuardError(AcvSpectraError, ValueError):
    """Arguments outside the supported range, or a combinatorial guard tripped."""
