"""Exception types shared across the package."""


class WavemonError(Exception):
    """Base class for all package-specific errors."""


class GridMismatchError(WavemonError):
    """Two states (or a state and an operator) live on different grids."""


class ZeroNormError(WavemonError):
    """An operation produced a state with (numerically) vanishing norm."""


class MeasurementUnderflowError(ZeroNormError):
    """A collapse landed so far from the state's support that the
    posterior norm fell below the recoverable floor."""


class NumericalBlowupError(WavemonError):
    """Non-finite amplitudes appeared during propagation."""


class ConfigError(WavemonError):
    """A scenario configuration file is malformed or inconsistent."""


class FormatError(WavemonError):
    """A binary artifact is corrupt, truncated, or of the wrong kind."""


class UsageError(WavemonError):
    """Bad command-line invocation."""
