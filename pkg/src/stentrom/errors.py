"""Exception hierarchy; the CLI maps these onto exit codes."""


class StentromError(Exception):
    """Base class for all package errors."""


class ConfigError(StentromError):
    """Invalid configuration or arguments (CLI exit code 2)."""


class DataError(StentromError):
    """Missing, empty or inconsistent data (CLI exit code 3)."""


class GeometryError(StentromError):
    """Degenerate or out-of-domain geometric input."""


class NumericalError(StentromError):
    """Solver divergence, non-convergence or ill-conditioning (CLI exit code 4)."""
