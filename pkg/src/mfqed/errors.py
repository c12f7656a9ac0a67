"""Exception types shared across the package, mapped to CLI exit codes."""


class ConfigurationError(ValueError):
    """Invalid or inconsistent configuration (CLI exit code 2)."""

    exit_code = 2


class TruncationError(ConfigurationError):
    """Requested coherent displacement exceeds what the photon-number
    truncation can represent at the configured leakage tolerance."""

    def __init__(self, message, suggested_n_max=None):
        super().__init__(message)
        self.suggested_n_max = suggested_n_max


class ResourceCapError(RuntimeError):
    """Hilbert-space dimension above the configured cap (CLI exit code 3)."""

    exit_code = 3


class NumericalError(RuntimeError):
    """Solver failure: non-convergence or instability (CLI exit code 4)."""

    exit_code = 4
