"""Error taxonomy shared by the library and the CLI exit-code contract."""


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration (CLI exit 2)."""


class InfeasibleCertificate(RuntimeError):
    """No admissible (eps, gamma) point; carries the best margins (CLI exit 3)."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class NumericalError(RuntimeError):
    """NaN/Inf state, CFL violation, or solver non-convergence (CLI exit 4)."""
