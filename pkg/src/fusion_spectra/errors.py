"""Exception taxonomy shared across the package.

CLI exit-code contract: configuration problems exit with code 2, numerical
or solver failures with code 3.
"""


class FusionSpectraError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FusionSpectraError):
    """Invalid configuration, parameter, or regime/policy mismatch."""


class InputError(ConfigurationError):
    """Invalid data handed to an operation (NaN/Inf, degenerate input)."""


class NumericalError(FusionSpectraError):
    """Numerical failure (eigensolver breakdown, vanishing degrees).

    ``partial`` may carry whatever partial result is still meaningful, e.g.
    singular values when the eigensolver did not converge.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class SolverError(NumericalError):
    """Subordination solver failed to converge; carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message, partial=diagnostics)
        self.diagnostics = diagnostics
