"""Exception hierarchy for fkdvlab.

Exit-code contract used by the CLI: configuration problems map to 2,
numerical failures to 3, falsified audits to 1.
"""


class FkdvError(Exception):
    """Base class for all fkdvlab errors."""


class InputError(FkdvError):
    """Rejected input (non-finite samples, unsorted positions, bad window)."""


class GridMismatchError(InputError):
    """Two fields that must share a grid do not."""


class UnsupportedRegimeError(InputError):
    """Parameter outside the supported range, e.g. alpha <= 1/2."""


class ResolutionError(InputError):
    """Requested object cannot be represented on the grid."""


class ContaminationError(InputError):
    """Periodic images pollute the quantity being measured."""


class DivergenceError(FkdvError):
    """An iteration failed to converge; carries the last residual."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DegenerateConfigurationError(FkdvError):
    """Soliton configuration violates the separation assumptions."""


class ConditioningError(FkdvError):
    """A linear system is too ill-conditioned to trust."""


class InstabilityError(FkdvError):
    """Time integration blew past the amplitude guard."""


class NumericalError(FkdvError):
    """NaN/Inf or an eigensolver failure during a computation."""


class PrecisionError(FkdvError):
    """A quadrature or fit could not reach the requested accuracy."""
