"""Exception types shared across the package.

ValidationError covers bad inputs caught before any numerics run (exit code 1
in the CLI); NumericalError covers failures detected during computation such
as a non-positive-definite operator or a quadrature that did not converge
(exit code 2).
"""


class PcmlabError(Exception):
    """Base class for all package errors."""


class ValidationError(PcmlabError):
    """Raised when an input violates a documented precondition."""


class NumericalError(PcmlabError):
    """Raised when a numerical routine fails or refuses to certify a result."""
