"""Exception hierarchy shared by all phident modules."""


class PHIdentError(Exception):
    """Base class for errors raised by phident."""


class DimensionError(PHIdentError, ValueError):
    """Array shapes or vector lengths do not match the declared dimensions."""


class StructureError(PHIdentError, ValueError):
    """A matrix violates a port-Hamiltonian structural constraint."""


class InputError(PHIdentError, ValueError):
    """Invalid user input (non-finite values, inconsistent configuration)."""


class EvaluationError(PHIdentError, ArithmeticError):
    """The resolvent ``s E - A`` is singular (or numerically so) at ``s``."""

    def __init__(self, message, s=None, index=None):
        super().__init__(message)
        self.s = s
        self.index = index


class NumericalError(PHIdentError, ArithmeticError):
    """A numerical kernel (SVD, factorization) failed."""


class FormatError(PHIdentError, ValueError):
    """A data or model file does not conform to its schema."""
