"""
Error hierarchy for gaussmt
Parameter problems and numerical failures are kept apart so the command
line can map them to different exit codes.
"""


class GaussmtError(Exception):
    """Base class for every error raised by gaussmt."""


class ParameterRangeError(GaussmtError, ValueError):
    """A parameter (ell, rho, m, d, gamma, partition) lies outside its admissible range."""


class OracleCapExceeded(ParameterRangeError):
    """The dense conditioning oracle was asked for a dimension above its cap."""


class NumericalError(GaussmtError, ArithmeticError):
    """A matrix that must be positive definite (or invertible) is not."""


class VerificationFailure(NumericalError):
    """A closed form disagrees with the oracle by more than the tolerance."""

    def __init__(self, suite: str, case: str, residual: float, tolerance: float):
        self.suite = suite
        self.case = case
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(
            f"{suite}: case {case} has residual {residual:.3e} > {tolerance:.1e}"
        )
