"""Exception hierarchy shared by all modules."""


class HardyError(Exception):
    """Base class for every error raised by this package."""


class DomainError(HardyError, ValueError):
    pass


class SelfIntersectingError(DomainError):
    pass


class NonPositiveMeasureError(DomainError):
    pass


class OutsideDomainError(DomainError):
    pass


class ResolutionTooCoarseError(HardyError, ValueError):
    pass


class QuadratureOverflowError(HardyError, ArithmeticError):
    """A quadrature sum was not finite; usually the mesh is under-graded."""


class DegenerateFieldError(HardyError, ValueError):
    pass


class NonConvergenceError(HardyError):
    def __init__(self, iterations, last_residual, message=None):
        self.iterations = iterations
        self.last_residual = last_residual
        super().__init__(
            message
            or f"solver did not converge after {iterations} iterations "
            f"(last residual {last_residual:.3e})"
        )


class LadderNotMonotoneError(HardyError):
    def __init__(self, values, message=None):
        self.values = list(values)
        super().__init__(message or f"ladder values increase under refinement: {self.values}")


class NoRootError(HardyError, ValueError):
    pass


class BandTooThinError(HardyError, ValueError):
    pass


class WrongWeightError(HardyError, ValueError):
    pass
