"""Exception hierarchy for isibounds."""


class IsiBoundsError(Exception):
    """Base class for every error raised by this package."""


class ChannelError(IsiBoundsError, ValueError):
    pass


class ChannelParseError(ChannelError):
    def __init__(self, line_no, message):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class HermitianViolation(IsiBoundsError, ValueError):
    pass


class QuadratureFailure(IsiBoundsError, ArithmeticError):
    pass


class NonPositiveSpectrum(IsiBoundsError, ArithmeticError):
    pass


class FactorizationDiverged(IsiBoundsError, ArithmeticError):
    pass


class DegenerateDFE(IsiBoundsError, ArithmeticError):
    pass


class TailNotConverged(IsiBoundsError, ArithmeticError):
    pass


class RepeatedPoles(IsiBoundsError, ArithmeticError):
    """Partial fractions need simple poles; use ``rho_max_direct`` instead."""


class RootFindingFailure(IsiBoundsError, ArithmeticError):
    pass


class TooManyClusters(IsiBoundsError, ValueError):
    pass


class MExceedsTaps(IsiBoundsError, ValueError):
    pass


class InvalidClusterSet(IsiBoundsError, ValueError):
    pass


class NonFiniteIntegrand(IsiBoundsError, ArithmeticError):
    pass


class EnumerationTooLarge(IsiBoundsError, ValueError):
    pass


class StateSpaceTooLarge(IsiBoundsError, ValueError):
    pass


class NumericalUnderflow(IsiBoundsError, ArithmeticError):
    pass


class PipelineError(IsiBoundsError):
    """Wraps a failure inside :func:`isibounds.bounds.bound_point` with the stage name."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
