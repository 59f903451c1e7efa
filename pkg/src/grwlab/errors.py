"""Exception hierarchy shared by every grwlab module."""


class GRWLabError(Exception):
    """Base class for all errors raised by grwlab."""


class InvalidGrid(GRWLabError, ValueError):
    pass


class DegenerateBank(GRWLabError, ValueError):
    pass


class DimensionMismatch(GRWLabError, ValueError):
    pass


class PacketClipped(GRWLabError, ValueError):
    pass


class OverlapTooLarge(GRWLabError, ValueError):
    pass


class EigenFailure(GRWLabError, RuntimeError):
    pass


class NotHermitian(GRWLabError, ValueError):
    pass


# observables refer to the same condition under a different name
NonHermitian = NotHermitian


class StepTooLarge(GRWLabError, ValueError):
    pass


class PositivityLost(GRWLabError, RuntimeError):
    pass


class NotNormalized(GRWLabError, ValueError):
    pass


class ZeroOverlap(GRWLabError, RuntimeError):
    pass


class TooFewTrajectories(GRWLabError, ValueError):
    pass


class LatticeMismatch(GRWLabError, ValueError):
    pass


class UnequalInitialDensity(GRWLabError, ValueError):
    pass


class InsufficientPoints(GRWLabError, ValueError):
    pass


class BoundaryOutsideGrid(GRWLabError, ValueError):
    pass


class ParseError(GRWLabError, ValueError):
    pass


class ValidationError(GRWLabError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
