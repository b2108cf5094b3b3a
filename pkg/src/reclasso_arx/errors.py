"""Exception hierarchy shared across the package."""


class ReclassoError(Exception):
    """Base class for all package errors."""


class NumericalError(ReclassoError):
    """Raised when a numerical routine cannot produce a trustworthy result."""


class SingularUpdate(NumericalError):
    """A rank-one or deletion update hit its denominator guard."""


class DegenerateFeature(NumericalError):
    """An entering column is numerically collinear with the active set."""


class DimensionMismatch(ReclassoError, ValueError):
    pass


class NoConvergence(NumericalError):
    """Coordinate descent hit its sweep cap.

    The best iterate and its KKT residual are attached so callers can
    decide whether the answer is usable anyway.
    """

    def __init__(self, message, phi=None, kkt_residual=None):
        super().__init__(message)
        self.phi = phi
        self.kkt_residual = kkt_residual


class PathStalled(NumericalError):
    """Too many transition events on one homotopy segment."""


class RankDeficient(NumericalError):
    pass


class SeriesTooShort(ReclassoError, ValueError):
    pass


class DegenerateDesign(ReclassoError, ValueError):
    pass


class RescaleFailed(NumericalError):
    pass


class DataError(ReclassoError, ValueError):
    """Base class for ingestion problems."""


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class MissingColumn(DataError):
    pass


class NonFinite(DataError):
    pass


class NonPositiveForLog(DataError):
    pass


class ConstantSeries(DataError):
    pass
