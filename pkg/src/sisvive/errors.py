"""Exception hierarchy: data errors vs numerical failures.

The CLI maps ``DataError`` subclasses to exit code 2 and
``NumericalError`` subclasses to exit code 3.
"""

from __future__ import annotations


class SisviveError(Exception):
    """Base class for all errors raised by this package."""


class DataError(SisviveError, ValueError):
    """Malformed or unusable input data."""


class UnknownColumnError(DataError):
    pass


class DuplicateRoleError(DataError):
    pass


class MissingValueError(DataError):
    pass


class NonNumericCellError(DataError):
    pass


class ZeroVarianceError(DataError):
    pass


class NumericalError(SisviveError, RuntimeError):
    """Estimation cannot proceed for numerical/model reasons."""


class RankDeficiencyError(NumericalError):
    pass


class DegenerateExposureError(NumericalError):
    """Fitted exposure is (numerically) zero; the effect is not estimable."""


class PathologicalPathError(NumericalError):
    """Homotopy produced more knots than the safety limit allows."""


class IrrelevantInstrumentError(NumericalError):
    """Some instrument has (numerically) zero association with the exposure."""


class InconsistentValidSetError(NumericalError):
    """Declared-valid instruments imply conflicting effect ratios."""


class BoundInapplicableError(NumericalError):
    """Sparsity exceeds the incoherence limit; the error bound does not apply."""


class JustIdentifiedError(NumericalError):
    """Overidentification test undefined with a single instrument."""


class FoldTooSmallError(NumericalError):
    """A CV validation fold has too few rows to form its projector."""


class InfeasibleConfigError(DataError):
    """Simulation configuration cannot be realized."""
