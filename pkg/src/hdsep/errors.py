"""Exception types raised by the library."""


class HdsepError(Exception):
    """Base class for library errors."""


class SingularCovarianceError(HdsepError, ArithmeticError):
    """A class covariance could not be factorised."""


class DegenerateRuleError(HdsepError, ValueError):
    """The Bayes threshold is undefined because the classes coincide."""


class DimensionMismatchError(HdsepError, ValueError):
    pass


class DataFormatError(HdsepError, ValueError):
    """A spectra file or manifest does not follow the canonical layout."""


class FoldError(HdsepError):
    """A model fit failed inside a cross-validation fold."""

    def __init__(self, fold: int, cause: Exception):
        super().__init__(f"fold {fold}: {type(cause).__name__}: {cause}")
        self.fold = fold
        self.cause = cause
