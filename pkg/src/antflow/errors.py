"""Exception types raised across the package."""


class AntflowError(Exception):
    """Base class for all package errors."""


class InvalidRates(AntflowError, ValueError):
    pass


class ExcessOccupancy(AntflowError, ValueError):
    pass


class NoAntAtSite(AntflowError, LookupError):
    pass


class DomainError(AntflowError, ValueError):
    pass


class EmptyTrajectory(AntflowError, ValueError):
    pass


class TooFewAnts(AntflowError, ValueError):
    pass


class ParseError(AntflowError, ValueError):
    """Malformed event CSV input. ``line`` is 1-based and counts the header."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class NegativeCount(AntflowError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class NonPositiveTravelTime(AntflowError, ValueError):
    pass


class MissingPredecessor(AntflowError, ValueError):
    pass


class EmptyInterval(AntflowError, ValueError):
    pass


class NonPositiveSample(AntflowError, ValueError):
    pass


class EmptyInput(AntflowError, ValueError):
    pass


class UnsortedInputWarning(UserWarning):
    """Event rows were not in time order and have been sorted."""
