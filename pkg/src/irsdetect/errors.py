"""Exception hierarchy shared by all modules."""


class IrsDetectError(Exception):
    """Base class for every error raised by this package.

    ``coordinates`` records where in an experiment the error arose (axis
    value, seed, block, ...); it is filled in by the layers that know.
    """

    coordinates: dict = {}

    def __str__(self):
        msg = super().__str__()
        if not self.coordinates:
            return msg
        where = ", ".join(f"{k}={v}" for k, v in self.coordinates.items())
        return f"{msg} [{where}]"


def tag_coordinates(err: IrsDetectError, **coords) -> IrsDetectError:
    """Add ``coords`` to ``err.coordinates`` without overwriting inner ones."""
    err.coordinates = {**coords, **err.coordinates}
    return err


class DomainError(IrsDetectError, ValueError):
    """An argument lies outside the domain of the requested function."""


class ConfigurationError(IrsDetectError, ValueError):
    """A scenario or configuration document violates its invariants.

    ``key`` names the offending field when one can be identified.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class NumericError(IrsDetectError, ArithmeticError):
    """A numerical routine could not produce a trustworthy value."""


class RankDeficiencyError(NumericError):
    """A matrix that must be invertible is (numerically) singular."""


class UndefinedStatisticError(NumericError):
    """A decision statistic is undefined for the given data (e.g. X = 0)."""


class ConvergenceError(NumericError):
    """A series failed to converge within the allowed number of terms.

    The partial sum reached so far is kept in ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class CalibrationError(IrsDetectError):
    """Too few null-hypothesis trials to place an empirical threshold."""
