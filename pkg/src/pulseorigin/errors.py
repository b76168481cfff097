"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """Non-finite, empty or otherwise malformed input."""


class UndefinedPhaseError(ArithmeticError):
    """Superposition or fringe phase requested where it does not exist.

    Raised when a state sits at a pole of the Bloch sphere, or when an
    interferometer has no fringe to take a phase from.
    """


class DegenerateSequenceError(UndefinedPhaseError):
    """Zero-contrast sequence: the sensitivity function is undefined."""


class OpenInterferometerError(ValueError):
    """Closed-interferometer formula applied to an open sequence."""


class DeadTimeUndefinedError(ValueError):
    """Triangular response under-estimates the scale factor."""


class SingularityError(ArithmeticError):
    """Closed form evaluated at (or too close to) a pole."""


class UnsupportedTimingError(ValueError):
    """Frequency jump scheduled inside a pulse."""
