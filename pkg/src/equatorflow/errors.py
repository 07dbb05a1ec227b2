"""Exception hierarchy for equatorflow."""


class EquatorFlowError(Exception):
    """Base class for all package errors."""


class ProfileError(EquatorFlowError):
    """Invalid Coriolis profile construction."""


class ProfileRangeError(ProfileError, ValueError):
    """Coordinate outside the represented range of a profile."""


class JumpPointError(ProfileError, ValueError):
    """A one-sided quantity was requested exactly at a jump ordinate."""


class AmbiguousLevelError(EquatorFlowError, ValueError):
    """Frequency level coincides with a half-jump value."""


class ConfigError(EquatorFlowError, ValueError):
    """Configuration file or value is invalid.

    ``location`` carries a human readable pointer (``line 12, field
    segments[1].params.value``) when the error comes from a file.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class EigenSolverError(EquatorFlowError, RuntimeError):
    def __init__(self, message, iterations=None):
        self.iterations = iterations
        if iterations is not None:
            message = f"{message} (after {iterations} iterations)"
        super().__init__(message)


class InertiaMismatchError(EigenSolverError):
    """Eigenvalue count in a window disagrees with the Sylvester inertia."""


class AmbiguousMatchError(EquatorFlowError):
    """Branch tracking could not decide between two continuations."""

    def __init__(self, message, fiber_index=None, xi=None):
        self.fiber_index = fiber_index
        self.xi = xi
        super().__init__(message)


class EliminationError(EquatorFlowError, ValueError):
    """(eta, u) cannot be eliminated because |E| is too close to |xi| or 0."""


class QuadratureError(EquatorFlowError, RuntimeError):
    def __init__(self, message, estimate=None):
        self.estimate = estimate
        super().__init__(message)


class FiberError(EquatorFlowError):
    """Hard failure while processing one fiber of a sweep."""

    def __init__(self, message, index, xi):
        self.index = index
        self.xi = xi
        super().__init__(f"fiber {index} (xi={xi:+.6f}): {message}")
