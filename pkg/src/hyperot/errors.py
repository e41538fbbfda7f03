"""Exception hierarchy shared by all modules.

Each class carries the process exit code used by the command line tool.
"""


class HyperOTError(Exception):
    exit_code = 1


class InputError(HyperOTError, ValueError):
    """Malformed or missing input."""
    exit_code = 2


class GeometryError(HyperOTError, ValueError):
    """A geometric precondition does not hold."""
    exit_code = 3


class InvalidPointError(GeometryError):
    """A vector that should lie on the hyperboloid sheet does not."""


class OutOfDomainError(GeometryError):
    pass


class RangeError(GeometryError):
    """Point too far from the apex for reliable double precision."""


class NoIntersectionError(GeometryError):
    pass


class DegenerateInputError(GeometryError):
    pass


class DuplicateSiteError(DegenerateInputError):
    pass


class SizeError(GeometryError):
    pass


class SolverError(HyperOTError):
    exit_code = 4


class InadmissibleStateError(SolverError):
    """Some cell is empty or has (numerically) zero area."""


class StallError(SolverError):
    """Line search step collapsed below its floor."""


class NonConvergenceError(SolverError):
    """Iteration budget exhausted; the history is attached."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class SingularSystemError(SolverError):
    pass


class MeasureMismatchError(SolverError):
    pass


class SurfaceError(HyperOTError):
    exit_code = 3


class MetricError(SurfaceError):
    pass


class EmbeddingDriftError(SurfaceError):
    pass


class PairingError(SurfaceError):
    pass


class InsufficientTilingError(SurfaceError):
    pass


class OutOfPatchError(SurfaceError):
    pass
