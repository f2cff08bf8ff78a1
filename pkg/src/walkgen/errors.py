"""Exception types shared across the package."""


class WalkgenError(Exception):
    """Base class for all package-specific errors."""


class EdgeListFormatError(WalkgenError):
    """Raised when an edge-list file violates the text format."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class SamplingError(WalkgenError):
    """A graph sampler could not satisfy its postconditions."""


class ConvergenceError(WalkgenError):
    """An iterative eigensolver hit its iteration cap.

    Carries the last residual so callers can judge how far off it was.
    """

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class DegenerateDataError(WalkgenError):
    """Training data is too degenerate to proceed (e.g. zero variance)."""


class CheckpointError(WalkgenError):
    """A model checkpoint could not be read back."""


class TrainingDivergedError(WalkgenError):
    """Training produced a non-finite loss.

    ``params`` and ``report`` hold the state from the last finite epoch.
    """

    def __init__(self, message, params=None, report=None):
        super().__init__(message)
        self.params = params
        self.report = report


class GenerationError(WalkgenError):
    """A degree sequence could not be repaired into a graphical one."""


class RolloutError(WalkgenError):
    """The reverse predictor produced a non-finite vector."""


class SolverScopeError(WalkgenError):
    """The exact solver was asked for an instance above its size limit."""


class InfeasibleDegreesError(WalkgenError):
    """No simple graph satisfies the requested degree constraints."""


class MetricUndefinedError(WalkgenError):
    """A relative-error score has a zero denominator and is undefined."""
