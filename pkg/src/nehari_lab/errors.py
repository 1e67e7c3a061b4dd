"""Exception hierarchy."""


class NehariLabError(Exception):
    """Base class for all library errors."""


class InvalidGeometryError(NehariLabError, ValueError):
    pass


class GridMismatchError(NehariLabError, ValueError):
    pass


class IndefiniteOperatorError(NehariLabError, ArithmeticError):
    """Conjugate gradients met a non-positive curvature direction."""

    def __init__(self, message, curvature=None, iteration=None):
        super().__init__(message)
        self.curvature = curvature
        self.iteration = iteration


class ConvergenceError(NehariLabError, RuntimeError):
    def __init__(self, message, residual=None, iterations=None, trace=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.trace = trace


class DegenerateStateError(NehariLabError, ValueError):
    """A component vanishes (norm below the floor)."""


class NehariProjectionError(NehariLabError, RuntimeError):
    """Newton iteration for the scaling map did not reach a positive critical point."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = [] if trajectory is None else trajectory


class OffManifoldError(NehariLabError, ValueError):
    pass


class RankDeficiencyError(NehariLabError, ArithmeticError):
    pass


class AssumptionError(NehariLabError, ValueError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SolverError(NehariLabError, RuntimeError):
    """Every start of a multi-start solve failed."""

    def __init__(self, message, traces=None):
        super().__init__(message)
        self.traces = [] if traces is None else traces


class ConfigError(NehariLabError, ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n  " + "\n  ".join(self.errors))
