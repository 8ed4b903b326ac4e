from typing import Optional


class ExosynthError(Exception):
    """Base class for every domain failure raised by exosynth."""


class ConfigError(ExosynthError, ValueError):
    """A configuration file or preset could not be read or validated."""


class GeometryError(ExosynthError, ValueError):
    pass


class NonPositiveComposite(GeometryError):
    """A derived segment length came out zero or negative."""

    def __init__(self, name: str, value: float):
        super().__init__(f"Composite segment {name} = {value:.6g} mm is not positive")
        self.name = name
        self.value = value


class SolverError(ExosynthError):
    """Loop-closure solve failure.

    `path_index` is filled in by continuation sweeps with the index of the pose
    that failed; it stays None for single solves.
    """

    def __init__(self, message: str, path_index: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.path_index = path_index

    def at_index(self, path_index: int) -> "SolverError":
        self.path_index = path_index
        return self

    def __str__(self) -> str:
        if self.path_index is None:
            return self.message
        return f"{self.message} (path index {self.path_index})"


class NoConvergence(SolverError):
    pass


class SingularIteration(SolverError):
    pass


class BranchEscape(SolverError):
    pass


class NoEquilibrium(SolverError):
    pass


class SingularityError(ExosynthError):
    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition number {condition:.3e})")
        self.condition = condition


class PassiveSingular(SingularityError):
    pass


class OutputSingular(SingularityError):
    pass


class StaticsError(ExosynthError):
    pass


class Indeterminate(StaticsError):
    pass


class RatioUndefined(StaticsError):
    pass


class UnsolvablePerturbation(ExosynthError):
    def __init__(self, parameter: str, cause: Exception):
        super().__init__(f"Perturbed geometry for {parameter} does not close: {cause}")
        self.parameter = parameter
        self.cause = cause


class NoFeasibleCandidate(ExosynthError):
    def __init__(self, evaluated: int, linear_failures: int, static_failures: int):
        super().__init__(
            f"No feasible candidate among {evaluated} evaluated "
            f"({linear_failures} failed the linear filter, "
            f"{static_failures} failed the static filter)"
        )
        self.evaluated = evaluated
        self.linear_failures = linear_failures
        self.static_failures = static_failures
