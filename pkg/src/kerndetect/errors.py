"""Exception types shared across the package.

The split mirrors the CLI exit-code contract: configuration and validation
problems (ValueError family, exit 1), solver outcomes where no solution
exists for the given inputs (exit 2), and genuine numerical failures
(exit 3).
"""


class ParameterError(ValueError):
    """An argument is outside its documented domain (h <= 0, p outside (0,1), ...)."""


class DomainError(ValueError):
    """A function was queried outside its mathematical domain."""


class ConstructionError(ValueError):
    """A kernel or alternative failed its construction-time invariant checks."""


class ConfigError(ValueError):
    """A run configuration document is malformed or inconsistent."""


class OrderingError(ValueError):
    """Observation times fed to a monitor are not strictly increasing."""


class NoSolutionError(RuntimeError):
    """The requested threshold/target is unreachable for the given inputs."""


class SelectionError(NoSolutionError):
    """No candidate kernel produced a converged delay."""


class CalibrationError(NoSolutionError):
    """Threshold calibration could not attain the target rate."""


class InfeasibleError(NoSolutionError):
    """The discretized kernel constraint set admits no feasible point."""


class NumericalError(RuntimeError):
    """An iterative routine failed to converge within its budget."""
