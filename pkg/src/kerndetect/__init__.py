"""Sequential kernel change detection: delay solvers, optimal kernels,
an online monitor, and Monte Carlo studies for dependent noise."""

__version__ = "0.1.0"

from .alternatives import (
    GenericAlternative,
    lambert_w,
    make_alternative,
    michaelis_menten,
    step,
    substrate,
    truncated_exponential,
    truncated_linear,
    w_antiderivative_check,
)
from .delay import (
    DelaySolution,
    OptimalPair,
    lp_oracle,
    power_design,
    psi,
    select_kernel,
    solve_optimal_pair,
    solve_rho0,
    solve_rho0_design,
    uniform_design,
)
from .errors import (
    CalibrationError,
    ConfigError,
    ConstructionError,
    DomainError,
    InfeasibleError,
    NoSolutionError,
    NumericalError,
    OrderingError,
    ParameterError,
    SelectionError,
)
from .kernels import Kernel, epanechnikov, gaussian, laplace, make_kernel, make_optimal_kernel, triangular
from .monitor import MonitorConfig, RunRecord, StreamState, run, smoother_stat, step as monitor_step
from .sim import (
    ScenarioSpec,
    ar1,
    calibrate_threshold,
    false_alarm_study,
    gen_noise,
    iid_gaussian,
    make_observations,
    monte_carlo,
    uniform_bounded,
)

__all__ = [
    "__version__",
    "GenericAlternative",
    "Kernel",
    "DelaySolution",
    "OptimalPair",
    "MonitorConfig",
    "StreamState",
    "RunRecord",
    "ScenarioSpec",
    "ParameterError",
    "DomainError",
    "ConstructionError",
    "ConfigError",
    "OrderingError",
    "NoSolutionError",
    "SelectionError",
    "CalibrationError",
    "InfeasibleError",
    "NumericalError",
    "lambert_w",
    "substrate",
    "w_antiderivative_check",
    "step",
    "truncated_linear",
    "truncated_exponential",
    "michaelis_menten",
    "make_alternative",
    "gaussian",
    "epanechnikov",
    "triangular",
    "laplace",
    "make_kernel",
    "make_optimal_kernel",
    "psi",
    "solve_rho0",
    "solve_rho0_design",
    "solve_optimal_pair",
    "select_kernel",
    "lp_oracle",
    "uniform_design",
    "power_design",
    "smoother_stat",
    "monitor_step",
    "run",
    "gen_noise",
    "iid_gaussian",
    "ar1",
    "uniform_bounded",
    "make_observations",
    "monte_carlo",
    "false_alarm_study",
    "calibrate_threshold",
]
