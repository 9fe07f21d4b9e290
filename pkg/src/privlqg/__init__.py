"""Joint controller / output privacy filter synthesis for cloud-based
LQG control, with directed-information privacy accounting."""

from .errors import (
    ConfigError,
    DimensionMismatch,
    IllConditioned,
    Infeasible,
    MaxIterations,
    NegativeIncrement,
    NonFiniteEntry,
    NotPositiveDefinite,
    NumericalBreakdown,
    OutOfRange,
    SingularInnovation,
    SingularInnovationCovariance,
    UnsupportedDimension,
)
from .infoflow import (
    PrivacyReport,
    build_privacy_report,
    directed_info_from_plan,
    directed_info_joint_oracle,
    distortion_rate_floor,
    fano_floor,
)
from .leakage import (
    DiscreteJoint,
    StatisticMap,
    bayes_envelope_logloss,
    check_data_processing,
    leakage_logloss,
)
from .maxdet import (
    CovariancePlan,
    MaxDetProblem,
    SolverTolerances,
    build_problem,
    solve,
    verify_plan,
    zero_information_plan,
)
from .model import (
    CostSpec,
    SystemModel,
    ValidatedInstance,
    make_cost,
    make_system,
    scalar_instance,
    validate,
)
from .riccati import RiccatiSolution, backward_riccati
from .simulate import (
    MonteCarloSummary,
    SimulationTrace,
    monte_carlo,
    simulate_once,
)
from .synthesis import FilterDesign, design, kalman_gains, synthesize_sensor

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DimensionMismatch", "IllConditioned", "Infeasible",
    "MaxIterations", "NegativeIncrement", "NonFiniteEntry",
    "NotPositiveDefinite", "NumericalBreakdown", "OutOfRange",
    "SingularInnovation", "SingularInnovationCovariance",
    "UnsupportedDimension",
    "PrivacyReport", "build_privacy_report", "directed_info_from_plan",
    "directed_info_joint_oracle", "distortion_rate_floor", "fano_floor",
    "DiscreteJoint", "StatisticMap", "bayes_envelope_logloss",
    "check_data_processing", "leakage_logloss",
    "CovariancePlan", "MaxDetProblem", "SolverTolerances", "build_problem",
    "solve", "verify_plan", "zero_information_plan",
    "CostSpec", "SystemModel", "ValidatedInstance", "make_cost",
    "make_system", "scalar_instance", "validate",
    "RiccatiSolution", "backward_riccati",
    "MonteCarloSummary", "SimulationTrace", "monte_carlo", "simulate_once",
    "FilterDesign", "design", "kalman_gains", "synthesize_sensor",
]
