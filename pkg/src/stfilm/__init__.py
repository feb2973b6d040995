"""Numerical laboratory for a stochastic thin-film interface equation.

The package simulates the surface-tension driven thin-film equation with
conservative multiplicative gradient noise on a periodic interval, using
a mass-conserving positivity-preserving semi-implicit scheme, and ships
the estimator experiments (Ito budgets, martingale tests, regularization
sweeps, functional-inequality batteries) used to validate it.
"""

from .errors import (
    AlphaOutOfRange,
    AlphaSingular,
    ConfigError,
    DecayTooWeak,
    LinearSolveFailure,
    MobilityOutOfRange,
    NegativeBase,
    NonPositiveField,
    StepFailure,
    StfilmError,
    TruncationTooLarge,
)
from .grid import (
    GridFunction,
    PeriodicGrid,
    deriv,
    grid_function,
    integrate,
    make_grid,
    pointwise_power,
)
from .noise import (
    NoiseSpectrum,
    OnbReport,
    RngStream,
    basis_deriv,
    basis_eval,
    build_spectrum,
    c_strat,
    onb_relation_values,
    s_thresholds,
    sample_increments,
    theta_sums,
)
from .functionals import (
    FunctionalReport,
    ModelParams,
    alpha_entropy,
    bernis_check,
    energy_eps,
    entropy,
    estimate_constants,
    gamma_range,
    mass,
    min_and_support,
    positivity_bound_check,
    weighted_integral,
)
from .dynamics import (
    FluxField,
    divergence,
    drift,
    face_diff,
    face_mean,
    noise_operator,
    pressure,
)
from .stepper import (
    CUMULATIVE_NAMES,
    FunctionalSeries,
    SolverConfig,
    StepStats,
    Trajectory,
    TrajectoryState,
    advance,
    step,
)
from .experiments import (
    BatteryReport,
    BudgetReport,
    EnsembleSummary,
    InitialDatum,
    MmsReport,
    QvReport,
    SupportReport,
    SweepReport,
    estimate_sweep,
    inequality_battery,
    ito_budget,
    martingale_qv_test,
    mms_convergence,
    run_ensemble,
    support_diagnostic,
)
from .cli import main

__version__ = "0.1.0"

__all__ = [
    "AlphaOutOfRange",
    "AlphaSingular",
    "BatteryReport",
    "BudgetReport",
    "CUMULATIVE_NAMES",
    "ConfigError",
    "DecayTooWeak",
    "EnsembleSummary",
    "FluxField",
    "FunctionalReport",
    "FunctionalSeries",
    "GridFunction",
    "InitialDatum",
    "LinearSolveFailure",
    "MmsReport",
    "MobilityOutOfRange",
    "ModelParams",
    "NegativeBase",
    "NoiseSpectrum",
    "NonPositiveField",
    "OnbReport",
    "PeriodicGrid",
    "QvReport",
    "RngStream",
    "SolverConfig",
    "StepFailure",
    "StepStats",
    "StfilmError",
    "SupportReport",
    "SweepReport",
    "Trajectory",
    "TrajectoryState",
    "TruncationTooLarge",
    "advance",
    "alpha_entropy",
    "basis_deriv",
    "basis_eval",
    "bernis_check",
    "build_spectrum",
    "c_strat",
    "deriv",
    "divergence",
    "drift",
    "energy_eps",
    "entropy",
    "estimate_constants",
    "estimate_sweep",
    "face_diff",
    "face_mean",
    "gamma_range",
    "grid_function",
    "inequality_battery",
    "integrate",
    "ito_budget",
    "main",
    "make_grid",
    "martingale_qv_test",
    "mass",
    "min_and_support",
    "mms_convergence",
    "noise_operator",
    "onb_relation_values",
    "pointwise_power",
    "positivity_bound_check",
    "pressure",
    "run_ensemble",
    "s_thresholds",
    "sample_increments",
    "step",
    "support_diagnostic",
    "theta_sums",
    "weighted_integral",
]
