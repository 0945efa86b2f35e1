"""Numerical laboratory for reaction-convection-diffusion blow-up.

Simulates d_t u = Lap(u) - g(u) . grad(u) + f(u) on an interval or rectangle
under dynamical (sigma d_t u + d_nu u = 0), Neumann, or Dirichlet boundary
conditions, and checks quantitative certificates: global-existence gates,
eigenfunction-weighted blow-up thresholds, blow-up-time upper bounds, and
terminal rate estimates.
"""

from .bounds import (
    BlowupEstimate,
    BoundsInput,
    BoundsReport,
    analyze_blowup,
    blowup_constant,
    check_condition_and_bound,
    check_domination,
    check_lower_rate,
    estimate_blowup_time,
    fit_rate_exponent,
    mass_functional,
    select_alpha,
)
from .comparison import (
    OdeSolution,
    OrderingReport,
    SubSolutionSW,
    UpperSolution,
    build_subsolution_sw,
    build_upper_solution,
    compare_runs,
    exp_envelope_bound,
    ode_oracle,
    residual_sub_sw,
    residual_upper,
)
from .config import (
    ExperimentPlan,
    build_plan,
    build_problem,
    config_digest,
    load_config,
    normalize_config,
    parse_config,
)
from .errors import (
    BlowupLabError,
    ConfigError,
    ConvergenceError,
    DomainError,
    FitError,
    HypothesisError,
    InapplicableError,
    InequalityViolationError,
    InvalidFieldError,
    InvalidResolutionError,
    PreconditionError,
)
from .grid import Domain, Field, Grid, build_grid, normal_derivative
from .kernels import active_backend, available_backends, set_backend
from .problem import (
    ConvectionSpec,
    InitialDataSpec,
    ProblemSpec,
    ReactionSpec,
    SigmaSpec,
    ValidationReport,
    eval_convection,
    eval_primitive,
    eval_reaction,
    validate_problem,
)
from .runner import ResultIndex, emit_tables, run_experiment
from .solver import (
    RunRecord,
    StepPolicy,
    Verdict,
    advance,
    assemble_rhs,
    discrete_mass,
    run,
)
from .spectral import (
    EigenPair,
    eigenpair_analytic,
    eigenpair_numeric,
    grad_phi_m_integral,
)

__version__ = "0.1.0"

__all__ = [
    "BlowupEstimate", "BlowupLabError", "BoundsInput", "BoundsReport",
    "ConfigError", "ConvectionSpec", "ConvergenceError", "Domain",
    "DomainError", "EigenPair", "ExperimentPlan", "Field", "FitError",
    "Grid", "HypothesisError", "InapplicableError",
    "InequalityViolationError", "InitialDataSpec", "InvalidFieldError",
    "InvalidResolutionError", "OdeSolution", "OrderingReport",
    "PreconditionError", "ProblemSpec", "ReactionSpec", "ResultIndex",
    "RunRecord", "SigmaSpec", "StepPolicy", "SubSolutionSW",
    "UpperSolution", "ValidationReport", "Verdict", "active_backend",
    "advance", "analyze_blowup", "assemble_rhs", "available_backends",
    "blowup_constant", "build_grid", "build_plan", "build_problem",
    "build_subsolution_sw", "build_upper_solution",
    "check_condition_and_bound", "check_domination", "check_lower_rate",
    "compare_runs", "config_digest", "discrete_mass", "eigenpair_analytic",
    "eigenpair_numeric", "emit_tables", "estimate_blowup_time",
    "eval_convection", "eval_primitive", "eval_reaction",
    "exp_envelope_bound", "fit_rate_exponent", "grad_phi_m_integral",
    "load_config", "mass_functional", "normal_derivative",
    "normalize_config", "ode_oracle", "parse_config", "residual_sub_sw",
    "residual_upper", "run", "run_experiment", "select_alpha",
    "set_backend", "validate_problem",
]
