"""Nash equilibria for multi-agent optimal liquidation.

n agents trade a single asset whose price carries permanent (gamma) and
temporary (lambda) linear impact. Each agent liquidates an initial position
under a mean-variance (equivalently CARA) objective; the open-loop Nash
equilibrium solves a coupled linear two-point boundary value problem.
The package provides closed forms where they exist, a matrix-exponential
shooting solver for the general finite-horizon game, stationary solutions
on the infinite horizon, an independent discrete-game oracle, and tools for
evaluating, simulating, classifying and scanning equilibria.
"""

from .errors import (
    DegenerateEigenbasis,
    DriftNotZero,
    GammaZero,
    GridMismatch,
    HorizonMismatch,
    IndefiniteHessian,
    InvalidParam,
    LiquidationGameError,
    NeverReached,
    OutOfDomain,
    QuadratureUnderResolved,
    RootFindingFailed,
    SingularShootingMatrix,
    StableSubspaceDeficient,
    UnsupportedCase,
)
from .model import (
    AgentSpec,
    DriftSpec,
    ExpSumStrategy,
    GridStrategy,
    Horizon,
    MarketParams,
    Problem,
    SpectralData,
    Strategy,
    alphas_equal,
    dump_problem,
    eval_strategy,
    load_problem,
    problem_from_dict,
    problem_to_dict,
    system_matrix,
    validate_problem,
)
from .closed_form import (
    equal_alpha_finite,
    equal_alpha_infinite,
    finite_to_infinite_convergence,
    mean_field_strategy,
    negative_quartic_roots,
    single_agent_finite,
    sinh_ratio,
    spectral,
    two_player_finite,
    two_player_infinite,
)
from .bvp import (
    BvpSolution,
    FirstOrderSystem,
    ResidualReport,
    assemble,
    residual_report,
    solve_finite,
    solve_finite_by_reduction,
    solve_infinite,
    solve_scalar,
)
from .analysis import (
    DeviationReport,
    EvaluationResult,
    MonteCarloConfig,
    MonteCarloResult,
    RoleClassification,
    ScanResult,
    classify_role,
    compute_equilibrium,
    deviation_report,
    effective_liquidation_time,
    mean_variance,
    mean_variance_sampled,
    monte_carlo_revenues,
    non_monotone,
    parameter_scan,
)
from .oracle import DiscreteGame, FixedPointReport, compare, iterate_nash

__version__ = "0.1.0"

__all__ = [
    "AgentSpec",
    "BvpSolution",
    "DegenerateEigenbasis",
    "DeviationReport",
    "DiscreteGame",
    "DriftNotZero",
    "DriftSpec",
    "EvaluationResult",
    "ExpSumStrategy",
    "FirstOrderSystem",
    "FixedPointReport",
    "GammaZero",
    "GridMismatch",
    "GridStrategy",
    "Horizon",
    "HorizonMismatch",
    "IndefiniteHessian",
    "InvalidParam",
    "LiquidationGameError",
    "MarketParams",
    "MonteCarloConfig",
    "MonteCarloResult",
    "NeverReached",
    "OutOfDomain",
    "Problem",
    "QuadratureUnderResolved",
    "ResidualReport",
    "RoleClassification",
    "RootFindingFailed",
    "ScanResult",
    "SingularShootingMatrix",
    "SpectralData",
    "StableSubspaceDeficient",
    "Strategy",
    "UnsupportedCase",
    "alphas_equal",
    "assemble",
    "classify_role",
    "compare",
    "compute_equilibrium",
    "deviation_report",
    "dump_problem",
    "effective_liquidation_time",
    "equal_alpha_finite",
    "equal_alpha_infinite",
    "eval_strategy",
    "finite_to_infinite_convergence",
    "iterate_nash",
    "load_problem",
    "mean_field_strategy",
    "mean_variance",
    "mean_variance_sampled",
    "monte_carlo_revenues",
    "negative_quartic_roots",
    "non_monotone",
    "parameter_scan",
    "problem_from_dict",
    "problem_to_dict",
    "residual_report",
    "single_agent_finite",
    "sinh_ratio",
    "solve_finite",
    "solve_finite_by_reduction",
    "solve_infinite",
    "solve_scalar",
    "spectral",
    "system_matrix",
    "two_player_finite",
    "two_player_infinite",
    "validate_problem",
]
