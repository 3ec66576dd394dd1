"""Numerical analysis of parametric constraint systems.

The package studies the feasible-set map F(p) = {x : h_i(p,x) <= 0,
h_j(p,x) = 0}: projections onto F(p), constant-rank constraint
qualification checks, sampled estimates of regularity moduli (distance
over residual, two-parameter Lipschitz, lower Lipschitz), lower
semicontinuity probes, cone comparisons, lower-level value functions,
and exact penalty thresholds for bilevel problems.

Everything stochastic is seeded; every sup estimate ships with a
replayable witness.  Verdicts are sample-based evidence: "verified on
samples" never claims a proof, and a diverging trend is falsification
evidence, not a certificate of failure.
"""

from .bilevel import (
    DEFAULT_MU_GRID,
    BilevelProblem,
    InfeasibleAnchorError,
    LowerSolveResult,
    PenaltyReport,
    PenaltyRow,
    estimate_lipschitz_constant,
    find_penalty_threshold,
    penalized_objective,
    phi_lipschitz_estimate,
    replay_phi_pair,
    solve_lower,
)
from .cq import (
    ActiveSetCapError,
    InfeasibleBaseError,
    RcrcqReport,
    SubsetRankRecord,
    check_rcrcq,
    select_i0_prime,
)
from .expr import DomainError, Expr, ExprError, ParseError, parse
from .fixtures_registry import FIXTURE_NAMES, FixtureInfo, fixture_path, list_fixtures, load_fixture
from .numerics import (
    GridBracket,
    GridEmptyError,
    grid_distance,
    grid_min,
    max_li_subset,
    nnls_minnorm,
    numerical_rank,
)
from .problem_io import LoadedProblem, ProblemFormatError, load_problem, parse_problem_text, problem_hash
from .projection import (
    MultiplierResult,
    ProjectOptions,
    ProjectionResult,
    min_multiplier_norm,
    multipliers,
    project,
)
from .regularity import (
    ConeCompareReport,
    DirectionRecord,
    LscReport,
    MultiplierBoundReport,
    RegularityReport,
    SampleRecord,
    ShrinkSchedule,
    check_lsc,
    check_multiplier_bound,
    cone_compare,
    estimate_aubin_modulus,
    estimate_lower_lipschitz,
    estimate_r_modulus,
    replay_sample,
)
from .report import Report, canonical_json, render_report
from .solver import SolverOptions, solve_multistart
from .system import ActiveSet, ParametricSystem

__version__ = "0.1.0"

__all__ = [
    "ActiveSet",
    "ActiveSetCapError",
    "BilevelProblem",
    "ConeCompareReport",
    "DEFAULT_MU_GRID",
    "DirectionRecord",
    "DomainError",
    "Expr",
    "ExprError",
    "FIXTURE_NAMES",
    "FixtureInfo",
    "GridBracket",
    "GridEmptyError",
    "InfeasibleAnchorError",
    "InfeasibleBaseError",
    "LoadedProblem",
    "LowerSolveResult",
    "LscReport",
    "MultiplierBoundReport",
    "MultiplierResult",
    "ParametricSystem",
    "ParseError",
    "PenaltyReport",
    "PenaltyRow",
    "ProblemFormatError",
    "ProjectOptions",
    "ProjectionResult",
    "RcrcqReport",
    "RegularityReport",
    "Report",
    "SampleRecord",
    "ShrinkSchedule",
    "SolverOptions",
    "SubsetRankRecord",
    "canonical_json",
    "check_lsc",
    "check_multiplier_bound",
    "check_rcrcq",
    "cone_compare",
    "estimate_aubin_modulus",
    "estimate_lipschitz_constant",
    "estimate_lower_lipschitz",
    "estimate_r_modulus",
    "find_penalty_threshold",
    "fixture_path",
    "grid_distance",
    "grid_min",
    "list_fixtures",
    "load_fixture",
    "load_problem",
    "max_li_subset",
    "min_multiplier_norm",
    "multipliers",
    "nnls_minnorm",
    "numerical_rank",
    "parse",
    "parse_problem_text",
    "penalized_objective",
    "phi_lipschitz_estimate",
    "problem_hash",
    "project",
    "render_report",
    "replay_phi_pair",
    "replay_sample",
    "select_i0_prime",
    "solve_lower",
    "solve_multistart",
    "__version__",
]
