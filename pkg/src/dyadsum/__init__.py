"""Uniform-in-N bounds for constrained dyadic sums."""

__version__ = "0.1.0"

from .constraints import (
    Constraint,
    Inequality,
    LogRegion,
    Relation,
    SlackConfig,
    bounds_for,
    contains,
    linearize,
)
from .expr import (
    Affine,
    Bracket,
    DyadicVar,
    Max,
    Min,
    Mono,
    Monomial,
    Role,
    Summand,
    eval_mono,
    eval_summand,
    substitute_params,
)

from .dsl import DslError, format_problem, parse_problem, parse_problem_file
from .engine import (
    Classification,
    EngineConfig,
    GrowthVerdict,
    LadderResult,
    Problem,
    brute_force_sum,
    growth_estimate,
    truncated_sum,
    verdict,
)
from .reducer import Branch, NotEliminable, SymbolicGrowth, eliminate_var, split, symbolic_growth
from .cases import (
    EstimateKind,
    Triple,
    build_problems,
    is_admissible,
    satisfies_23ts,
    sweep,
    verify_estimate,
)

__all__ = [
    "__version__",
    "Constraint",
    "Inequality",
    "LogRegion",
    "Relation",
    "SlackConfig",
    "bounds_for",
    "contains",
    "linearize",
    "Affine",
    "Bracket",
    "DyadicVar",
    "Max",
    "Min",
    "Mono",
    "Monomial",
    "Role",
    "Summand",
    "eval_mono",
    "eval_summand",
    "substitute_params",
    "DslError",
    "format_problem",
    "parse_problem",
    "parse_problem_file",
    "Classification",
    "EngineConfig",
    "GrowthVerdict",
    "LadderResult",
    "Problem",
    "brute_force_sum",
    "growth_estimate",
    "truncated_sum",
    "verdict",
    "Branch",
    "NotEliminable",
    "SymbolicGrowth",
    "eliminate_var",
    "split",
    "symbolic_growth",
    "EstimateKind",
    "Triple",
    "build_problems",
    "is_admissible",
    "satisfies_23ts",
    "sweep",
    "verify_estimate",
]
