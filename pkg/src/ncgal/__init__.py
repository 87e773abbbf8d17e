"""Matrix-free Newton-CG and augmented-Lagrangian solvers with certified residuals."""

from .auglag import (
    AlParams,
    AlReport,
    AlResiduals,
    AlStatus,
    EqualityProblem,
    al_function,
    al_solve,
    check_fosp,
    check_sosp,
    multiplier_update,
    penalty_update,
    tolerance_schedule,
    warm_start_point,
)
from .capped_cg import CgOutcome, CgParams, capped_cg, validate_sol
from .meo import MeoOutcome, MeoParams, estimate_operator_norm, exact_meo, lanczos_meo
from .newton_cg import (
    LineSearchError,
    NewtonCgParams,
    NewtonCgReport,
    SolveStatus,
    line_search_nc,
    line_search_sol,
    negcurve_rescale,
    newton_cg,
)
from .operators import (
    EvalCounts,
    SmoothFunction,
    SymmetricOperator,
    dense_materialize,
    fd_check,
    operator_from_matrix,
)
from .problems import (
    RegressionInstance,
    feasible_seed_point,
    linear_sphere_problem,
    load_instance,
    random_instance,
    robust_regression,
    save_instance,
    sphere_constrained,
)

__version__ = "0.1.0"

__all__ = [
    "AlParams", "AlReport", "AlResiduals", "AlStatus", "EqualityProblem",
    "al_function", "al_solve", "check_fosp", "check_sosp",
    "multiplier_update", "penalty_update", "tolerance_schedule",
    "warm_start_point", "CgOutcome", "CgParams", "capped_cg", "validate_sol",
    "MeoOutcome", "MeoParams", "estimate_operator_norm", "exact_meo",
    "lanczos_meo", "LineSearchError", "NewtonCgParams", "NewtonCgReport",
    "SolveStatus", "line_search_nc", "line_search_sol", "negcurve_rescale",
    "newton_cg", "EvalCounts", "SmoothFunction", "SymmetricOperator",
    "dense_materialize", "fd_check", "operator_from_matrix",
    "RegressionInstance", "feasible_seed_point", "linear_sphere_problem",
    "load_instance", "random_instance", "robust_regression", "save_instance",
    "sphere_constrained", "__version__",
]
