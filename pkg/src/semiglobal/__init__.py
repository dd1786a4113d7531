"""Semi-global solutions of DSGE models by expansion in the shock scale around a deterministic path."""

from .burnside import BurnsideParams, accuracy_report, exact_policy, semiglobal_policy
from .detpath import DeterministicPath, path_residual, propagate_exogenous, solve_path
from .errors import SolverError
from .expansion import ExpansionSolution, first_order_ma, solve_expansion
from .model import DerivativeBundle, EvalPoint, ModelSpec, derivatives, evaluate, hessians, jacobians, steady_state
from .models import burnside_model, get_model, growth_model, linear_model
from .schur import SchurSplit, bk_check, block_schur
from .tvlre import backward_recursion, build_tvsystem, norm_bounds, solvability_check, solve_order

__all__ = [name for name in dir() if not name.startswith("_")]
