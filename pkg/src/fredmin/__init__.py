"""fredmin: exact minimal-norm solutions of first-kind Fredholm integral
equations with separable kernels, a series-kernel extension, and a dense
pseudo-inverse oracle for verification.
"""

__version__ = "0.1.0"

from .errors import (EvalDomainError, ExprSyntaxError, FredminError,
                     GramConditioningError, SingularMatrixError,
                     TruncationError, UnknownIdentifierError, ValidationError)
from .expr import (Domain, FuncExpr, evaluate, parse_expr, rename_vars,
                   substitute, to_text)
from .gram import (GramSet, SeparableKernel, assemble, invert_spd,
                   solve_general, solve_spd)
from .quadrature import (QuadratureRule, default_rule, gauss_legendre,
                         inner_product, integrate, norm_l2)
from .solver import (ComposedSolution, Corollary2Report, LegacySolution,
                     MinNormSolution, NullComponent, ResidualReport, RhsSpec,
                     apply_operator, check_corollary2, compose_structure,
                     default_null_candidates, null_project,
                     orthonormal_null_basis, project_rhs, residual_report,
                     rk_eval, solve_min_norm, solve_prop1, solve_theorem1)
from .series import (SeriesKernel, TruncationPolicy, TruncationResult,
                     bhcp_kernel, bhcp_rhs_coeffs, solve_series, truncate)
from .oracle import (CompareReport, DiscreteOperator, OracleSolution, compare,
                     discretize, oracle_min_norm)
from .problem import parse_problem_file, parse_problem_text
from .pipeline import solve_problem
from .report import render_json, render_text

_ESTIMATORS = ("MinNormSolver", "SeriesSolver", "NystromOracle")


def __getattr__(name):
    # estimators pull in scikit-learn; load them lazily so the CLI stays light
    if name in _ESTIMATORS:
        from . import estimators
        return getattr(estimators, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_ESTIMATORS))
