"""Estimator-style wrappers around the functional core.

These follow the scikit-learn conventions (constructor hyperparameters,
fit/predict, trailing-underscore fitted attributes, get_params/set_params)
so a solve composes with the wider ecosystem: solvers can be cloned,
grid-searched over quadrature or truncation settings, and swapped against
the Nystrom oracle behind one interface.

`fit` takes a kernel and a right-hand side instead of the usual (X, y)
arrays: the training data of these models is the operator equation itself.
`predict` evaluates the fitted solution at points on the t-space, passed as
a named map axis -> array (or a bare array for 1-axis domains).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import ValidationError
from .expr import FuncExpr
from .gram import SeparableKernel, assemble
from .oracle import compare, discretize, oracle_min_norm
from .quadrature import gauss_legendre
from .series import SeriesKernel, TruncationPolicy, solve_series
from .solver import as_rhs, solve_min_norm, solve_theorem1


class MinNormSolver(BaseEstimator):
    """Closed-form minimal-norm solver for separable kernels.

    Parameters
    ----------
    quad_order, panels : shared quadrature rule for every inner product.
    path : "corollary1" projects the rhs and never needs the cross matrix;
        "theorem1" goes through A^{-1}F and falls back to the projection
        path when A is singular.
    in_range_tol : relative projection residual above which the result is
        flagged as a least-squares solve.
    cond_threshold : conditioning limit for the Gram matrices.
    """

    def __init__(self, quad_order=32, panels=4, path="corollary1",
                 in_range_tol=1e-8, cond_threshold=1e12):
        self.quad_order = quad_order
        self.panels = panels
        self.path = path
        self.in_range_tol = in_range_tol
        self.cond_threshold = cond_threshold

    def fit(self, kernel: SeparableKernel, rhs):
        """Assemble the Gram set and compute the closed-form solution.

        rhs may be an RhsSpec, a FuncExpr on the x-space, or a coefficient
        vector against the g-family.
        """
        if self.path not in ("corollary1", "theorem1"):
            raise ValidationError(f"unknown path {self.path!r}")
        rule = gauss_legendre(self.quad_order, self.panels)
        spec = as_rhs(rhs, kernel)
        cross = self.path == "theorem1"
        if cross and kernel.D.dim != kernel.E.dim:
            raise ValidationError(
                "theorem1 needs the x-space and t-space to coincide as "
                "variable spaces")
        gram = assemble(kernel, spec.func, rule, cross=cross,
                        cond_threshold=self.cond_threshold)
        if cross and gram.F is None and spec.coeffs is not None:
            gram.F = gram.A @ np.asarray(spec.coeffs, dtype=float)
        fell_back = False
        if cross:
            try:
                sol = solve_theorem1(gram, in_range_tol=self.in_range_tol)
            except Exception:
                fell_back = True
                sol = solve_min_norm(spec, kernel, gram,
                                     in_range_tol=self.in_range_tol)
        else:
            sol = solve_min_norm(spec, kernel, gram,
                                 in_range_tol=self.in_range_tol)
        self.kernel_ = kernel
        self.rule_ = rule
        self.gram_ = gram
        self.solution_ = sol
        self.coeffs_ = sol.C
        self.beta_ = sol.beta
        self.norm_ = sol.norm
        self.norm_sq_ = sol.norm_sq
        self.in_range_residual_ = sol.in_range_residual
        self.least_squares_ = sol.least_squares
        self.path_ = sol.path
        self.fell_back_ = fell_back
        return self

    def predict(self, points):
        """Evaluate the fitted solution on the t-space."""
        check_is_fitted(self, "solution_")
        return np.asarray(self.solution_(points), dtype=float)


class SeriesSolver(BaseEstimator):
    """Truncate a series kernel, then solve the separable prefix."""

    def __init__(self, quad_order=32, panels=4, max_terms=50,
                 tail_tol=1e-12, mode="adaptive", cond_threshold=1e12):
        self.quad_order = quad_order
        self.panels = panels
        self.max_terms = max_terms
        self.tail_tol = tail_tol
        self.mode = mode
        self.cond_threshold = cond_threshold

    def fit(self, kernel: SeriesKernel, rhs=None):
        """rhs is carried by the SeriesKernel (rhs_coeff); pass None."""
        if rhs is not None:
            raise ValidationError(
                "series kernels carry their rhs coefficients; pass rhs=None")
        rule = gauss_legendre(self.quad_order, self.panels)
        policy = TruncationPolicy(max_terms=self.max_terms,
                                  tail_tol=self.tail_tol, mode=self.mode)
        sol, trunc = solve_series(kernel, policy, rule,
                                  cond_threshold=self.cond_threshold)
        self.rule_ = rule
        self.kernel_ = trunc.kernel
        self.n_terms_ = trunc.n_terms
        self.tail_estimate_ = trunc.tail_estimate
        self.solution_ = sol
        self.coeffs_ = sol.C
        self.beta_ = sol.beta
        self.norm_ = sol.norm
        self.norm_sq_ = sol.norm_sq
        self.path_ = sol.path
        return self

    def predict(self, points):
        check_is_fitted(self, "solution_")
        return np.asarray(self.solution_(points), dtype=float)


class NystromOracle(BaseEstimator):
    """Independent brute-force verifier behind the same fit interface.

    fit discretizes the operator on weighted quadrature nodes and solves by
    SVD pseudo-inverse; the solution is known at `t_nodes_` (no predict at
    arbitrary points: the oracle makes no smoothness claims). Use compare_to
    to measure the deviation of a closed-form solution.
    """

    def __init__(self, m_t=200, m_x=200, sv_cutoff=1e-10):
        self.m_t = m_t
        self.m_x = m_x
        self.sv_cutoff = sv_cutoff

    def fit(self, kernel: SeparableKernel, rhs):
        if not isinstance(rhs, FuncExpr):
            raise ValidationError("the oracle needs the rhs as a FuncExpr")
        dop = discretize(kernel, self.m_t, self.m_x)
        osol = oracle_min_norm(dop, rhs, cutoff=self.sv_cutoff)
        self.operator_ = dop
        self.oracle_solution_ = osol
        self.t_nodes_ = osol.t_points
        self.solution_values_ = osol.values
        self.norm_ = osol.norm
        self.rank_ = osol.rank
        return self

    def compare_to(self, closed):
        check_is_fitted(self, "oracle_solution_")
        return compare(closed, self.oracle_solution_)
