"""Closed-form minimal-norm solver for separable first-kind equations.

The answer lives in the span of the h-family: u(t) = beta . H(t) with
beta = H^{-1} C, where C are the coefficients of the right-hand side against
the g-family. C is either supplied directly, read off by L2 projection of a
general rhs onto span{g_i}, or (legacy route) computed as A^{-1} F when the
cross matrix A is invertible. All routes share the same finishing pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GramConditioningError, ValidationError
from .expr import (Binary, Domain, FuncExpr, evaluate, linear_combination,
                   polynomial, rebind_points)
from .gram import (GramSet, SeparableKernel, _most_collinear_pair,
                   family_values, solve_general, solve_spd)
from .quadrature import QuadratureRule, tensor_nodes
from .validation import as_float_vector, as_point_map

_TINY = 1e-30
IN_RANGE_TOL = 1e-8


@dataclass(frozen=True)
class RhsSpec:
    """Right-hand side: either coefficients against the g-family (f = C.G(x),
    solved verbatim without projection) or a general function to project."""

    coeffs: tuple[float, ...] | None = None
    func: FuncExpr | None = None

    def __post_init__(self):
        if (self.coeffs is None) == (self.func is None):
            raise ValidationError(
                "rhs must be exactly one of coefficients or a function")

    @staticmethod
    def from_coeffs(coeffs):
        return RhsSpec(coeffs=tuple(float(c) for c in coeffs))

    @staticmethod
    def from_func(func):
        return RhsSpec(func=func)


def as_rhs(rhs, kernel: SeparableKernel) -> RhsSpec:
    if isinstance(rhs, RhsSpec):
        return rhs
    if isinstance(rhs, FuncExpr):
        return RhsSpec.from_func(rhs)
    return RhsSpec.from_coeffs(
        as_float_vector(rhs, kernel.n, "rhs coefficients"))


def _combo_values(coeffs, family, points):
    total = None
    for c, f in zip(coeffs, family):
        term = np.asarray(evaluate(f, points), dtype=float) * c
        total = term if total is None else total + term
    return total


@dataclass(eq=False)
class MinNormSolution:
    """The minimal-norm least-squares solution u(t) = beta . H(t).

    `norm_sq` is C . H^{-1} C, equal to beta . H beta; both ways of writing
    the squared norm agree to round-off and the tests pin that down.
    Calling the solution evaluates the closed form; there is no sampling
    error beyond the quadrature already inside H.
    """

    kernel: SeparableKernel
    beta: np.ndarray
    C: np.ndarray
    norm_sq: float
    in_range_residual: float
    least_squares: bool
    path: str

    @property
    def norm(self):
        return float(np.sqrt(max(self.norm_sq, 0.0)))

    def __call__(self, points):
        pts = as_point_map(points, self.kernel.E)
        return _combo_values(self.beta, self.kernel.hs, pts)

    @property
    def expr(self) -> FuncExpr:
        return linear_combination(self.beta, self.kernel.hs)


def project_rhs(f: FuncExpr, gram: GramSet,
                cond_threshold: float = 1e12):
    """L2(D) projection of f onto span{g_i}.

    Returns (C, residual): the coefficients and the relative distance of f
    from the span. The residual is integrated directly from the pointwise
    difference, not from the quadratic form, so an in-range rhs comes out at
    round-off level instead of sqrt(round-off).
    """
    if gram.Fg is None or gram.fnorm_D_sq is None:
        raise ValidationError("gram set was assembled without the rhs")
    if not np.isfinite(gram.condG) or gram.condG > cond_threshold:
        i, j, r = _most_collinear_pair(gram.G)
        raise GramConditioningError(
            f"g-family numerically dependent: cond(G) = {gram.condG:.3e} "
            f"exceeds {cond_threshold:.1e}; most collinear pair g[{i}], "
            f"g[{j}] (|cos| = {r:.6f})")
    C = solve_spd(gram.G, gram.Fg)
    kernel, rule = gram.kernel, gram.rule
    Phi_g, w_D, pts_D = family_values(kernel.gs, kernel.D, rule)
    f_D = np.broadcast_to(np.asarray(evaluate(f, pts_D), dtype=float),
                          w_D.shape)
    diff = f_D - C @ Phi_g
    resid = float(np.sqrt(max(np.dot(w_D, diff * diff), 0.0)))
    fnorm = float(np.sqrt(max(gram.fnorm_D_sq, 0.0)))
    return C, resid / max(fnorm, _TINY)


def _finish(C, gram, residual, path, in_range_tol):
    beta = solve_spd(gram.H, C)
    norm_sq = max(float(np.dot(C, beta)), 0.0)
    return MinNormSolution(
        kernel=gram.kernel, beta=beta, C=np.asarray(C, dtype=float),
        norm_sq=norm_sq, in_range_residual=float(residual),
        least_squares=bool(residual > in_range_tol), path=path)


def solve_min_norm(rhs, kernel: SeparableKernel, gram: GramSet,
                   in_range_tol: float = IN_RANGE_TOL) -> MinNormSolution:
    """Minimal-norm solution; works with any rhs, singular cross matrix or not.

    With coefficient rhs, C is used verbatim. With a function rhs, C comes
    from project_rhs; when the projection residual exceeds `in_range_tol` the
    solve still proceeds (it is then the minimal-norm least-squares solution)
    and the result carries the least_squares flag.
    """
    spec = as_rhs(rhs, kernel)
    if spec.coeffs is not None:
        C = as_float_vector(spec.coeffs, kernel.n, "rhs coefficients")
        residual = 0.0
    else:
        C, residual = project_rhs(spec.func, gram)
    return _finish(C, gram, residual, "corollary1", in_range_tol)


def solve_theorem1(gram: GramSet,
                   in_range_tol: float = IN_RANGE_TOL) -> MinNormSolution:
    """Legacy-compatible route: C = A^{-1} F, then the shared pipeline.

    Requires the cross matrices; raises SingularMatrixError when A is rank
    deficient, in which case callers should use solve_min_norm, which never
    needs A.
    """
    if gram.A is None or gram.F is None:
        raise ValidationError(
            "cross matrices were not assembled; reassemble with cross=True")
    C = solve_general(gram.A, gram.F, scale=gram.cross_scale)
    residual = 0.0
    if gram.f is not None and gram.Fg is not None:
        # honest diagnostic: how far f actually is from C . G(x)
        kernel, rule = gram.kernel, gram.rule
        Phi_g, w_D, pts_D = family_values(kernel.gs, kernel.D, rule)
        f_D = np.broadcast_to(np.asarray(evaluate(gram.f, pts_D), dtype=float),
                              w_D.shape)
        diff = f_D - C @ Phi_g
        fnorm = float(np.sqrt(max(gram.fnorm_D_sq, 0.0)))
        residual = float(np.sqrt(max(np.dot(w_D, diff * diff), 0.0)))
        residual /= max(fnorm, _TINY)
    return _finish(C, gram, residual, "theorem1", in_range_tol)


@dataclass(eq=False)
class LegacySolution:
    """The g-basis solution u(t) = z . G(t) with z = (A^{-1})^2 F.

    Only valid when A is invertible; kept for comparison against the
    minimal-norm answer (its norm is never smaller).
    """

    kernel: SeparableKernel
    z: np.ndarray
    norm_sq: float

    @property
    def norm(self):
        return float(np.sqrt(max(self.norm_sq, 0.0)))

    def __call__(self, points):
        pts = as_point_map(points, self.kernel.E)
        pts_D = rebind_points(pts, self.kernel.D, self.kernel.E)
        return _combo_values(self.z, self.kernel.gs, pts_D)


def solve_prop1(gram: GramSet) -> LegacySolution:
    if gram.A is None or gram.F is None:
        raise ValidationError(
            "cross matrices were not assembled; reassemble with cross=True")
    kernel = gram.kernel
    y = solve_general(gram.A, gram.F, scale=gram.cross_scale)
    z = solve_general(gram.A, y, scale=gram.cross_scale)
    # the candidate lives on the t-space, so its norm integrates there (equal
    # to z.G z whenever the two spaces are the same box)
    pts_E, w_E = tensor_nodes(kernel.E, gram.rule)
    pts_D = rebind_points(pts_E, kernel.D, kernel.E)
    vals = _combo_values(z, kernel.gs, pts_D)
    norm_sq = max(float(np.dot(w_E, vals * vals)), 0.0)
    return LegacySolution(kernel=kernel, z=z, norm_sq=norm_sq)


@dataclass(frozen=True)
class Corollary2Report:
    consistent: bool
    max_dev: float
    k_residual: float
    norm_dev: float


def check_corollary2(gram: GramSet, K, samples: int = 200,
                     tol: float = 1e-8, k_tol: float = 1e-6) -> Corollary2Report:
    """Check that the legacy and minimal-norm routes agree when G(x) = K H(x).

    K must be supplied by the caller and is verified numerically on a sample
    grid before the two solutions are compared pointwise.
    """
    kernel = gram.kernel
    K = np.asarray(K, dtype=float)
    n = kernel.n
    if K.shape != (n, n):
        raise ValidationError(f"K must be {n}x{n}, got {K.shape}")
    grid_D = kernel.D.grid(25)
    g_vals = np.vstack([np.broadcast_to(
        np.asarray(evaluate(g, grid_D), dtype=float),
        next(iter(grid_D.values())).shape) for g in kernel.gs])
    grid_for_h = rebind_points(grid_D, kernel.E, kernel.D)
    h_vals = np.vstack([np.broadcast_to(
        np.asarray(evaluate(h, grid_for_h), dtype=float),
        next(iter(grid_D.values())).shape) for h in kernel.hs])
    mismatch = float(np.max(np.abs(g_vals - K @ h_vals)))
    scale = max(float(np.max(np.abs(g_vals))), _TINY)
    k_residual = mismatch / scale
    if k_residual > k_tol:
        raise ValidationError(
            f"K does not map H(x) onto G(x): relative mismatch {k_residual:.3e}")

    u_min = solve_theorem1(gram)
    u_legacy = solve_prop1(gram)
    grid_E = kernel.E.grid(samples)
    dev = float(np.max(np.abs(u_legacy(grid_E) - u_min(grid_E))))
    norm_dev = abs(u_legacy.norm - u_min.norm)
    return Corollary2Report(consistent=bool(dev <= tol), max_dev=dev,
                            k_residual=k_residual, norm_dev=norm_dev)


# ---------------------------------------------------------------------------
# Null space

def null_project(v: FuncExpr, kernel: SeparableKernel,
                 gram: GramSet) -> FuncExpr:
    """Orthogonal projection of v onto the null space N(L).

    N(L) is the orthogonal complement of span{h_i}, so the projector is
    v - sum_ij (H^{-1})_ij <h_j, v> h_i, returned as a closed-form combination.
    Idempotent, annihilates span{h_i}, and L maps its output to zero.
    """
    Phi_h, w_E, pts_E = family_values(kernel.hs, kernel.E, gram.rule)
    v_E = np.broadcast_to(np.asarray(evaluate(v, pts_E), dtype=float),
                          w_E.shape)
    b = (Phi_h * w_E) @ v_E
    a = solve_spd(gram.H, b)
    base = FuncExpr(v.ast, kernel.E.names)
    hs = tuple(FuncExpr(h.ast, kernel.E.names) for h in kernel.hs)
    return linear_combination(-a, hs, base=base)


@dataclass(frozen=True)
class NullComponent:
    """Orthonormal null-space directions phi_i with coefficients c_i."""

    phis: tuple[FuncExpr, ...]
    coeffs: tuple[float, ...]

    def __post_init__(self):
        if len(self.phis) != len(self.coeffs):
            raise ValidationError(
                f"{len(self.coeffs)} coefficients for {len(self.phis)} "
                "null directions")


def _shifted_legendre_coeffs(k, lo, hi):
    """Monomial coefficients of the degree-k Legendre polynomial mapped to
    [lo, hi]."""
    ref = np.polynomial.Polynomial(np.polynomial.legendre.leg2poly(
        [0.0] * k + [1.0]))
    affine = np.polynomial.Polynomial(
        [-(lo + hi) / (hi - lo), 2.0 / (hi - lo)])
    return ref(affine).coef


def default_null_candidates(E: Domain, degree: int) -> list[FuncExpr]:
    """Shifted Legendre polynomials on E, tensorized up to total degree."""
    if degree < 0:
        raise ValidationError("degree must be >= 0")
    per_axis = [
        [polynomial(_shifted_legendre_coeffs(k, lo, hi), name, E.names)
         for k in range(degree + 1)]
        for name, lo, hi in E.axes]
    if E.dim == 1:
        return per_axis[0]
    if E.dim == 2:
        combos = [(i, j) for i in range(degree + 1) for j in range(degree + 1)
                  if i + j <= degree]
    else:
        combos = [(i, j, k) for i in range(degree + 1)
                  for j in range(degree + 1) for k in range(degree + 1)
                  if i + j + k <= degree]
    out = []
    for combo in combos:
        node = per_axis[0][combo[0]].ast
        for axis, k in enumerate(combo[1:], start=1):
            node = Binary("*", node, per_axis[axis][k].ast)
        out.append(FuncExpr(node, E.names))
    return out


def orthonormal_null_basis(candidates, kernel: SeparableKernel, gram: GramSet,
                           drop_tol: float = 1e-8) -> tuple[FuncExpr, ...]:
    """Project candidates into N(L) and orthonormalize what survives.

    Modified Gram-Schmidt with one re-orthogonalization pass, run on
    coefficient vectors over the flat basis [candidates..., h's...] with the
    quadrature Gram matrix as the inner product. Candidates that lie in
    span{h_i} project to zero and are dropped.
    """
    candidates = [FuncExpr(c.ast, kernel.E.names) for c in candidates]
    hs = tuple(FuncExpr(h.ast, kernel.E.names) for h in kernel.hs)
    base = list(candidates) + list(hs)
    Phi, w_E, _ = family_values(base, kernel.E, gram.rule)
    n_c, n = len(candidates), kernel.n

    # Gram-Schmidt runs on weighted value vectors, not on coefficient
    # vectors: a candidate family that is nearly dependent modulo span{h}
    # would otherwise square its conditioning through the Gram matrix.
    # Coefficients over `base` are carried along for the closed form.
    kept_vals, kept_coeffs = [], []
    for k in range(n_c):
        b = (Phi[n_c:] * w_E) @ Phi[k]
        a = solve_spd(gram.H, b)
        coeff = np.zeros(n_c + n)
        coeff[k] = 1.0
        coeff[n_c:] = -a
        vals = Phi[k] - a @ Phi[n_c:]
        cand_scale = float(np.sqrt(max(np.dot(w_E, Phi[k] * Phi[k]), 0.0)))
        for _ in range(2):  # re-orthogonalization pass
            for q_vals, q_coeff in zip(kept_vals, kept_coeffs):
                proj = float(np.dot(w_E, vals * q_vals))
                vals = vals - proj * q_vals
                coeff = coeff - proj * q_coeff
        nrm = float(np.sqrt(max(np.dot(w_E, vals * vals), 0.0)))
        if nrm <= drop_tol * max(cand_scale, _TINY):
            continue
        kept_vals.append(vals / nrm)
        kept_coeffs.append(coeff / nrm)

    return tuple(linear_combination(q, base) for q in kept_coeffs)


@dataclass(eq=False)
class ComposedSolution:
    """u = u_dagger + sum_i c_i phi_i, with the Pythagorean norm bookkeeping."""

    u_dagger: MinNormSolution
    null: NullComponent
    norm_sq: float            # ||u_dagger||^2 + sum c_i^2
    norm_sq_quadrature: float
    pythagoras_rel_dev: float
    operator_dev: float

    def __call__(self, points):
        pts = as_point_map(points, self.u_dagger.kernel.E)
        out = np.asarray(self.u_dagger(pts), dtype=float)
        if self.null.phis:
            out = out + _combo_values(self.null.coeffs, self.null.phis, pts)
        return out


def compose_structure(u_dagger: MinNormSolution, null: NullComponent,
                      rule: QuadratureRule,
                      operator_samples: int = 20) -> ComposedSolution:
    """Assemble a full solution u_dagger + sum c_i phi_i.

    Any finite combination is itself a solution: the report confirms
    L(u) = L(u_dagger) on a sample grid and that the squared norms add.
    """
    kernel = u_dagger.kernel
    norm_sq = u_dagger.norm_sq + float(np.dot(null.coeffs, null.coeffs))

    def combined(pts):
        out = np.asarray(u_dagger(pts), dtype=float)
        if null.phis:
            out = out + _combo_values(null.coeffs, null.phis, pts)
        return out

    pts_E, w_E = tensor_nodes(kernel.E, rule)
    vals = combined(pts_E)
    norm_sq_quad = float(np.dot(w_E, vals * vals))
    pyth_dev = abs(norm_sq_quad - norm_sq) / max(norm_sq, _TINY)

    grid_D = kernel.D.grid(operator_samples)
    lu = apply_operator(combined, kernel, grid_D, rule)
    lu_dagger = apply_operator(u_dagger, kernel, grid_D, rule)
    op_dev = float(np.max(np.abs(np.asarray(lu) - np.asarray(lu_dagger))))
    return ComposedSolution(
        u_dagger=u_dagger, null=null, norm_sq=norm_sq,
        norm_sq_quadrature=norm_sq_quad, pythagoras_rel_dev=pyth_dev,
        operator_dev=op_dev)


# ---------------------------------------------------------------------------
# Operator-side helpers

def rk_eval(x, x_prime, kernel: SeparableKernel, gram: GramSet):
    """Reproducing kernel of the range space: K(x, x') = G(x)^T H G(x').

    Symmetric in its arguments; for an in-range rhs f = C . G, the
    reproducing identity G(x)^T H C = f(x) holds.
    """
    px = as_point_map(x, kernel.D)
    pxp = as_point_map(x_prime, kernel.D)
    gx = np.array([evaluate(g, px) for g in kernel.gs])
    gxp = np.array([evaluate(g, pxp) for g in kernel.gs])
    out = np.einsum("i...,ij,j...->...", gx, gram.H, gxp)
    return float(out) if out.ndim == 0 else out


def apply_operator(u, kernel: SeparableKernel, x, rule: QuadratureRule):
    """L(u)(x) = integral_E k(x, t) u(t) dt = sum_i g_i(x) <h_i, u>."""
    Phi_h, w_E, pts_E = family_values(kernel.hs, kernel.E, rule)
    u_E = u(pts_E) if callable(u) and not isinstance(u, FuncExpr) \
        else evaluate(u, pts_E)
    u_E = np.broadcast_to(np.asarray(u_E, dtype=float), w_E.shape)
    moments = (Phi_h * w_E) @ u_E
    px = as_point_map(x, kernel.D)
    total = None
    for m, g in zip(moments, kernel.gs):
        term = np.asarray(evaluate(g, px), dtype=float) * m
        total = term if total is None else total + term
    return float(total) if np.ndim(total) == 0 else total


@dataclass(frozen=True)
class ResidualReport:
    max_abs: float
    rel_l2: float
    samples_per_axis: int


def residual_report(sol, kernel: SeparableKernel, f: FuncExpr, m: int,
                    rule: QuadratureRule) -> ResidualReport:
    """Residual L(sol) - f on a uniform grid of m points per axis."""
    if m < 2:
        raise ValidationError("residual grid needs at least 2 points per axis")
    grid = kernel.D.grid(m)
    lu = np.asarray(apply_operator(sol, kernel, grid, rule), dtype=float)
    shape = next(iter(grid.values())).shape
    fv = np.broadcast_to(np.asarray(evaluate(f, grid), dtype=float), shape)
    lu = np.broadcast_to(lu, shape)
    r = lu - fv
    rel = float(np.linalg.norm(r) / max(np.linalg.norm(fv), _TINY))
    return ResidualReport(max_abs=float(np.max(np.abs(r))), rel_l2=rel,
                          samples_per_axis=m)
