"""Gram matrices for a separable kernel: the h-family matrix H, the g-family
matrix G, the cross matrix A and the rhs moment vectors.

All entries come from one shared quadrature rule. Matrices are dense n x n
with n <= 64; the problems this library targets are tiny and the answer
involves explicit inverses, so there is nothing to gain from sparsity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import GramConditioningError, SingularMatrixError, ValidationError
from .expr import Domain, FuncExpr, evaluate, rebind_points
from .quadrature import QuadratureRule, tensor_nodes

MAX_FAMILY = 64
COND_THRESHOLD = 1e12


@dataclass(frozen=True)
class SeparableKernel:
    """k(x, t) = sum_i gs[i](x) * hs[i](t) with x in D, t in E."""

    gs: tuple[FuncExpr, ...]
    hs: tuple[FuncExpr, ...]
    D: Domain
    E: Domain

    def __post_init__(self):
        if len(self.gs) != len(self.hs) or len(self.gs) < 1:
            raise ValidationError(
                f"kernel needs matching non-empty factor lists, got "
                f"{len(self.gs)} g's and {len(self.hs)} h's")
        if len(self.gs) > MAX_FAMILY:
            raise ValidationError(f"at most {MAX_FAMILY} kernel terms supported")
        for g in self.gs:
            _require_vars(g, self.D, "g")
        for h in self.hs:
            _require_vars(h, self.E, "h")

    @property
    def n(self):
        return len(self.gs)


def _require_vars(f, dom, label):
    extra = set(f.vars) - set(dom.names)
    if extra:
        raise ValidationError(
            f"{label}-factor uses variables {sorted(extra)} outside its domain "
            f"axes {list(dom.names)}")


@dataclass(eq=False)
class GramSet:
    """Assembled matrices and moments for one kernel / rhs pair.

    Treated as immutable after assembly. `A` and `F` need the x-space and
    t-space to coincide as variable spaces (equal dimension, positional axis
    identification) and are only present when cross assembly was requested.
    `Fg` holds <f, g_k> over the x-space, the moments the projection path uses.
    """

    kernel: SeparableKernel
    rule: QuadratureRule
    H: np.ndarray
    G: np.ndarray
    condH: float
    condG: float
    f: FuncExpr | None = None
    F: np.ndarray | None = None
    Fg: np.ndarray | None = None
    fnorm_D_sq: float | None = None
    A: np.ndarray | None = None
    cross_scale: float | None = None  # max_i,j ||h_i||_E * ||g_j||_E

    @property
    def n(self):
        return self.kernel.n


def _symmetrize(M):
    return 0.5 * (M + M.T)


def _most_collinear_pair(M):
    d = np.sqrt(np.abs(np.diag(M)))
    d[d == 0] = 1.0
    R = np.abs(M) / np.outer(d, d)
    np.fill_diagonal(R, 0.0)
    i, j = divmod(int(np.argmax(R)), M.shape[0])
    return i, j, float(R[i, j])


def family_values(family, dom, rule):
    """Evaluate each family member once on the shared node set.

    Returns (Phi, weights) with Phi[i] the i-th member at all tensor nodes.
    """
    points, weights = tensor_nodes(dom, rule)
    rows = [np.broadcast_to(np.asarray(evaluate(f, points), dtype=float),
                            weights.shape) for f in family]
    return np.vstack(rows), weights, points


def assemble(kernel: SeparableKernel, f: FuncExpr | None, rule: QuadratureRule,
             cross: bool = False,
             cond_threshold: float = COND_THRESHOLD) -> GramSet:
    """Build the GramSet for `kernel` and optional rhs `f` (a function on D).

    Raises GramConditioningError when the h-family is numerically dependent;
    the minimal-norm answer contains H^{-1}, so dependence is fatal. A
    dependent g-family only matters for the projection path and is checked
    there (condG is recorded here either way).
    """
    Phi_h, w_E, pts_E = family_values(kernel.hs, kernel.E, rule)
    H = _symmetrize((Phi_h * w_E) @ Phi_h.T)
    condH = float(np.linalg.cond(H))
    if not np.isfinite(condH) or condH > cond_threshold:
        i, j, r = _most_collinear_pair(H)
        raise GramConditioningError(
            f"h-family numerically dependent: cond(H) = {condH:.3e} exceeds "
            f"{cond_threshold:.1e}; most collinear pair h[{i}], h[{j}] "
            f"(|cos| = {r:.6f})")

    Phi_g, w_D, pts_D = family_values(kernel.gs, kernel.D, rule)
    G = _symmetrize((Phi_g * w_D) @ Phi_g.T)
    condG = float(np.linalg.cond(G))

    gram = GramSet(kernel=kernel, rule=rule, H=H, G=G,
                   condH=condH, condG=condG, f=f)

    if f is not None:
        _require_vars(f, kernel.D, "rhs")
        f_D = np.broadcast_to(np.asarray(evaluate(f, pts_D), dtype=float),
                              w_D.shape)
        gram.Fg = (Phi_g * w_D) @ f_D
        gram.fnorm_D_sq = float(np.dot(w_D, f_D * f_D))

    if cross:
        pts = rebind_points(pts_E, kernel.D, kernel.E)
        Phi_g_on_E = np.vstack(
            [np.broadcast_to(np.asarray(evaluate(g, pts), dtype=float),
                             w_E.shape) for g in kernel.gs])
        gram.A = (Phi_h * w_E) @ Phi_g_on_E.T
        gnorm_E = np.sqrt(np.maximum((Phi_g_on_E * Phi_g_on_E) @ w_E, 0.0))
        hnorm_E = np.sqrt(np.maximum(np.diag(H), 0.0))
        gram.cross_scale = float(np.max(hnorm_E) * np.max(gnorm_E))
        if f is not None:
            f_E = np.broadcast_to(
                np.asarray(evaluate(f, pts), dtype=float), w_E.shape)
            gram.F = (Phi_h * w_E) @ f_E

    return gram


def invert_spd(M: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix via Cholesky."""
    M = np.asarray(M, dtype=float)
    try:
        c, low = scipy.linalg.cho_factor(M, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise GramConditioningError(
            f"matrix is not positive definite: {exc}") from exc
    return scipy.linalg.cho_solve((c, low), np.eye(M.shape[0]))


def solve_spd(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve M x = b for symmetric positive definite M."""
    try:
        c, low = scipy.linalg.cho_factor(np.asarray(M, dtype=float), lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise GramConditioningError(
            f"matrix is not positive definite: {exc}") from exc
    return scipy.linalg.cho_solve((c, low), np.asarray(b, dtype=float))


def solve_general(M: np.ndarray, b: np.ndarray, scale: float | None = None,
                  rcond: float = 1e-12) -> np.ndarray:
    """Rank-revealing dense solve.

    Raises SingularMatrixError on rank deficiency instead of returning a
    garbage solution; callers fall back to the projection path. `scale` sets
    the absolute floor for the rank test (pass the natural magnitude of the
    matrix entries, e.g. the product of family norms for a cross Gram matrix,
    so an all-zero matrix of round-off is not mistaken for full rank).
    """
    M = np.asarray(M, dtype=float)
    b = np.asarray(b, dtype=float)
    U, s, Vt = np.linalg.svd(M)
    floor = max(float(s[0]) if s.size else 0.0, scale or 0.0)
    tol = rcond * floor
    rank = int(np.sum(s > tol))
    if rank < M.shape[0]:
        raise SingularMatrixError("matrix is singular", rank, M.shape[0])
    return Vt.T @ ((U.T @ b) / s)
