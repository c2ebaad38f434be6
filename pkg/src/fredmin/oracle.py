"""Brute-force verifier: Nystrom discretization plus a dense pseudo-inverse.

Completely independent of the closed-form path: the operator is sampled on
quadrature nodes, weighted so Euclidean norms approximate L2 norms, and the
minimal-norm least-squares solution is read off the SVD. The closed-form
solver never calls into this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .expr import Domain, FuncExpr, evaluate
from .gram import SeparableKernel
from .quadrature import MAX_ORDER, gauss_legendre, tensor_nodes
from .solver import MinNormSolution

MAX_NODES = 2000
SV_CUTOFF = 1e-10


@dataclass(eq=False)
class DiscreteOperator:
    """Weighted kernel matrix M[k, j] = sqrt(v_k) k(x_k, t_j) sqrt(w_j)."""

    M: np.ndarray
    t_points: dict
    t_weights: np.ndarray
    x_points: dict
    x_weights: np.ndarray
    D: Domain
    E: Domain


def _axis_rule(q):
    if q <= MAX_ORDER:
        return gauss_legendre(q, 1)
    return gauss_legendre(MAX_ORDER, math.ceil(q / MAX_ORDER))


def _nodes_for(dom, m):
    q = max(2, round(m ** (1.0 / dom.dim)))
    return tensor_nodes(dom, _axis_rule(q))


def discretize(kernel: SeparableKernel, m_t: int, m_x: int) -> DiscreteOperator:
    """Sample the kernel on Gauss-Legendre node sets of roughly the requested
    sizes (m is the total node budget; multi-axis domains split it evenly,
    so the realized count is the nearest tensor grid)."""
    n = kernel.n
    for name, m in (("m_t", m_t), ("m_x", m_x)):
        if not n <= m <= MAX_NODES:
            raise ValidationError(f"{name} must be in [{n}, {MAX_NODES}]")
    t_points, t_weights = _nodes_for(kernel.E, m_t)
    x_points, x_weights = _nodes_for(kernel.D, m_x)
    if t_weights.size < n or x_weights.size < n:
        raise ValidationError("node sets smaller than the kernel rank")
    Phi_h = np.vstack([np.broadcast_to(
        np.asarray(evaluate(h, t_points), dtype=float), t_weights.shape)
        for h in kernel.hs])
    Phi_g = np.vstack([np.broadcast_to(
        np.asarray(evaluate(g, x_points), dtype=float), x_weights.shape)
        for g in kernel.gs])
    K = Phi_g.T @ Phi_h
    M = np.sqrt(x_weights)[:, None] * K * np.sqrt(t_weights)[None, :]
    return DiscreteOperator(M=M, t_points=t_points, t_weights=t_weights,
                            x_points=x_points, x_weights=x_weights,
                            D=kernel.D, E=kernel.E)


@dataclass(eq=False)
class OracleSolution:
    values: np.ndarray   # solution samples at the t-nodes
    t_points: dict
    norm: float
    rank: int
    singular_values: np.ndarray


def oracle_min_norm(dop: DiscreteOperator, f: FuncExpr,
                    cutoff: float = SV_CUTOFF) -> OracleSolution:
    """Pseudo-inverse solve of the discretized equation.

    Singular values below cutoff * sigma_max are treated as zero; a separable
    rank-n kernel has exactly n significant singular values and the rest is
    quadrature noise.
    """
    fx = np.broadcast_to(np.asarray(evaluate(f, dop.x_points), dtype=float),
                         dop.x_weights.shape)
    rhs = np.sqrt(dop.x_weights) * fx
    U, s, Vt = np.linalg.svd(dop.M, full_matrices=False)
    keep = s > (cutoff * s[0] if s.size and s[0] > 0 else np.inf)
    coef = Vt[keep].T @ ((U[:, keep].T @ rhs) / s[keep])
    values = coef / np.sqrt(dop.t_weights)
    return OracleSolution(values=values, t_points=dop.t_points,
                          norm=float(np.linalg.norm(coef)),
                          rank=int(np.sum(keep)), singular_values=s)


@dataclass(frozen=True)
class CompareReport:
    max_dev: float
    norm_dev: float
    oracle_norm: float
    closed_norm: float
    rank: int


def compare(closed: MinNormSolution, oracle_out: OracleSolution) -> CompareReport:
    """Pointwise and norm deviation of the closed form from the oracle."""
    if set(oracle_out.t_points) != set(closed.kernel.E.names):
        raise ValidationError(
            "oracle and closed-form solution live on different domains")
    closed_vals = np.asarray(closed(oracle_out.t_points), dtype=float)
    dev = float(np.max(np.abs(closed_vals - oracle_out.values)))
    return CompareReport(max_dev=dev,
                         norm_dev=abs(closed.norm - oracle_out.norm),
                         oracle_norm=oracle_out.norm,
                         closed_norm=closed.norm,
                         rank=oracle_out.rank)
