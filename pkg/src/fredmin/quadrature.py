"""Gauss-Legendre quadrature on intervals and tensor-product boxes.

Every inner product in the library flows through this module. One rule is
shared per solve and recorded in the report so results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .expr import Domain, FuncExpr, evaluate

MAX_ORDER = 256


@dataclass(frozen=True)
class QuadratureRule:
    """Reference nodes/weights on [-1, 1] plus a composite panel count.

    An order-n rule integrates polynomials up to degree 2n-1 exactly; the
    weights sum to 2. Rules are immutable and safe to share.
    """

    nodes: tuple[float, ...]
    weights: tuple[float, ...]
    order: int
    panels: int = 1

    def with_panels(self, panels):
        return QuadratureRule(self.nodes, self.weights, self.order, panels)


def gauss_legendre(order: int, panels: int = 1) -> QuadratureRule:
    """Gauss-Legendre rule of the given order.

    Nodes are the roots of the Legendre polynomial P_n, found by Newton
    iteration from the Chebyshev-style initial guess; weights follow from the
    derivative. Deterministic: same inputs, bit-identical outputs.
    """
    if not 1 <= order <= MAX_ORDER:
        raise ValidationError(f"quadrature order must be in [1, {MAX_ORDER}]")
    if panels < 1:
        raise ValidationError("panel count must be >= 1")
    n = order
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        p_prev = np.zeros_like(x)
        p = np.ones_like(x)
        for m in range(1, n + 1):
            p_prev, p = p, ((2 * m - 1) * x * p - (m - 1) * p_prev) / m
        dp = n * (x * p - p_prev) / (x * x - 1.0) if n > 1 else np.ones_like(x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    # final recurrence pass for the converged derivative
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    for m in range(1, n + 1):
        p_prev, p = p, ((2 * m - 1) * x * p - (m - 1) * p_prev) / m
    if n > 1:
        dp = n * (x * p - p_prev) / (x * x - 1.0)
        w = 2.0 / ((1.0 - x * x) * dp * dp)
    else:
        x = np.array([0.0])
        w = np.array([2.0])
    # enforce symmetry so paired nodes are exact negatives
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    idx = np.argsort(x)
    return QuadratureRule(tuple(x[idx]), tuple(w[idx]), order, panels)


def axis_nodes(lo: float, hi: float, rule: QuadratureRule):
    """Composite nodes/weights on [lo, hi]: `panels` equal panels of the rule."""
    ref_x = np.asarray(rule.nodes)
    ref_w = np.asarray(rule.weights)
    edges = np.linspace(lo, hi, rule.panels + 1)
    half = 0.5 * (hi - lo) / rule.panels
    nodes = np.concatenate(
        [0.5 * (edges[i] + edges[i + 1]) + half * ref_x for i in range(rule.panels)])
    weights = np.tile(ref_w * half, rule.panels)
    return nodes, weights


def tensor_nodes(dom: Domain, rule: QuadratureRule):
    """Tensor-product node set over all axes of `dom`.

    Returns (points, weights): a named map of flat coordinate arrays and the
    matching flat weight array. The flattening order is fixed (first axis
    slowest) so reductions are deterministic.
    """
    per_axis = [axis_nodes(lo, hi, rule) for _, lo, hi in dom.axes]
    mesh = np.meshgrid(*[n for n, _ in per_axis], indexing="ij")
    points = {name: m.ravel() for name, m in zip(dom.names, mesh)}
    wmesh = np.meshgrid(*[w for _, w in per_axis], indexing="ij")
    weights = np.ones_like(wmesh[0])
    for w in wmesh:
        weights = weights * w
    return points, weights.ravel()


def integrate(f: FuncExpr, dom: Domain, rule: QuadratureRule) -> float:
    """Composite tensor-product integral of f over dom."""
    _check_vars(f, dom)
    points, weights = tensor_nodes(dom, rule)
    values = evaluate(f, points)
    return float(np.dot(weights, values))


def inner_product(f: FuncExpr, g: FuncExpr, dom: Domain,
                  rule: QuadratureRule) -> float:
    """L2 inner product <f, g> over dom."""
    _check_vars(f, dom)
    _check_vars(g, dom)
    points, weights = tensor_nodes(dom, rule)
    return float(np.dot(weights, evaluate(f, points) * evaluate(g, points)))


def norm_l2(f: FuncExpr, dom: Domain, rule: QuadratureRule) -> float:
    return float(np.sqrt(max(inner_product(f, f, dom, rule), 0.0)))


def _check_vars(f, dom):
    extra = set(f.vars) - set(dom.names)
    if extra:
        raise ValidationError(
            f"expression variables {sorted(extra)} not in domain axes "
            f"{list(dom.names)}")


DEFAULT_ORDER = 32
DEFAULT_PANELS = 4


def default_rule() -> QuadratureRule:
    """Order 32, 4 panels per axis: machine precision for the entire, trig and
    polynomial integrands this library targets."""
    return gauss_legendre(DEFAULT_ORDER, DEFAULT_PANELS)
