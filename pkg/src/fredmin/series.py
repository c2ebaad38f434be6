"""Series (non-degenerate) kernels, solved by truncation to a separable prefix.

A series kernel supplies its terms and rhs coefficients by index. Truncation
keeps the shortest prefix whose next term is negligible, then the separable
machinery takes over; the report carries the prefix length and the tail
estimate as a bound on the truncation bias. Nothing is claimed about the
untruncated limit.

Per-term scalar factors (the e^{-i^2 s} of the backward heat kernel, say) are
folded into the g-side, never into the h-side: the answer lives in the span
of the h-family, which must stay the raw basis for the h-Gram matrix to be
the natural one. The solution itself does not depend on that bookkeeping
choice, and the tests pin that down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import TruncationError, ValidationError
from .expr import Domain, FuncExpr, evaluate, parse_expr, substitute
from .quadrature import QuadratureRule, tensor_nodes
from .gram import SeparableKernel, assemble
from .solver import MinNormSolution, solve_min_norm

BHCP_FLOOR_REL = 1e-12


@dataclass(eq=False)
class SeriesKernel:
    """k(x, t) = sum_i g_i(x) h_i(t), i = 1, 2, ... with f = sum_i c_i g_i(x).

    `term(i)` returns (g_i, h_i) for a 1-based index; `rhs_coeff(i)` the
    coefficient c_i. `decay_hint(i)`, when present, bounds the magnitude
    ||g_i|| * ||h_i|| of the i-th kernel term and gates adaptive truncation.
    """

    term: Callable[[int], tuple[FuncExpr, FuncExpr]]
    rhs_coeff: Callable[[int], float]
    D: Domain
    E: Domain
    decay_hint: Optional[Callable[[int], float]] = None


@dataclass(frozen=True)
class TruncationPolicy:
    max_terms: int = 50
    tail_tol: float = 1e-12
    mode: str = "adaptive"  # or "fixed"

    def __post_init__(self):
        if self.max_terms < 1:
            raise ValidationError("max_terms must be >= 1")
        if not self.tail_tol > 0:
            raise ValidationError("tail_tol must be positive")
        if self.mode not in ("adaptive", "fixed"):
            raise ValidationError(f"unknown truncation mode {self.mode!r}")


@dataclass(eq=False)
class TruncationResult:
    kernel: SeparableKernel
    coeffs: np.ndarray
    n_terms: int
    tail_estimate: float


def _term_norms(g, h, sk, rule):
    pts_D, w_D = tensor_nodes(sk.D, rule)
    pts_E, w_E = tensor_nodes(sk.E, rule)
    gv = np.broadcast_to(np.asarray(evaluate(g, pts_D), dtype=float),
                         w_D.shape)
    hv = np.broadcast_to(np.asarray(evaluate(h, pts_E), dtype=float),
                         w_E.shape)
    gn = math.sqrt(max(float(np.dot(w_D, gv * gv)), 0.0))
    hn = math.sqrt(max(float(np.dot(w_E, hv * hv)), 0.0))
    return gn, hn


def truncate(sk: SeriesKernel, policy: TruncationPolicy,
             rule: QuadratureRule) -> TruncationResult:
    """Reduce the series to a separable prefix.

    Adaptive mode keeps the smallest N for which the (N+1)-th rhs term has
    |c| * ||g|| * ||h|| below the tail tolerance; when a decay hint is
    available the kernel tail itself must pass the same bar, which protects
    against an rhs that merely happens to be sparse. Fixed mode keeps exactly
    `max_terms` terms.
    """
    terms = {}

    def get_term(i):
        if i not in terms:
            terms[i] = sk.term(i)
        return terms[i]

    if policy.mode == "fixed":
        n = policy.max_terms
        try:
            tail = _tail(sk, get_term, n + 1, rule)
        except Exception:
            tail = math.nan  # term past the fixed cut may not be evaluable
    else:
        n = None
        tail = math.inf
        for i in range(2, policy.max_terms + 1):
            if sk.decay_hint is not None:
                hint = float(sk.decay_hint(i))
                if not hint < policy.tail_tol:
                    tail = hint
                    continue
            tail = _tail(sk, get_term, i, rule)
            if tail < policy.tail_tol:
                n = i - 1
                break
        if n is None:
            raise TruncationError(
                f"tail tolerance {policy.tail_tol:.1e} not met within "
                f"{policy.max_terms} terms (last tail estimate {tail:.3e})",
                last_tail=tail)

    gs, hs = zip(*(get_term(i) for i in range(1, n + 1)))
    coeffs = np.array([float(sk.rhs_coeff(i)) for i in range(1, n + 1)])
    kernel = SeparableKernel(gs=tuple(gs), hs=tuple(hs), D=sk.D, E=sk.E)
    return TruncationResult(kernel=kernel, coeffs=coeffs, n_terms=n,
                            tail_estimate=float(tail))


def _tail(sk, get_term, i, rule):
    g, h = get_term(i)
    gn, hn = _term_norms(g, h, sk, rule)
    c = float(sk.rhs_coeff(i))
    return abs(c) * gn * hn


def solve_series(sk: SeriesKernel, policy: TruncationPolicy,
                 rule: QuadratureRule,
                 cond_threshold: float = 1e12):
    """Truncate and solve; returns (solution, truncation result)."""
    trunc = truncate(sk, policy, rule)
    gram = assemble(trunc.kernel, None, rule, cond_threshold=cond_threshold)
    sol = solve_min_norm(trunc.coeffs, trunc.kernel, gram)
    sol = replace(sol, path="series")
    return sol, trunc


# ---------------------------------------------------------------------------
# Built-in backward heat conduction kernel

_BHCP_G = "(2/pi)*exp(-(i^2)*s)*sin(i*x)"
_BHCP_H = "sin(i*t)"


def bhcp_kernel(s: float, rhs_coeffs: Sequence[float] | None = None
                ) -> SeriesKernel:
    """Backward heat conduction on [0, pi]: recover the initial temperature
    from the temperature profile at time s > 0.

    Separation of variables gives the series kernel with terms
    g_i(x) = (2/pi) e^{-i^2 s} sin(ix), h_i(t) = sin(it); the exponential
    factor sits on the g-side. `rhs_coeffs` are coefficients against the
    g-family (f = sum c_i g_i); build them from a function with
    bhcp_rhs_coeffs.
    """
    if not s > 0:
        raise ValidationError("diffusion time s must be positive")
    D = Domain.make(("x", 0.0, math.pi))
    E = Domain.make(("t", 0.0, math.pi))
    g_tmpl = parse_expr(_BHCP_G, ("i", "s", "x"))
    h_tmpl = parse_expr(_BHCP_H, ("i", "t"))
    coeffs = [float(c) for c in rhs_coeffs] if rhs_coeffs is not None else []

    def term(i):
        return (substitute(g_tmpl, {"i": float(i), "s": float(s)}),
                substitute(h_tmpl, {"i": float(i)}))

    def rhs_coeff(i):
        return coeffs[i - 1] if i - 1 < len(coeffs) else 0.0

    def decay_hint(i):
        # ||g_i|| * ||h_i|| = (2/pi) e^{-i^2 s} * (pi/2) = e^{-i^2 s}
        return math.exp(-float(i) * float(i) * s)

    return SeriesKernel(term=term, rhs_coeff=rhs_coeff, D=D, E=E,
                        decay_hint=decay_hint)


def bhcp_rhs_coeffs(f: FuncExpr, s: float, rule: QuadratureRule,
                    max_terms: int,
                    floor_rel: float = BHCP_FLOOR_REL) -> list[float]:
    """Convert a temperature profile f(x) at time s into g-family coefficients.

    The sine coefficients a_i = (2/pi) <f, sin(ix)> are computed by
    quadrature, then amplified: c_i = a_i (pi/2) e^{i^2 s}. The amplification
    is the ill-posedness of the problem in the flesh, so coefficients below
    `floor_rel` of the largest are zeroed first; otherwise integration
    round-off at the 1e-16 level would be blown up by e^{i^2 s} into visible
    garbage modes.
    """
    if not s > 0:
        raise ValidationError("diffusion time s must be positive")
    D = Domain.make(("x", 0.0, math.pi))
    pts, w = tensor_nodes(D, rule)
    fv = np.broadcast_to(np.asarray(evaluate(f, pts), dtype=float), w.shape)
    x = pts["x"]
    a = np.array([(2.0 / math.pi) * float(np.dot(w, fv * np.sin(i * x)))
                  for i in range(1, max_terms + 1)])
    floor = floor_rel * float(np.max(np.abs(a))) if a.size else 0.0
    coeffs = []
    for i, ai in enumerate(a, start=1):
        if abs(ai) <= floor:
            coeffs.append(0.0)
            continue
        try:
            amp = math.exp(float(i * i) * s)
        except OverflowError:
            raise ValidationError(
                f"rhs needs sine mode {i}, whose amplification e^(i^2 s) "
                "overflows double precision") from None
        coeffs.append(float(ai) * (math.pi / 2.0) * amp)
    return coeffs
