"""Mini expression language for kernel factors, right-hand sides and null-space
candidates.

Grammar (the contract for problem files, also reproduced in the README):

    expr    := term { ("+" | "-") term }
    term    := unary { ("*" | "/") unary }
    unary   := ("+" | "-") unary | power
    power   := atom [ "^" unary ]            (right-associative)
    atom    := NUMBER | CONSTANT | VARIABLE
             | FUNCTION "(" expr ")"
             | "(" expr ")"

    FUNCTION := "sin" | "cos" | "exp" | "ln" | "sqrt" | "abs"
    CONSTANT := "pi" | "e"
    NUMBER   := decimal literal with optional fraction and exponent
                ("2", "0.5", ".5", "1e-3", "2.5E2")

Precedence, loosest to tightest: "+,-" < "*,/" < unary minus < "^".
So ``-x^2`` is ``-(x^2)`` and ``2^3^2`` is ``2^(3^2)``.

Expressions are immutable after parsing and evaluation is pure, so a parsed
tree can be shared freely across threads. Evaluation accepts scalars or numpy
arrays for the variable bindings and is vectorized over arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import (
    DomainValidationError,
    EvalDomainError,
    ExprSyntaxError,
    UnknownIdentifierError,
    ValidationError,
)

FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt", "abs")
CONSTANTS = {"pi": math.pi, "e": math.e}
RESERVED = set(FUNCTIONS) | set(CONSTANTS)


# ---------------------------------------------------------------------------
# AST nodes

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or a FUNCTION name
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    lhs: "Node"
    rhs: "Node"


Node = Union[Const, Var, Unary, Binary]


@dataclass(frozen=True)
class FuncExpr:
    """A parsed expression over an ordered set of allowed variable names.

    Every variable that occurs in `ast` appears in `vars`; `vars` may contain
    names the expression does not use (a constant rhs on a 2D domain, say).
    """

    ast: Node
    vars: tuple[str, ...]

    def __call__(self, point):
        return evaluate(self, point)

    def __str__(self):
        return to_text(self)


# ---------------------------------------------------------------------------
# Tokenizer

_NUM_START = set("0123456789.")


def _tokenize(text):
    """Yield (kind, value, offset) triples. Offsets are byte offsets."""
    data = text.encode("utf-8").decode("utf-8")  # assert valid UTF-8 early
    tokens = []
    i, n = 0, len(data)
    while i < n:
        c = data[i]
        if c in " \t\r\n":
            i += 1
            continue
        if c in "+-*/^()":
            kind = {"(": "lparen", ")": "rparen"}.get(c, "op")
            tokens.append((kind, c, i))
            i += 1
            continue
        if c in _NUM_START:
            j = i
            while j < n and data[j].isdigit():
                j += 1
            if j < n and data[j] == ".":
                j += 1
                while j < n and data[j].isdigit():
                    j += 1
            if data[i:j] == ".":
                raise ExprSyntaxError("lone '.' is not a number", i)
            if j < n and data[j] in "eE":
                k = j + 1
                if k < n and data[k] in "+-":
                    k += 1
                if k < n and data[k].isdigit():
                    while k < n and data[k].isdigit():
                        k += 1
                    j = k  # exponent is part of the number
            try:
                value = float(data[i:j])
            except ValueError:
                raise ExprSyntaxError(f"bad number {data[i:j]!r}", i) from None
            tokens.append(("num", value, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (data[j].isalnum() or data[j] == "_"):
                j += 1
            tokens.append(("ident", data[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", i)
    tokens.append(("eof", "", n))
    return tokens


# ---------------------------------------------------------------------------
# Recursive-descent parser

class _Parser:
    def __init__(self, tokens, allowed_vars):
        self.tokens = tokens
        self.pos = 0
        self.allowed = tuple(allowed_vars)

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind, text=None):
        tok = self.advance()
        if tok[0] != kind or (text is not None and tok[1] != text):
            want = text or kind
            raise ExprSyntaxError(f"expected {want!r}, found {tok[1]!r}", tok[2])
        return tok

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in "+-":
            self.advance()
            arg = self.unary()
            return arg if tok[1] == "+" else Unary("neg", arg)
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.advance()
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        tok = self.advance()
        kind, value, offset = tok
        if kind == "num":
            return Const(value)
        if kind == "lparen":
            node = self.expr()
            self.expect("rparen")
            return node
        if kind == "ident":
            if value in FUNCTIONS:
                self.expect("lparen", "(")
                arg = self.expr()
                self.expect("rparen")
                return Unary(value, arg)
            if value in CONSTANTS:
                return Const(CONSTANTS[value])
            if value in self.allowed:
                return Var(value)
            raise UnknownIdentifierError(value, offset, self.allowed)
        raise ExprSyntaxError(f"unexpected {value!r}", offset)


def parse_expr(text, allowed_vars):
    """Parse `text` into a FuncExpr that may reference only `allowed_vars`."""
    if not allowed_vars:
        raise ValidationError("allowed_vars must be non-empty")
    parser = _Parser(_tokenize(text), allowed_vars)
    node = parser.expr()
    trailing = parser.peek()
    if trailing[0] != "eof":
        raise ExprSyntaxError(f"trailing input {trailing[1]!r}", trailing[2])
    return FuncExpr(node, tuple(allowed_vars))


# ---------------------------------------------------------------------------
# Evaluation

_UNARY_FN = {
    "neg": np.negative,
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "ln": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}


def _check_finite(value, node, what):
    if not np.all(np.isfinite(value)):
        raise EvalDomainError(what, _print(node))
    return value


def _eval(node, env):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Unary):
        arg = _eval(node.arg, env)
        out = _UNARY_FN[node.op](arg)
        return _check_finite(out, node, f"{node.op} left the real line")
    lhs = _eval(node.lhs, env)
    rhs = _eval(node.rhs, env)
    if node.op == "+":
        out = np.add(lhs, rhs)
    elif node.op == "-":
        out = np.subtract(lhs, rhs)
    elif node.op == "*":
        out = np.multiply(lhs, rhs)
    elif node.op == "/":
        out = np.divide(lhs, rhs)
    else:
        out = np.power(lhs, rhs)
    return _check_finite(out, node, f"'{node.op}' produced a non-finite value")


def evaluate(f: FuncExpr, point: Mapping[str, object]):
    """Evaluate `f` at `point`, a mapping variable name -> float or ndarray.

    Points are always named maps, never positional tuples; this is what keeps
    axis ordering unambiguous on multi-dimensional domains. Returns a float
    for scalar bindings, an ndarray when any binding is an array.
    """
    env = {}
    scalar = True
    for name in f.vars:
        if name not in point:
            raise ValidationError(f"point does not bind variable {name!r}")
        value = np.asarray(point[name], dtype=float)
        if value.ndim > 0:
            scalar = False
        env[name] = value
    with np.errstate(all="ignore"):
        out = _eval(f.ast, env)
    out = np.asarray(out, dtype=float)
    if scalar:
        return float(out)
    if out.ndim == 0:
        # constant expression against array bindings: match the binding shape
        shape = np.broadcast_shapes(*(v.shape for v in env.values()))
        return np.full(shape, float(out))
    return out


def rename_vars(f: FuncExpr, mapping: Mapping[str, str]) -> FuncExpr:
    """Rename variables (carry a function from one named space to another)."""

    def walk(node):
        if isinstance(node, Var):
            return Var(mapping.get(node.name, node.name))
        if isinstance(node, Unary):
            return Unary(node.op, walk(node.arg))
        if isinstance(node, Binary):
            return Binary(node.op, walk(node.lhs), walk(node.rhs))
        return node

    return FuncExpr(walk(f.ast),
                    tuple(mapping.get(v, v) for v in f.vars))


def substitute(f: FuncExpr, bindings: Mapping[str, float]) -> FuncExpr:
    """Replace variables with numeric constants, producing a narrower FuncExpr.

    Used to instantiate indexed series templates (bind the index variable)
    and built-in kernels (bind parameters like the diffusion time).
    """

    def walk(node):
        if isinstance(node, Var) and node.name in bindings:
            return Const(float(bindings[node.name]))
        if isinstance(node, Unary):
            return Unary(node.op, walk(node.arg))
        if isinstance(node, Binary):
            return Binary(node.op, walk(node.lhs), walk(node.rhs))
        return node

    remaining = tuple(v for v in f.vars if v not in bindings)
    return FuncExpr(walk(f.ast), remaining)


# ---------------------------------------------------------------------------
# Pretty-printing

# Parenthesization levels; higher binds tighter.
_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5
_BIN_PREC = {"+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL, "/": _PREC_MUL,
             "^": _PREC_POW}


def _prec(node):
    if isinstance(node, Const):
        return _PREC_NEG if node.value < 0 else _PREC_ATOM
    if isinstance(node, Var):
        return _PREC_ATOM
    if isinstance(node, Unary):
        return _PREC_NEG if node.op == "neg" else _PREC_ATOM
    return _BIN_PREC[node.op]


def _fmt_const(value):
    if value == math.pi:
        return "pi"
    if value == math.e:
        return "e"
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _print(node):
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            inner = _print(node.arg)
            if _prec(node.arg) < _PREC_POW:
                inner = f"({inner})"
            return f"-{inner}"
        return f"{node.op}({_print(node.arg)})"
    lhs, rhs = _print(node.lhs), _print(node.rhs)
    prec = _BIN_PREC[node.op]
    # Right operands of -, /, and same-precedence chains are parenthesized so
    # the reparsed tree is structurally identical (not merely equal in value).
    if node.op == "^":
        if _prec(node.lhs) <= prec:
            lhs = f"({lhs})"
        if _prec(node.rhs) < prec:
            rhs = f"({rhs})"
    else:
        if _prec(node.lhs) < prec:
            lhs = f"({lhs})"
        if _prec(node.rhs) <= prec:
            rhs = f"({rhs})"
    return f"{lhs} {node.op} {rhs}" if node.op in "+-" else f"{lhs}{node.op}{rhs}"


def to_text(f: FuncExpr) -> str:
    """Render an expression so that parsing the result rebuilds the same tree."""
    return _print(f.ast)


# ---------------------------------------------------------------------------
# Programmatic constructors

def constant(value: float, vars: Sequence[str]) -> FuncExpr:
    return FuncExpr(Const(float(value)), tuple(vars))


def linear_combination(coeffs, exprs, base: FuncExpr | None = None) -> FuncExpr:
    """Build base + sum(c_i * e_i) as a flat expression tree.

    All expressions must share one variable tuple. Used for null-space
    projections and orthonormal combinations, where nesting trees would make
    evaluation cost quadratic.
    """
    exprs = list(exprs)
    if base is None and not exprs:
        raise ValidationError("empty linear combination")
    vars_ = base.vars if base is not None else exprs[0].vars
    for e in exprs:
        if e.vars != vars_:
            raise ValidationError("mixed variable sets in linear combination")
    node = base.ast if base is not None else None
    for c, e in zip(coeffs, exprs):
        term = Binary("*", Const(float(c)), e.ast)
        node = term if node is None else Binary("+", node, term)
    return FuncExpr(node, vars_)


def polynomial(coeffs, var: str, vars: Sequence[str] | None = None) -> FuncExpr:
    """sum(coeffs[k] * var**k) as an expression tree."""
    vars_ = tuple(vars) if vars is not None else (var,)
    node = Const(float(coeffs[0]))
    for k, c in enumerate(coeffs[1:], start=1):
        power = Var(var) if k == 1 else Binary("^", Var(var), Const(float(k)))
        node = Binary("+", node, Binary("*", Const(float(c)), power))
    return FuncExpr(node, vars_)


def product(f: FuncExpr, g: FuncExpr) -> FuncExpr:
    if f.vars != g.vars:
        raise ValidationError("mixed variable sets in product")
    return FuncExpr(Binary("*", f.ast, g.ast), f.vars)


# ---------------------------------------------------------------------------
# Domains

@dataclass(frozen=True)
class Domain:
    """A box: one to three named axes with finite bounds."""

    axes: tuple[tuple[str, float, float], ...]

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 3:
            raise DomainValidationError(
                f"domains must have 1 to 3 axes, got {len(self.axes)}")
        seen = set()
        for name, lo, hi in self.axes:
            if not name.isidentifier() or name in RESERVED:
                raise DomainValidationError(f"bad axis name {name!r}")
            if name in seen:
                raise DomainValidationError(f"duplicate axis {name!r}")
            seen.add(name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise DomainValidationError(
                    f"axis {name!r} needs finite bounds with lo < hi, "
                    f"got [{lo}, {hi}]")

    @staticmethod
    def make(*axes):
        """Domain.make(("x", 0, 1), ("y", 0, 2))"""
        return Domain(tuple((str(n), float(lo), float(hi)) for n, lo, hi in axes))

    @property
    def names(self):
        return tuple(a[0] for a in self.axes)

    @property
    def dim(self):
        return len(self.axes)

    def grid(self, per_axis: int):
        """Uniform tensor grid, endpoints included, as a named map of flat arrays."""
        if per_axis < 2:
            raise ValidationError("need at least 2 samples per axis")
        axes_1d = [np.linspace(lo, hi, per_axis) for _, lo, hi in self.axes]
        mesh = np.meshgrid(*axes_1d, indexing="ij")
        return {name: m.ravel() for name, m in zip(self.names, mesh)}


def rebind_points(points: Mapping[str, object], src: Domain, dst: Domain):
    """Rename a point map from dst's axes to src's axes, positionally.

    Needed when a function family declared on one domain is evaluated on the
    other (the cross Gram matrix, or the legacy g-basis solution sampled on
    the t-space); valid only when the two domains have equal dimension.
    """
    if src.dim != dst.dim:
        raise ValidationError(
            "domains do not coincide as variable spaces "
            f"(dims {src.dim} and {dst.dim})")
    return {s: points[d] for s, d in zip(src.names, dst.names)}
