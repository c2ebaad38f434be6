"""Problem-file parsing: a line-based INI-style format.

    # comment
    [domain]
    x = x 0 1              # x-space axes: "name lo hi", ';'-separated
    t = t 0 1              # t-space axes

    [kernel]               # exactly one kernel form:
    g = 1; exp(x)          #   separable: matching g/h factor lists
    h = 1; t
    # builtin = bhcp       #   built-in series kernel (omit [domain])
    # s = 1
    # g_term = ...         #   generic series: templates over the index
    # h_term = ...
    # index = i
    # decay_hint = ...     #   optional magnitude bound, expression in index

    [rhs]
    f = (1/3)*exp(x) + 1/2 # or: coeffs = 1/2; 1/3

    [options]              # all optional, see OPTION_SPEC
    path = theorem1

Bounds and coefficient lists accept constant expressions ("pi", "-pi/2").
Lists use ';' separators. Values never contain '='.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import FredminError, ProblemFormatError
from .expr import Domain, FuncExpr, evaluate, parse_expr, to_text

SECTIONS = ("domain", "kernel", "rhs", "options")

# name -> (type tag, default); None default means "auto"
OPTION_SPEC = {
    "quad_order": ("int", 32),
    "panels": ("int", 4),
    "path": ("choice:auto,corollary1,theorem1", "auto"),
    "compare_legacy": ("bool", False),
    "oracle_m": ("int", 0),
    "samples": ("int", 101),
    "residual_samples": ("int", 0),
    "in_range_tol": ("float", 1e-8),
    "cond_threshold": ("float", 1e12),
    "tail_tol": ("float", 1e-12),
    "max_terms": ("int", 50),
    "truncation": ("choice:adaptive,fixed", "adaptive"),
    "null_degree": ("int", 4),
    "structure_coeffs": ("floats", ()),
    "seed": ("int", 0),
}


@dataclass(frozen=True)
class SeparableSpec:
    g_texts: tuple[str, ...]
    h_texts: tuple[str, ...]


@dataclass(frozen=True)
class BuiltinSpec:
    name: str
    s: float


@dataclass(frozen=True)
class SeriesSpec:
    g_term: str
    h_term: str
    index: str
    decay_hint: str | None


@dataclass(eq=False)
class Problem:
    D: Optional[Domain]
    E: Optional[Domain]
    kernel: SeparableSpec | BuiltinSpec | SeriesSpec
    rhs_func: str | None
    rhs_coeffs: tuple[float, ...] | None
    options: dict


def _const(text, where):
    """Constant expression: a bound or a coefficient."""
    try:
        return float(text)
    except ValueError:
        pass
    try:
        f = parse_expr(text, ("_",))
        if "_" in _used_vars(f):
            raise ProblemFormatError(f"{where}: {text!r} is not constant")
        return evaluate(f, {"_": 0.0})
    except ProblemFormatError:
        raise
    except FredminError as exc:
        raise ProblemFormatError(f"{where}: {exc}") from exc


def _used_vars(f: FuncExpr):
    from .expr import Binary, Unary, Var

    used = set()

    def walk(node):
        if isinstance(node, Var):
            used.add(node.name)
        elif isinstance(node, Unary):
            walk(node.arg)
        elif isinstance(node, Binary):
            walk(node.lhs)
            walk(node.rhs)

    walk(f.ast)
    return used


def _split_list(value):
    return [item.strip() for item in value.split(";") if item.strip()]


def _parse_axes(value, key):
    axes = []
    for item in _split_list(value):
        parts = item.split()
        if len(parts) != 3:
            raise ProblemFormatError(
                f"[domain] {key}: each axis is 'name lo hi', got {item!r}")
        name, lo, hi = parts
        axes.append((name, _const(lo, f"[domain] {key}"),
                     _const(hi, f"[domain] {key}")))
    if not axes:
        raise ProblemFormatError(f"[domain] {key}: no axes given")
    return Domain.make(*axes)


def _parse_bool(value, where):
    v = value.strip().lower()
    if v in ("true", "yes", "1"):
        return True
    if v in ("false", "no", "0"):
        return False
    raise ProblemFormatError(f"{where}: expected a boolean, got {value!r}")


def parse_option(key, value):
    if key not in OPTION_SPEC:
        raise ProblemFormatError(f"[options] unknown key {key!r}")
    kind, _default = OPTION_SPEC[key]
    where = f"[options] {key}"
    if kind == "int":
        try:
            return int(value.strip())
        except ValueError:
            raise ProblemFormatError(f"{where}: expected an integer, "
                                     f"got {value!r}") from None
    if kind == "float":
        return float(_const(value.strip(), where))
    if kind == "bool":
        return _parse_bool(value, where)
    if kind == "floats":
        return tuple(float(_const(v, where)) for v in _split_list(value))
    choices = kind.split(":", 1)[1].split(",")
    v = value.strip()
    if v not in choices:
        raise ProblemFormatError(f"{where}: expected one of {choices}, "
                                 f"got {value!r}")
    return v


def _read_sections(text):
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in SECTIONS:
                raise ProblemFormatError(
                    f"line {lineno}: unknown section [{name}]")
            if name in sections:
                raise ProblemFormatError(
                    f"line {lineno}: duplicate section [{name}]")
            current = sections.setdefault(name, {})
            continue
        if current is None:
            raise ProblemFormatError(
                f"line {lineno}: content before any [section]")
        if "=" not in line:
            raise ProblemFormatError(
                f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in current:
            raise ProblemFormatError(f"line {lineno}: duplicate key {key!r}")
        current[key] = value.strip()
    return sections


def parse_problem_text(text: str) -> Problem:
    sections = _read_sections(text)
    if "kernel" not in sections:
        raise ProblemFormatError("missing [kernel] section")
    if "rhs" not in sections:
        raise ProblemFormatError("missing [rhs] section")

    kern = dict(sections["kernel"])
    if "builtin" in kern:
        name = kern.pop("builtin")
        if name != "bhcp":
            raise ProblemFormatError(f"unknown builtin kernel {name!r}")
        s = float(_const(kern.pop("s", "1"), "[kernel] s"))
        _reject_extras(kern, "kernel")
        if "domain" in sections:
            raise ProblemFormatError(
                "builtin kernels fix their domains; omit [domain]")
        kernel = BuiltinSpec(name=name, s=s)
        D = E = None
    else:
        if "domain" not in sections:
            raise ProblemFormatError("missing [domain] section")
        dom = dict(sections["domain"])
        if "x" not in dom or "t" not in dom:
            raise ProblemFormatError(
                "[domain] needs both 'x' (x-space) and 't' (t-space) axes")
        D = _parse_axes(dom.pop("x"), "x")
        E = _parse_axes(dom.pop("t"), "t")
        _reject_extras(dom, "domain")
        if "g_term" in kern or "h_term" in kern:
            for need in ("g_term", "h_term", "index"):
                if need not in kern:
                    raise ProblemFormatError(f"series kernel needs {need!r}")
            kernel = SeriesSpec(g_term=kern.pop("g_term"),
                                h_term=kern.pop("h_term"),
                                index=kern.pop("index"),
                                decay_hint=kern.pop("decay_hint", None))
            _reject_extras(kern, "kernel")
        else:
            if "g" not in kern or "h" not in kern:
                raise ProblemFormatError(
                    "[kernel] needs 'g' and 'h' factor lists (or 'builtin', "
                    "or 'g_term'/'h_term'/'index')")
            g_texts = tuple(_split_list(kern.pop("g")))
            h_texts = tuple(_split_list(kern.pop("h")))
            _reject_extras(kern, "kernel")
            if len(g_texts) != len(h_texts) or not g_texts:
                raise ProblemFormatError(
                    f"kernel factor counts differ: {len(g_texts)} g's, "
                    f"{len(h_texts)} h's")
            kernel = SeparableSpec(g_texts=g_texts, h_texts=h_texts)

    rhs = dict(sections["rhs"])
    rhs_func = rhs.pop("f", None)
    rhs_coeffs = None
    if "coeffs" in rhs:
        rhs_coeffs = tuple(float(_const(v, "[rhs] coeffs"))
                           for v in _split_list(rhs.pop("coeffs")))
    _reject_extras(rhs, "rhs")
    if (rhs_func is None) == (rhs_coeffs is None):
        raise ProblemFormatError(
            "[rhs] needs exactly one of 'f' or 'coeffs'")

    options = {}
    for key, value in sections.get("options", {}).items():
        options[key] = parse_option(key, value)

    return Problem(D=D, E=E, kernel=kernel, rhs_func=rhs_func,
                   rhs_coeffs=rhs_coeffs, options=options)


def _reject_extras(mapping, section):
    if mapping:
        raise ProblemFormatError(
            f"[{section}] unknown keys: {sorted(mapping)}")


def parse_problem_file(path) -> Problem:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_problem_text(handle.read())


# ---------------------------------------------------------------------------
# Echo round-trip: a JSON report's problem echo converts back to a file

def echo_to_text(echo: dict) -> str:
    """Render a report's problem echo back into problem-file text."""
    lines = []
    dom = echo.get("domain")
    if dom:
        lines.append("[domain]")
        for key in ("x", "t"):
            axes = "; ".join(f"{n} {lo!r} {hi!r}" for n, lo, hi in dom[key])
            lines.append(f"{key} = {axes}")
    lines.append("[kernel]")
    kern = echo["kernel"]
    if "builtin" in kern:
        lines.append(f"builtin = {kern['builtin']}")
        lines.append(f"s = {kern['s']!r}")
    elif "g_term" in kern:
        lines.append(f"g_term = {kern['g_term']}")
        lines.append(f"h_term = {kern['h_term']}")
        lines.append(f"index = {kern['index']}")
        if kern.get("decay_hint"):
            lines.append(f"decay_hint = {kern['decay_hint']}")
    else:
        lines.append("g = " + "; ".join(kern["g"]))
        lines.append("h = " + "; ".join(kern["h"]))
    lines.append("[rhs]")
    rhs = echo["rhs"]
    if rhs.get("f") is not None:
        lines.append(f"f = {rhs['f']}")
    else:
        lines.append("coeffs = " + "; ".join(repr(c) for c in rhs["coeffs"]))
    lines.append("[options]")
    for key, value in echo["options"].items():
        if key == "structure_coeffs":
            if value:
                lines.append(f"{key} = " + "; ".join(repr(c) for c in value))
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
