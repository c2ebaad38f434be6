"""Shared fixtures: the worked examples as assembled problem bundles."""

import math
import pathlib
from dataclasses import dataclass

import pytest

import fredmin as fm

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


@dataclass(eq=False)
class Bundle:
    kernel: fm.SeparableKernel
    f: fm.FuncExpr
    gram: fm.GramSet


def _bundle(g_texts, h_texts, f_text, d_axes, e_axes, rule, cross=True):
    D = fm.Domain.make(*d_axes)
    E = fm.Domain.make(*e_axes)
    gs = tuple(fm.parse_expr(t, D.names) for t in g_texts)
    hs = tuple(fm.parse_expr(t, E.names) for t in h_texts)
    kernel = fm.SeparableKernel(gs, hs, D, E)
    f = fm.parse_expr(f_text, D.names)
    gram = fm.assemble(kernel, f, rule, cross=cross)
    return Bundle(kernel=kernel, f=f, gram=gram)


@pytest.fixture(scope="session")
def rule():
    return fm.default_rule()


@pytest.fixture(scope="session")
def ex1(rule):
    return _bundle(("1", "exp(x)"), ("1", "t"), "(1/3)*exp(x) + 1/2",
                   [("x", 0, 1)], [("t", 0, 1)], rule)


@pytest.fixture(scope="session")
def ex2(rule):
    return _bundle(("cos(x)",), ("sin(t)",), "(pi/2)*cos(x)",
                   [("x", 0, math.pi)], [("t", 0, math.pi)], rule)


@pytest.fixture(scope="session")
def ex3(rule):
    return _bundle(("5*x", "5*x^2"), ("t", "t^2"), "x + 6*x^2",
                   [("x", 0, 1)], [("t", 0, 1)], rule)


@pytest.fixture(scope="session")
def ex4(rule):
    return _bundle(("1", "sin(x)"), ("1", "cos(t)"), "sin(x)",
                   [("x", -math.pi / 2, math.pi / 2)],
                   [("t", -math.pi / 2, math.pi / 2)], rule)


@pytest.fixture(scope="session")
def ex5(rule):
    return _bundle(("exp(tau^2 + eta^2 - 2)",), ("exp(s + t)",),
                   "(1/4)*(e^(-2) - 1)^2*exp(tau^2 + eta^2)",
                   [("tau", 0, 1), ("eta", 0, 1)],
                   [("s", 0, 1), ("t", 0, 1)], rule, cross=False)
