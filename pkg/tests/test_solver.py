import math

import numpy as np
import pytest

import fredmin as fm
from fredmin.errors import SingularMatrixError, ValidationError
from fredmin.expr import linear_combination, rename_vars
from fredmin.quadrature import tensor_nodes
from fredmin.solver import LegacySolution, NullComponent, RhsSpec


def l2_norm_sq(values_fn, domain, rule):
    pts, w = tensor_nodes(domain, rule)
    vals = np.asarray(values_fn(pts), dtype=float)
    return float(np.dot(w, vals * vals))


def inner(fn_a, fn_b, domain, rule):
    pts, w = tensor_nodes(domain, rule)
    return float(np.dot(w, np.asarray(fn_a(pts)) * np.asarray(fn_b(pts))))


# --- rhs handling ----------------------------------------------------------

def test_rhs_spec_exactly_one_variant():
    with pytest.raises(ValidationError):
        RhsSpec(coeffs=None, func=None)
    with pytest.raises(ValidationError):
        RhsSpec(coeffs=(1.0,), func=fm.parse_expr("x", ("x",)))


def test_project_rhs_example2(ex2):
    C, resid = fm.project_rhs(ex2.f, ex2.gram)
    assert C == pytest.approx([math.pi / 2], rel=1e-13)
    assert resid <= 1e-12


def test_project_rhs_zero_function(ex2, rule):
    zero = fm.parse_expr("0", ("x",))
    gram = fm.assemble(ex2.kernel, zero, rule)
    C, resid = fm.project_rhs(zero, gram)
    assert C == pytest.approx([0.0], abs=1e-16)
    assert resid == 0.0


def test_project_rhs_example5(ex5):
    C, resid = fm.project_rhs(ex5.f, ex5.gram)
    expected = math.e ** 2 / 4 * (math.exp(-2) - 1) ** 2
    assert C == pytest.approx([expected], rel=1e-13)
    assert resid <= 1e-12


# --- the minimal-norm solve ------------------------------------------------

def test_example1_coefficient_rhs(ex1):
    sol = fm.solve_min_norm(RhsSpec.from_coeffs([0.5, 1 / 3]),
                            ex1.kernel, ex1.gram)
    assert np.allclose(sol.beta, [0.0, 1.0], atol=1e-12)
    assert sol.norm == pytest.approx(math.sqrt(3) / 3, abs=1e-12)
    assert sol.in_range_residual == 0.0
    tg = np.linspace(0, 1, 50)
    assert np.allclose(sol(tg), tg, atol=1e-12)


def test_example4_coefficient_rhs(ex4):
    sol = fm.solve_min_norm(RhsSpec.from_coeffs([0.0, 1.0]),
                            ex4.kernel, ex4.gram)
    tg = np.linspace(-math.pi / 2, math.pi / 2, 200)
    expected = 2 / (math.pi ** 2 - 8) * (math.pi * np.cos(tg) - 2)
    assert np.max(np.abs(sol(tg) - expected)) <= 1e-12
    assert sol.norm_sq == pytest.approx(2 * math.pi / (math.pi ** 2 - 8),
                                        abs=1e-12)


def test_example5_two_dimensional(ex5):
    sol = fm.solve_min_norm(RhsSpec.from_func(ex5.f), ex5.kernel, ex5.gram)
    grid = ex5.kernel.E.grid(50)
    expected = np.exp(grid["s"] + grid["t"] - 2)
    assert np.max(np.abs(sol(grid) - expected)) <= 1e-12
    assert sol.norm == pytest.approx((1 - math.exp(-2)) / 2, abs=1e-13)


def test_norm_sq_two_expressions_agree(ex1, ex3):
    for bundle in (ex1, ex3):
        sol = fm.solve_min_norm(RhsSpec.from_func(bundle.f), bundle.kernel,
                                bundle.gram)
        via_h = float(sol.beta @ bundle.gram.H @ sol.beta)
        assert via_h == pytest.approx(sol.norm_sq, rel=1e-10)
        assert sol.norm_sq >= 0.0


def test_theorem1_example3(ex3):
    sol = fm.solve_theorem1(ex3.gram)
    assert sol.path == "theorem1"
    assert np.allclose(sol.C, [0.2, 1.2], atol=1e-12)
    assert np.allclose(sol.beta, [-312 / 5, 84.0], atol=1e-10)
    tg = np.linspace(0, 1, 100)
    assert np.max(np.abs(sol(tg) - (84 * tg ** 2 - 62.4 * tg))) <= 1e-9


def test_theorem1_matches_projection_path(ex3):
    # f = (A^{-1}F) . G(x) exactly, so the two routes must coincide
    t1 = fm.solve_theorem1(ex3.gram)
    c1 = fm.solve_min_norm(RhsSpec.from_func(ex3.f), ex3.kernel, ex3.gram)
    assert np.max(np.abs(t1.beta - c1.beta)) <= 1e-10


def test_theorem1_reports_singular_cross_matrix(ex4):
    with pytest.raises(SingularMatrixError):
        fm.solve_theorem1(ex4.gram)


def test_theorem1_needs_cross_matrices(ex5):
    with pytest.raises(ValidationError):
        fm.solve_theorem1(ex5.gram)


# --- the legacy route and its consistency check ----------------------------

def test_prop1_example3_equals_min_norm(ex3):
    legacy = fm.solve_prop1(ex3.gram)
    sol = fm.solve_theorem1(ex3.gram)
    tg = np.linspace(0, 1, 100)
    assert np.max(np.abs(legacy(tg) - sol(tg))) <= 1e-10


def test_prop1_example1_closed_form(ex1):
    legacy = fm.solve_prop1(ex1.gram)
    tg = np.linspace(0, 1, 100)
    expected = np.exp(tg) / (18 - 6 * math.e) + (5 - 2 * math.e) / (9 - 3 * math.e)
    assert np.max(np.abs(legacy(tg) - expected)) <= 1e-12
    sol = fm.solve_min_norm(RhsSpec.from_func(ex1.f), ex1.kernel, ex1.gram)
    assert legacy.norm > sol.norm == pytest.approx(math.sqrt(3) / 3, abs=1e-12)


def test_prop1_unit_rank_one_coincides(rule):
    # g = h with unit norm: the legacy and minimal-norm answers are the same
    D = fm.Domain.make(("x", 0, 1))
    E = fm.Domain.make(("t", 0, 1))
    k = fm.SeparableKernel((fm.parse_expr("sqrt(3)*x", ("x",)),),
                           (fm.parse_expr("sqrt(3)*t", ("t",)),), D, E)
    f = fm.parse_expr("2*sqrt(3)*x", ("x",))
    gram = fm.assemble(k, f, rule, cross=True)
    legacy = fm.solve_prop1(gram)
    sol = fm.solve_min_norm(RhsSpec.from_func(f), k, gram)
    tg = np.linspace(0, 1, 50)
    assert np.max(np.abs(legacy(tg) - sol(tg))) <= 1e-12


def test_corollary2_example3(ex3):
    rep = fm.check_corollary2(ex3.gram, 5 * np.eye(2))
    assert rep.consistent
    assert rep.max_dev <= 1e-8
    assert rep.k_residual <= 1e-12


def test_corollary2_rotation_family(rule):
    # G(x) = K H(x) with a rotation-like K; rhs chosen so C = A^{-1}F = [0, -3]
    D = fm.Domain.make(("x", 0, math.pi / 2))
    E = fm.Domain.make(("t", 0, math.pi / 2))
    gs = tuple(fm.parse_expr(s, ("x",)) for s in ("sin(x)", "cos(x)"))
    hs = tuple(fm.parse_expr(s, ("t",)) for s in ("cos(t)", "-sin(t)"))
    k = fm.SeparableKernel(gs, hs, D, E)
    f = fm.parse_expr("-3*cos(x)", ("x",))
    gram = fm.assemble(k, f, rule, cross=True)
    K = np.array([[0.0, -1.0], [1.0, 0.0]])
    rep = fm.check_corollary2(gram, K)
    assert rep.consistent and rep.max_dev <= 1e-8

    sol = fm.solve_theorem1(gram)
    tg = np.linspace(0, math.pi / 2, 100)
    expected = 24 / (math.pi ** 2 - 4) * (math.pi / 2 * np.sin(tg) - np.cos(tg))
    assert np.max(np.abs(sol(tg) - expected)) <= 1e-10


def test_corollary2_identity_trivial(rule):
    D = fm.Domain.make(("x", 0, 1))
    E = fm.Domain.make(("t", 0, 1))
    k = fm.SeparableKernel((fm.parse_expr("1", ("x",)),
                            fm.parse_expr("x", ("x",))),
                           (fm.parse_expr("1", ("t",)),
                            fm.parse_expr("t", ("t",))), D, E)
    f = fm.parse_expr("1 + 2*x", ("x",))
    gram = fm.assemble(k, f, rule, cross=True)
    rep = fm.check_corollary2(gram, np.eye(2))
    assert rep.consistent


def test_corollary2_rejects_wrong_k(ex3):
    with pytest.raises(ValidationError):
        fm.check_corollary2(ex3.gram, np.eye(2))


# --- null space ------------------------------------------------------------

def test_null_project_annihilates_h(ex1):
    w = fm.null_project(ex1.kernel.hs[0], ex1.kernel, ex1.gram)
    tg = np.linspace(0, 1, 200)
    assert np.max(np.abs(w({"t": tg}))) <= 1e-10


def test_null_project_example1_family(ex1):
    w = fm.null_project(fm.parse_expr("t^2", ("t",)), ex1.kernel, ex1.gram)
    tg = np.linspace(0, 1, 100)
    assert np.max(np.abs(w({"t": tg}) - (tg ** 2 - tg + 1 / 6))) <= 1e-12


def test_null_project_idempotent(ex1):
    v = fm.parse_expr("exp(t)*sin(2*t)", ("t",))
    w1 = fm.null_project(v, ex1.kernel, ex1.gram)
    w2 = fm.null_project(w1, ex1.kernel, ex1.gram)
    tg = np.linspace(0, 1, 100)
    assert np.max(np.abs(w1({"t": tg}) - w2({"t": tg}))) <= 1e-10


def test_null_project_output_is_orthogonal_to_h(ex3, rule):
    v = fm.parse_expr("1 + t^3", ("t",))
    w = fm.null_project(v, ex3.kernel, ex3.gram)
    for h in ex3.kernel.hs:
        assert abs(fm.inner_product(w, h, ex3.kernel.E, rule)) <= 1e-10


def test_orthonormal_basis_properties(ex2, rule):
    cands = fm.default_null_candidates(ex2.kernel.E, 4)
    phis = fm.orthonormal_null_basis(cands, ex2.kernel, ex2.gram)
    assert len(phis) == 5
    for i, pi_ in enumerate(phis):
        for h in ex2.kernel.hs:
            assert abs(fm.inner_product(pi_, h, ex2.kernel.E, rule)) <= 1e-10
        for j, pj in enumerate(phis):
            want = 1.0 if i == j else 0.0
            got = fm.inner_product(pi_, pj, ex2.kernel.E, rule)
            assert got == pytest.approx(want, abs=1e-10)


def test_orthonormal_basis_drops_in_span_candidates(ex1):
    # 1 and t span the h-family, so only the quadratic survives
    cands = fm.default_null_candidates(ex1.kernel.E, 2)
    phis = fm.orthonormal_null_basis(cands, ex1.kernel, ex1.gram)
    assert len(phis) == 1


# --- structure of solutions --------------------------------------------------

def test_compose_zero_coefficients_is_u_dagger(ex1, rule):
    sol = fm.solve_min_norm(RhsSpec.from_func(ex1.f), ex1.kernel, ex1.gram)
    composed = fm.compose_structure(
        sol, NullComponent(phis=(), coeffs=()), rule)
    tg = np.linspace(0, 1, 50)
    assert np.array_equal(composed(tg), np.asarray(sol(tg)))
    assert composed.norm_sq == sol.norm_sq


def test_compose_example2_pythagoras(ex2, rule):
    sol = fm.solve_min_norm(RhsSpec.from_func(ex2.f), ex2.kernel, ex2.gram)
    phis = fm.orthonormal_null_basis(
        fm.default_null_candidates(ex2.kernel.E, 3), ex2.kernel, ex2.gram)
    composed = fm.compose_structure(
        sol, NullComponent(phis=phis[:1], coeffs=(1.0,)), rule)
    assert composed.norm_sq == pytest.approx(math.pi / 2 + 1.0, rel=1e-10)
    assert composed.norm_sq_quadrature == pytest.approx(math.pi / 2 + 1.0,
                                                        rel=1e-8)
    assert composed.pythagoras_rel_dev <= 1e-8
    assert composed.operator_dev <= 1e-9
    assert composed.norm_sq > sol.norm_sq


def test_legacy_solution_decomposes_as_structure(ex1, rule):
    # unique decomposition: the legacy answer is u_dagger plus its null part
    sol = fm.solve_min_norm(RhsSpec.from_func(ex1.f), ex1.kernel, ex1.gram)
    legacy = fm.solve_prop1(ex1.gram)
    gs_on_t = [rename_vars(g, {"x": "t"}) for g in ex1.kernel.gs]
    diff = linear_combination(
        list(legacy.z) + list(-sol.beta),
        gs_on_t + [fm.FuncExpr(h.ast, ("t",)) for h in ex1.kernel.hs])
    w = fm.null_project(diff, ex1.kernel, ex1.gram)
    tg = np.linspace(0, 1, 100)
    reconstructed = np.asarray(sol(tg)) + w({"t": tg})
    assert np.max(np.abs(reconstructed - legacy(tg))) <= 1e-8
    # and the difference really was already in the null space
    assert np.max(np.abs(w({"t": tg}) - diff({"t": tg}))) <= 1e-10


def test_minimality_over_random_null_components(ex2, rule):
    sol = fm.solve_min_norm(RhsSpec.from_func(ex2.f), ex2.kernel, ex2.gram)
    phis = fm.orthonormal_null_basis(
        fm.default_null_candidates(ex2.kernel.E, 4), ex2.kernel, ex2.gram)
    rng = np.random.default_rng(23)
    for _ in range(50):
        c = rng.uniform(-1.5, 1.5, size=len(phis))
        comp = fm.compose_structure(
            sol, NullComponent(phis=phis, coeffs=tuple(c)), rule)
        total = comp.norm_sq_quadrature
        parts = sol.norm_sq + float(c @ c)
        assert abs(total - parts) <= 1e-8 * max(1.0, parts)
        assert math.sqrt(total) >= sol.norm - 1e-8


def test_u_dagger_orthogonal_to_null_space(ex3, rule):
    sol = fm.solve_theorem1(ex3.gram)
    w = fm.null_project(fm.parse_expr("t^4 - 1", ("t",)), ex3.kernel, ex3.gram)
    got = inner(sol, lambda pts: fm.evaluate(w, pts), ex3.kernel.E, rule)
    assert abs(got) <= 1e-10


# --- operator-side helpers ---------------------------------------------------

def test_rk_eval_rank_one(ex2):
    x, xp = {"x": 0.3}, {"x": 1.1}
    got = fm.rk_eval(x, xp, ex2.kernel, ex2.gram)
    expected = math.pi / 2 * math.cos(0.3) * math.cos(1.1)
    assert got == pytest.approx(expected, rel=1e-13)


def test_rk_eval_symmetric(ex1):
    rng = np.random.default_rng(5)
    for _ in range(100):
        a, b = rng.uniform(0, 1, size=2)
        k1 = fm.rk_eval({"x": a}, {"x": b}, ex1.kernel, ex1.gram)
        k2 = fm.rk_eval({"x": b}, {"x": a}, ex1.kernel, ex1.gram)
        assert k1 == pytest.approx(k2, rel=1e-12)


def test_rk_reproducing_property(ex1):
    rng = np.random.default_rng(9)
    C = rng.uniform(-2, 2, size=2)
    beta = fm.solve_spd(ex1.gram.H, C)
    xs = rng.uniform(0, 1, size=100)
    lhs = np.array([
        sum(fm.evaluate(g, {"x": float(x)}) * m
            for g, m in zip(ex1.kernel.gs, ex1.gram.H @ beta))
        for x in xs])
    f_vals = C[0] + C[1] * np.exp(xs)
    assert np.max(np.abs(lhs - f_vals)) <= 1e-10


def test_apply_operator_example1(ex1, rule):
    sol = fm.solve_min_norm(RhsSpec.from_coeffs([0.5, 1 / 3]),
                            ex1.kernel, ex1.gram)
    got = fm.apply_operator(sol, ex1.kernel, {"x": 0.0}, rule)
    assert got == pytest.approx(5 / 6, rel=1e-12)


def test_apply_operator_kills_null_space(ex1, rule):
    w = fm.null_project(fm.parse_expr("t^3", ("t",)), ex1.kernel, ex1.gram)
    rng = np.random.default_rng(2)
    xs = rng.uniform(0, 1, size=20)
    vals = fm.apply_operator(w, ex1.kernel, {"x": xs}, rule)
    assert np.max(np.abs(vals)) <= 1e-9


def test_apply_operator_linear(ex1, rule):
    u = fm.parse_expr("t^2", ("t",))
    v = fm.parse_expr("sin(t)", ("t",))
    a, b = 1.7, -0.4
    combo = linear_combination([a, b], [u, v])
    xs = np.linspace(0, 1, 13)
    lhs = fm.apply_operator(combo, ex1.kernel, {"x": xs}, rule)
    rhs = (a * np.asarray(fm.apply_operator(u, ex1.kernel, {"x": xs}, rule))
           + b * np.asarray(fm.apply_operator(v, ex1.kernel, {"x": xs}, rule)))
    assert np.max(np.abs(lhs - rhs)) <= 1e-10


def test_residual_report_example3(ex3, rule):
    sol = fm.solve_theorem1(ex3.gram)
    rep = fm.residual_report(sol, ex3.kernel, ex3.f, 200, rule)
    assert rep.max_abs <= 1e-9
    assert rep.samples_per_axis == 200


def test_residual_report_zero_solution(ex3, rule):
    zero = LegacySolution(kernel=ex3.kernel, z=np.zeros(2), norm_sq=0.0)
    rep = fm.residual_report(zero, ex3.kernel, ex3.f, 100, rule)
    assert rep.rel_l2 == pytest.approx(1.0, rel=1e-12)


def test_residual_report_example5(ex5, rule):
    sol = fm.solve_min_norm(RhsSpec.from_func(ex5.f), ex5.kernel, ex5.gram)
    rep = fm.residual_report(sol, ex5.kernel, ex5.f, 50, rule)
    assert rep.max_abs <= 1e-9


def test_solver_linear_in_rhs(ex1):
    f1 = fm.parse_expr("exp(x)", ("x",))
    f2 = fm.parse_expr("1 - x", ("x",))
    a, b = 2.0, -3.5
    combo = linear_combination([a, b], [f1, f2])
    sols = {}
    for name, f in (("f1", f1), ("f2", f2), ("combo", combo)):
        gram = fm.assemble(ex1.kernel, f, ex1.gram.rule)
        sols[name] = fm.solve_min_norm(RhsSpec.from_func(f), ex1.kernel, gram)
    mixed = a * sols["f1"].beta + b * sols["f2"].beta
    assert np.max(np.abs(sols["combo"].beta - mixed)) <= 1e-10


def test_beta_scales_with_rhs(ex1, rule):
    alpha = 3.25
    scaled = linear_combination([alpha], [ex1.f])
    gram = fm.assemble(ex1.kernel, scaled, rule)
    base = fm.solve_min_norm(RhsSpec.from_func(ex1.f), ex1.kernel, ex1.gram)
    got = fm.solve_min_norm(RhsSpec.from_func(scaled), ex1.kernel, gram)
    scale = max(np.max(np.abs(alpha * base.beta)), 1.0)
    assert np.max(np.abs(got.beta - alpha * base.beta)) <= 1e-12 * scale


def test_least_squares_mode_flagged(rule, ex2):
    # rhs with a component outside span{cos x}
    f = fm.parse_expr("cos(x) + x", ("x",))
    gram = fm.assemble(ex2.kernel, f, rule)
    sol = fm.solve_min_norm(RhsSpec.from_func(f), ex2.kernel, gram)
    assert sol.least_squares
    assert sol.in_range_residual > 1e-8
    rep = fm.residual_report(sol, ex2.kernel, f, 100, rule)
    assert rep.rel_l2 > 1e-3  # the out-of-range part stays unexplained
