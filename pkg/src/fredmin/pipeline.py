"""Batch solve pipeline: problem -> assemble -> solve -> verify -> report.

This is the orchestration the CLI wraps; everything here is also usable as a
library call (`solve_problem`). The returned report is a nested dict with a
fixed key order, ready for report.render_text / render_json.
"""

from __future__ import annotations

import numpy as np

from . import __version__
from .errors import SingularMatrixError, ValidationError
from .expr import Domain, FuncExpr, linear_combination, parse_expr, to_text
from .gram import assemble, solve_general
from .oracle import compare, discretize, oracle_min_norm
from .problem import (OPTION_SPEC, BuiltinSpec, Problem, SeparableSpec,
                      SeriesSpec)
from .quadrature import gauss_legendre
from .series import (SeriesKernel, TruncationPolicy, bhcp_kernel,
                     bhcp_rhs_coeffs, truncate)
from .solver import (NullComponent, RhsSpec, compose_structure,
                     default_null_candidates, orthonormal_null_basis,
                     residual_report, solve_min_norm, solve_prop1,
                     solve_theorem1)

SPD_CHECK_TRIALS = 50


def effective_options(problem: Problem, overrides: dict | None = None) -> dict:
    opts = {name: default for name, (_, default) in OPTION_SPEC.items()}
    opts.update(problem.options)
    if overrides:
        opts.update({k: v for k, v in overrides.items() if v is not None})
    if opts["samples"] < 2:
        raise ValidationError("samples must be >= 2")
    if opts["oracle_m"] < 0:
        raise ValidationError("oracle_m must be >= 0")
    if opts["residual_samples"] not in (0,) and opts["residual_samples"] < 2:
        raise ValidationError("residual_samples must be 0 (auto) or >= 2")
    return opts


def _cross_status(gram):
    if gram.A is None:
        return "not_assembled", True
    s = np.linalg.svd(gram.A, compute_uv=False)
    floor = max(float(s[0]) if s.size else 0.0, gram.cross_scale or 0.0)
    rank = int(np.sum(s > 1e-12 * floor))
    n = gram.A.shape[0]
    if rank < n:
        return f"singular (rank {rank} of {n})", False
    return "invertible", True


def _build_separable(problem, opts, rule, warnings):
    spec = problem.kernel
    D, E = problem.D, problem.E
    gs = tuple(parse_expr(t, D.names) for t in spec.g_texts)
    hs = tuple(parse_expr(t, E.names) for t in spec.h_texts)
    from .gram import SeparableKernel
    kernel = SeparableKernel(gs=gs, hs=hs, D=D, E=E)
    f_expr = (parse_expr(problem.rhs_func, D.names)
              if problem.rhs_func is not None else None)
    coeffs = problem.rhs_coeffs
    echo_kernel = {"g": [to_text(g) for g in gs], "h": [to_text(h) for h in hs]}
    return kernel, f_expr, coeffs, None, echo_kernel


def _build_series(problem, opts, rule, warnings):
    spec = problem.kernel
    if isinstance(spec, BuiltinSpec):
        sk = bhcp_kernel(spec.s)
        echo_kernel = {"builtin": spec.name, "s": spec.s}
        if problem.rhs_coeffs is not None:
            coeffs = list(problem.rhs_coeffs)
            f_expr = None
        else:
            f_expr = parse_expr(problem.rhs_func, sk.D.names)
            coeffs = bhcp_rhs_coeffs(f_expr, spec.s, rule, opts["max_terms"])
        sk = bhcp_kernel(spec.s, coeffs)
    else:
        D, E = problem.D, problem.E
        idx = spec.index
        if not idx.isidentifier() or idx in D.names or idx in E.names:
            raise ValidationError(f"bad series index variable {idx!r}")
        g_tmpl = parse_expr(spec.g_term, (idx,) + D.names)
        h_tmpl = parse_expr(spec.h_term, (idx,) + E.names)
        decay = (parse_expr(spec.decay_hint, (idx,))
                 if spec.decay_hint is not None else None)
        if problem.rhs_coeffs is None:
            raise ValidationError(
                "series kernels take 'coeffs' as rhs; only the bhcp builtin "
                "projects a function rhs")
        coeffs = list(problem.rhs_coeffs)
        f_expr = None
        from .expr import substitute

        def term(i):
            return (substitute(g_tmpl, {idx: float(i)}),
                    substitute(h_tmpl, {idx: float(i)}))

        def rhs_coeff(i):
            return coeffs[i - 1] if i - 1 < len(coeffs) else 0.0

        decay_hint = None
        if decay is not None:
            def decay_hint(i):
                return float(decay({idx: float(i)}))

        sk = SeriesKernel(term=term, rhs_coeff=rhs_coeff, D=D, E=E,
                          decay_hint=decay_hint)
        echo_kernel = {"g_term": to_text(g_tmpl), "h_term": to_text(h_tmpl),
                       "index": idx, "decay_hint": spec.decay_hint}

    policy = TruncationPolicy(max_terms=opts["max_terms"],
                              tail_tol=opts["tail_tol"],
                              mode=opts["truncation"])
    trunc = truncate(sk, policy, rule)
    tail = trunc.tail_estimate
    series_block = {
        "n_terms": trunc.n_terms,
        "tail_estimate": None if np.isnan(tail) else tail,
        "mode": policy.mode,
        "tail_tol": policy.tail_tol,
        "max_terms": policy.max_terms,
    }
    return (trunc.kernel, f_expr, tuple(float(c) for c in trunc.coeffs),
            series_block, echo_kernel)


def solve_problem(problem: Problem, overrides: dict | None = None) -> dict:
    """Run the full pipeline and return the report dict."""
    opts = effective_options(problem, overrides)
    rule = gauss_legendre(opts["quad_order"], opts["panels"])
    warnings = []
    is_series = isinstance(problem.kernel, (BuiltinSpec, SeriesSpec))

    if is_series:
        if opts["path"] == "theorem1":
            raise ValidationError(
                "series kernels solve via truncation; the theorem1 path "
                "applies to separable kernels")
        kernel, f_expr, coeffs, series_block, echo_kernel = _build_series(
            problem, opts, rule, warnings)
        path_label = "series"
    else:
        kernel, f_expr, coeffs, series_block, echo_kernel = _build_separable(
            problem, opts, rule, warnings)
        path_label = None

    need_cross = opts["path"] == "theorem1" or opts["compare_legacy"]
    if need_cross and kernel.D.dim != kernel.E.dim:
        raise ValidationError(
            "the theorem1 path and the legacy comparison need the x-space "
            "and t-space to coincide as variable spaces")

    gram = assemble(kernel, f_expr, rule, cross=need_cross,
                    cond_threshold=opts["cond_threshold"])
    if need_cross and gram.F is None and coeffs is not None:
        gram.F = gram.A @ np.asarray(coeffs, dtype=float)
    a_status, a_invertible = _cross_status(gram)

    if coeffs is not None:
        rhs_spec = RhsSpec.from_coeffs(coeffs)
    else:
        rhs_spec = RhsSpec.from_func(f_expr)

    if opts["path"] == "theorem1":
        try:
            sol = solve_theorem1(gram, in_range_tol=opts["in_range_tol"])
        except SingularMatrixError as exc:
            warnings.append(
                f"cross matrix A is singular ({exc.rank} of {exc.size}); "
                "fell back to the projection path")
            sol = solve_min_norm(rhs_spec, kernel, gram,
                                 in_range_tol=opts["in_range_tol"])
    else:
        sol = solve_min_norm(rhs_spec, kernel, gram,
                             in_range_tol=opts["in_range_tol"])
    if path_label:
        sol.path = path_label
    if sol.least_squares:
        warnings.append(
            "rhs lies outside the kernel range (relative distance "
            f"{sol.in_range_residual:.3e}); this is the least-squares solve")

    # verification blocks -------------------------------------------------
    f_for_checks = f_expr if f_expr is not None else linear_combination(
        sol.C, kernel.gs)
    resid_m = opts["residual_samples"] or (200 if kernel.D.dim == 1 else 50)
    resid = residual_report(sol, kernel, f_for_checks, resid_m, rule)

    legacy_block = None
    if opts["compare_legacy"]:
        if a_invertible:
            legacy = solve_prop1(gram)
            grid_E = kernel.E.grid(200 if kernel.E.dim == 1 else 50)
            dev = float(np.max(np.abs(
                np.asarray(legacy(grid_E)) - np.asarray(sol(grid_E)))))
            legacy_block = {
                "norm": legacy.norm,
                "norm_sq": legacy.norm_sq,
                "max_dev_vs_min_norm": dev,
            }
        else:
            warnings.append(
                "legacy comparison skipped: cross matrix A is singular")

    oracle_block = None
    if opts["oracle_m"]:
        dop = discretize(kernel, opts["oracle_m"], opts["oracle_m"])
        osol = oracle_min_norm(dop, f_for_checks)
        comp = compare(sol, osol)
        oracle_block = {
            "m_t": int(dop.t_weights.size),
            "m_x": int(dop.x_weights.size),
            "rank": comp.rank,
            "max_dev": comp.max_dev,
            "norm_dev": comp.norm_dev,
            "oracle_norm": comp.oracle_norm,
        }

    structure_block = None
    if opts["structure_coeffs"]:
        cands = default_null_candidates(kernel.E, opts["null_degree"])
        phis = orthonormal_null_basis(cands, kernel, gram)
        wanted = len(opts["structure_coeffs"])
        if len(phis) < wanted:
            raise ValidationError(
                f"only {len(phis)} null directions available at degree "
                f"{opts['null_degree']}; {wanted} coefficients given")
        null = NullComponent(phis=phis[:wanted],
                             coeffs=tuple(opts["structure_coeffs"]))
        composed = compose_structure(sol, null, rule)
        structure_block = {
            "coeffs": list(null.coeffs),
            "n_directions": wanted,
            "norm_sq": composed.norm_sq,
            "norm_sq_quadrature": composed.norm_sq_quadrature,
            "pythagoras_rel_dev": composed.pythagoras_rel_dev,
            "operator_dev": composed.operator_dev,
        }

    rng = np.random.default_rng(opts["seed"])
    v = rng.standard_normal((SPD_CHECK_TRIALS, kernel.n))
    spd_ok = bool(np.all(np.einsum("ki,ij,kj->k", v, gram.H, v) > 0))

    gram2 = assemble(kernel, None, rule.with_panels(rule.panels * 2),
                     cond_threshold=opts["cond_threshold"])
    scale_h = max(float(np.max(np.abs(gram.H))), 1e-30)
    scale_g = max(float(np.max(np.abs(gram.G))), 1e-30)
    refinement_dev = max(
        float(np.max(np.abs(gram2.H - gram.H))) / scale_h,
        float(np.max(np.abs(gram2.G - gram.G))) / scale_g)

    grid = kernel.E.grid(opts["samples"])
    u_vals = np.asarray(sol(grid), dtype=float)
    rows = [list(map(float, point)) + [float(u)]
            for *point, u in zip(*(grid[n] for n in kernel.E.names), u_vals)]

    # echo ----------------------------------------------------------------
    echo = {}
    if problem.D is not None:
        echo["domain"] = {
            "x": [[n, lo, hi] for n, lo, hi in problem.D.axes],
            "t": [[n, lo, hi] for n, lo, hi in problem.E.axes],
        }
    echo["kernel"] = echo_kernel
    if problem.rhs_func is not None:
        echo["rhs"] = {"f": to_text(parse_expr(
            problem.rhs_func, kernel.D.names))}
    else:
        echo["rhs"] = {"coeffs": [float(c) for c in problem.rhs_coeffs]}
    echo["options"] = {name: (list(opts[name])
                              if isinstance(opts[name], tuple) else opts[name])
                       for name in OPTION_SPEC}

    report = {
        "fredmin_version": __version__,
        "problem": echo,
        "path": sol.path,
        "warnings": warnings,
        "gram": {
            "n": kernel.n,
            "cond_h": gram.condH,
            "cond_g": gram.condG,
            "a_status": a_status,
            "quad_order": rule.order,
            "panels": rule.panels,
            "refinement_dev": refinement_dev,
            "spd_check": "pass" if spd_ok else "fail",
        },
    }
    if series_block:
        report["series"] = series_block
    report["solution"] = {
        "C": [float(c) for c in sol.C],
        "beta": [float(b) for b in sol.beta],
        "norm_sq": sol.norm_sq,
        "norm": sol.norm,
        "in_range_residual": sol.in_range_residual,
        "mode": "least_squares" if sol.least_squares else "exact",
    }
    report["residual"] = {
        "max_abs": resid.max_abs,
        "rel_l2": resid.rel_l2,
        "samples_per_axis": resid.samples_per_axis,
    }
    if legacy_block:
        report["legacy"] = legacy_block
    if oracle_block:
        report["oracle"] = oracle_block
    if structure_block:
        report["structure"] = structure_block
    report["samples"] = {
        "axes": list(kernel.E.names) + ["u"],
        "rows": rows,
    }
    return report
