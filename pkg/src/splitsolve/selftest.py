"""Small-scale invariant suites for every module, runnable from the CLI.

Each suite re-derives a handful of known values and structural
properties at coarse resolution; the point is a fast sanity gate, not
the full test suite.
"""

from __future__ import annotations


import numpy as np

from . import expr as expr_mod
from .backward import OperatorConfig, apply_operator, minimize_over_y, objective
from .baselines import (ColeHopfParams, cole_hopf_exact, default_howard_config,
                        howard_fd_solve, normal_cdf)
from .expectation import (GaussianStep, GridFunction, expect_fd_explicit,
                          expect_monte_carlo, expect_quadrature, frozen_step,
                          hermite_rule, uniform_grid, grid_function)
from .harness import ConvergenceReport, ConvergenceRow, estimate_rate
from .problem import (cole_hopf_problem, dual_envelopes, legendre_transform,
                      minimizer_radius, quadratic_drift_problem,
                      validate_declarations)
from .scheme import scheme_comparison_check, solve


def _suite_problem(seed=0):
    prob = cole_hopf_problem()
    checks = []
    for q in (-3.0, 0.0, 1.5, 4.0):
        lo, hi = dual_envelopes(prob.dual, q)
        val = prob.dual.eval(0.0, 1.0, q)
        checks.append(lo - 1e-9 <= val <= hi + 1e-9)
        checks.append(abs(val - 0.5 * q * q) < 1e-9)
    qd = quadratic_drift_problem(a=1.0)
    checks.append(abs(legendre_transform(qd.hamiltonian, 0, 0, 3.0) - 2.0)
                  < 1e-9)
    # declared constants (bounds, Lipschitz, K_H) hold on samples
    checks.append(validate_declarations(prob, seed=seed) == [])
    checks.append(validate_declarations(qd, seed=seed) == [])
    # numerical conjugation without the analytic dual
    import dataclasses
    raw = dataclasses.replace(prob.hamiltonian, analytic_dual=None)
    checks.append(abs(legendre_transform(raw, 0, 0, 3.0) - 4.5) < 1e-8)
    radii = [minimizer_radius(prob.dual, lip) for lip in (0.0, 0.5, 1.0, 5.0)]
    checks.append(all(r2 >= r1 for r1, r2 in zip(radii, radii[1:])))
    checks.append(abs(radii[-1] - 10.0) < 1e-4)
    return all(checks)


def _suite_expectation(seed=0):
    xs = uniform_grid(-10.0, 10.0, 0.05)
    rule = hermite_rule(32)
    const = GridFunction(xs, np.full(xs.size, 7.0))
    step = GaussianStep(mean=1.0, std=0.7)
    ok = abs(expect_quadrature(const, step, rule) - 7.0) < 1e-12
    lin = GridFunction(xs, xs.copy())
    ok &= abs(expect_quadrature(lin, GaussianStep(0.0, 1.0), rule)) < 1e-8
    sq = GridFunction(xs, xs ** 2)
    ok &= abs(expect_quadrature(sq, GaussianStep(0.0, 1.0), rule) - 1.0) \
        < 0.05 ** 2 / 4
    est, se = expect_monte_carlo(sq, GaussianStep(0.0, 1.0), 200_000,
                                 seed=7 + seed)
    ok &= abs(est - 1.0) < 4 * se + 1e-3
    prob = cole_hopf_problem()
    ok &= abs(expect_fd_explicit(sq, prob.coeffs, 0.0, 1e-3, 200)
              - (xs[200] ** 2 + 1e-3)) < 1e-10
    ok &= frozen_step(prob.coeffs, 0.0, 0.1, 5.0).mean == 5.0
    return bool(ok)


def _suite_backward(seed=0):
    prob = cole_hopf_problem()
    xs = uniform_grid(-6.0, 10.0, 0.05)
    cfg = OperatorConfig(delta=0.1)
    phi = grid_function(xs, prob.terminal.eval)
    out = apply_operator(prob, 0.5, cfg, phi)
    shifted = apply_operator(prob, 0.5, cfg, phi.with_values(phi.vals + 3.0))
    ok = float(np.max(np.abs(shifted.vals - out.vals - 3.0))) < 1e-9
    below = apply_operator(prob, 0.5, cfg, phi.with_values(phi.vals - 0.25))
    ok &= bool(np.all(below.vals <= out.vals + 1e-12))
    ok &= float(np.max(np.abs(out.vals))) <= phi.sup_norm() + 1e-12
    res = minimize_over_y(prob, 0.5, cfg, 0.0, phi)
    ok &= res.value <= objective(prob, 0.5, cfg.delta, 0.0, 0.0, phi) + 1e-12
    return bool(ok)


def _suite_scheme(seed=0):
    prob = cole_hopf_problem(K=2.0, T=0.5, x_domain=(-6.0, 8.0))
    xs = uniform_grid(-6.0, 8.0, 0.05)
    cfg = OperatorConfig(delta=0.25)
    const_prob = cole_hopf_problem(K=2.0, T=0.5, x_domain=(-6.0, 8.0))
    sol = solve(prob, xs, cfg)
    ok = sol.n_steps == 2
    bound = sol.layers[0].sup_norm() + prob.dual.stability_constant() * 0.5
    ok &= all(layer.sup_norm() <= bound + 1e-9 for layer in sol.layers)
    rep = scheme_comparison_check(sol, solve(const_prob, xs, cfg), 0.0, 0.0)
    ok &= rep.max_violation <= 1e-9
    try:
        solve(prob, xs, OperatorConfig(delta=0.3))
        ok = False
    except Exception:
        pass
    return bool(ok)


def _suite_baselines(seed=0):
    ok = abs(normal_cdf(0.0) - 0.5) < 1e-15
    ok &= abs(normal_cdf(1.0) + normal_cdf(-1.0) - 1.0) < 1e-15
    params = ColeHopfParams(K=5.0, T=1.0)
    ok &= abs(cole_hopf_exact(params, 1.0 - 1e-10, 2.5) - 2.5) < 1e-8
    prob = cole_hopf_problem(K=2.0, T=0.4, x_domain=(-5.0, 7.0))
    xs = uniform_grid(-5.0, 7.0, 0.05)
    flat = cole_hopf_problem(K=2.0, T=0.4, x_domain=(-5.0, 7.0))
    hc = default_howard_config(prob, q_points=51)
    sol = howard_fd_solve(prob, xs, 0.2, hc)
    exact = cole_hopf_exact(ColeHopfParams(K=2.0, T=0.4), 0.0, xs)
    ok &= float(np.max(np.abs(sol.layers[-1].vals - exact))) < 0.05
    del flat
    return bool(ok)


def _suite_harness(seed=0):
    rows = tuple(ConvergenceRow(d, 1.0, 0.25 * d, 0.05 * d, 0.0)
                 for d in (0.1, 0.05, 0.025))
    rep = ConvergenceReport("splitting", (0.0, 5.0), "exact", 1.0, rows)
    ok = abs(estimate_rate(rep) - 1.0) < 1e-12
    return bool(ok)


def _suite_cli(seed=0):
    ast = expr_mod.parse_expression("p^2/2")
    ok = abs(expr_mod.evaluate(ast, {"p": 3.0}) - 4.5) < 1e-15
    ok &= expr_mod.evaluate(expr_mod.parse_expression("1+2*3^2"), {}) == 19.0
    ok &= expr_mod.evaluate(expr_mod.parse_expression("clamp(x,0,5)"),
                            {"x": 7.0}) == 5.0
    text = expr_mod.pretty(ast)
    ok &= expr_mod.pretty(expr_mod.parse_expression(text)) == text
    return bool(ok)


SUITES = (
    ("problem", _suite_problem),
    ("expectation", _suite_expectation),
    ("backward", _suite_backward),
    ("scheme", _suite_scheme),
    ("baselines", _suite_baselines),
    ("harness", _suite_harness),
    ("cli", _suite_cli),
)


def run_all(out=print, seed: int = 0) -> bool:
    all_ok = True
    for name, fn in SUITES:
        try:
            ok = fn(seed=seed)
            detail = ""
        except Exception as exc:  # a crashed suite is a failed suite
            ok = False
            detail = f" ({type(exc).__name__}: {exc})"
        all_ok &= ok
        out(f"  {name:<12} {'pass' if ok else 'FAIL'}{detail}")
    out("selftest: " + ("all suites passed" if all_ok else "FAILURES"))
    return all_ok
