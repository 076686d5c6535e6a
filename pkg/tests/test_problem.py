import dataclasses

import numpy as np
import pytest

import splitsolve as ss
from splitsolve.problem import DualHamiltonian


def brute_conjugate(ham_fn, q, p_lo=-20.0, p_hi=20.0, step=1e-4):
    """Independent oracle: dense p-grid scan of sup_p {p*q - H(p)}."""
    p = np.arange(p_lo, p_hi + step / 2, step)
    return float(np.max(p * q - ham_fn(p)))


def quad_ham(t, x, p):
    return 0.5 * np.asarray(p, dtype=float) ** 2


def numeric_spec(eval_fn, k_h, tx_dependent=False):
    return ss.HamiltonianSpec(eval=eval_fn, coercivity_radius=k_h,
                              analytic_dual=None, tx_dependent=tx_dependent)


class TestLegendreTransform:
    def test_quadratic_self_dual(self):
        ham = numeric_spec(quad_ham, lambda y: max(2.0 * y, 0.0))
        assert ss.legendre_transform(ham, 0.0, 0.0, 3.0) == pytest.approx(4.5, abs=1e-9)

    def test_drift_quadratic_matches_brute_force(self):
        a = 1.0
        ham = numeric_spec(lambda t, x, p: a * p + 0.5 * np.asarray(p, float) ** 2,
                           lambda y: max(2.0 * (y + a), 0.0))
        got = ss.legendre_transform(ham, 0.0, 0.0, 3.0)
        oracle = brute_conjugate(lambda p: a * p + 0.5 * p ** 2, 3.0)
        assert got == pytest.approx(2.0, abs=1e-9)
        assert got == pytest.approx(oracle, abs=1e-7)

    def test_quartic(self):
        ham = numeric_spec(lambda t, x, p: 0.25 * np.asarray(p, float) ** 4,
                           lambda y: float(np.cbrt(4.0 * max(y, 0.0))))
        got = ss.legendre_transform(ham, 0.0, 0.0, 1.0)
        oracle = brute_conjugate(lambda p: 0.25 * p ** 4, 1.0)
        assert got == pytest.approx(0.75, abs=1e-9)
        assert got == pytest.approx(oracle, abs=1e-8)

    def test_quadratic_numeric_on_q_range(self):
        ham = numeric_spec(quad_ham, lambda y: max(2.0 * y, 0.0))
        for q in np.linspace(-10, 10, 41):
            got = ss.legendre_transform(ham, 0.0, 0.0, float(q))
            assert got == pytest.approx(0.5 * q * q, abs=1e-8)

    def test_non_coercive_raises(self):
        # K_H lies: claims all maxima inside radius ~1 regardless of q
        ham = numeric_spec(quad_ham, lambda y: 0.5)
        with pytest.raises(ss.NonCoercive):
            ss.legendre_transform(ham, 0.0, 0.0, 12.0)

    def test_brute_force_agreement_randomized(self):
        rng = np.random.default_rng(20240811)
        variants = [
            (lambda p, a=a: a * p + 0.5 * p ** 2,
             lambda y, a=a: max(2.0 * (y + abs(a)), 0.0))
            for a in (-2.0, -0.5, 0.0, 1.0, 2.5)
        ] + [
            (lambda p, c=c: c * 0.25 * p ** 4,
             lambda y, c=c: float(np.cbrt(4.0 * max(y, 0.0) / c)))
            for c in (0.5, 1.0, 2.0)
        ]
        for _ in range(100):
            fn, k_h = variants[rng.integers(len(variants))]
            q = float(rng.uniform(-3, 3))
            ham = numeric_spec(lambda t, x, p, fn=fn: fn(np.asarray(p, float)),
                               k_h)
            got = ss.legendre_transform(ham, 0.0, 0.0, q)
            oracle = brute_conjugate(fn, q, step=5e-5)
            assert got == pytest.approx(oracle, abs=1e-8)


class TestDualProperties:
    def test_biconjugation_recovers_hamiltonian(self, cole_hopf):
        dual = cole_hopf.dual
        for p in np.linspace(-4, 4, 17):
            # independent double conjugation over a dense q-grid
            qs = np.linspace(-30, 30, 120001)
            lvals = 0.5 * qs ** 2
            recovered = np.max(p * qs - lvals)
            assert recovered == pytest.approx(quad_ham(0, 0, p), abs=1e-6)
            assert dual.eval(0.0, 0.0, p * 1.0) == pytest.approx(0.5 * p * p,
                                                                 abs=1e-10)

    def test_biconjugation_numeric_dual(self):
        ham = numeric_spec(quad_ham, lambda y: max(2.0 * y, 0.0))
        dual = DualHamiltonian(ham, (0.0, 1.0), (-5.0, 5.0))
        for p in (-3.0, -1.0, 0.0, 0.7, 2.0):
            qs = np.linspace(-15, 15, 3001)
            lvals = np.array([dual.eval(0.0, 0.0, q) for q in qs])
            assert float(np.max(p * qs - lvals)) == pytest.approx(
                0.5 * p * p, abs=1e-6)

    def test_convexity_in_q(self, cole_hopf):
        qs = np.linspace(-6, 6, 25)
        lv = np.array([cole_hopf.dual.eval(0.0, 1.0, q) for q in qs])
        for i in range(1, len(qs) - 1):
            chord = 0.5 * (lv[i - 1] + lv[i + 1])
            assert lv[i] <= chord + 1e-10

    def test_envelopes_collapse_when_tx_free(self, cole_hopf):
        lo, hi = ss.dual_envelopes(cole_hopf.dual, 0.0)
        assert lo == pytest.approx(0.0, abs=1e-12)
        assert hi == pytest.approx(0.0, abs=1e-12)
        lo2, hi2 = ss.dual_envelopes(cole_hopf.dual, 2.0)
        assert lo2 == pytest.approx(2.0, abs=1e-12)
        assert hi2 == pytest.approx(2.0, abs=1e-12)

    def test_envelopes_spread_with_x_dependence(self):
        # H = p^2/2 + 0.1 sin(x); lattice endpoints hit sin = +-1
        ham = ss.HamiltonianSpec(
            eval=lambda t, x, p: 0.5 * np.asarray(p, float) ** 2
            + 0.1 * np.sin(x),
            coercivity_radius=lambda y: max(2.0 * (y + 0.2), 0.0),
            tx_dependent=True)
        dual = DualHamiltonian(ham, (0.0, 1.0), (-np.pi / 2, np.pi / 2))
        lo, hi = ss.dual_envelopes(dual, 0.0)
        assert lo == pytest.approx(-0.1, abs=1e-6)
        assert hi == pytest.approx(0.1, abs=1e-6)
        assert lo <= hi

    def test_sandwich_on_samples(self):
        ham = ss.HamiltonianSpec(
            eval=lambda t, x, p: 0.5 * np.asarray(p, float) ** 2
            + 0.1 * np.sin(x),
            coercivity_radius=lambda y: max(2.0 * (y + 0.2), 0.0),
            tx_dependent=True)
        dual = DualHamiltonian(ham, (0.0, 1.0), (-np.pi / 2, np.pi / 2))
        for q in (-2.0, -0.3, 0.0, 1.1, 3.0):
            lo, hi = ss.dual_envelopes(dual, q)
            assert lo <= hi + 1e-12
            for x in (-1.2, 0.0, 0.9):
                val = dual.eval(0.0, x, q)
                assert lo - 1e-8 <= val <= hi + 1e-8


class TestMinimizerRadius:
    def test_floor_binds_for_small_lip(self, cole_hopf):
        assert ss.minimizer_radius(cole_hopf.dual, 0.0) == pytest.approx(1.0)
        assert ss.minimizer_radius(cole_hopf.dual, 0.1) == pytest.approx(1.0)

    def test_quadratic_radius_value(self, cole_hopf):
        got = ss.minimizer_radius(cole_hopf.dual, 5.0)
        assert got == pytest.approx(10.0, abs=1e-4)

    def test_nondecreasing_in_lip(self, cole_hopf):
        lips = np.linspace(0.0, 8.0, 30)
        radii = [ss.minimizer_radius(cole_hopf.dual, float(z)) for z in lips]
        assert all(b >= a - 1e-12 for a, b in zip(radii, radii[1:]))

    def test_rejects_negative_lip(self, cole_hopf):
        with pytest.raises(ValueError):
            ss.minimizer_radius(cole_hopf.dual, -1.0)


class TestBuiltins:
    def test_cole_hopf_instance(self, cole_hopf):
        assert cole_hopf.coeffs.sigma(0.3, 1.7) == pytest.approx(1.0)
        assert cole_hopf.coeffs.b(0.3, 1.7) == pytest.approx(0.0)
        assert cole_hopf.hamiltonian.eval(0, 0, 3.0) == pytest.approx(4.5)
        assert float(cole_hopf.terminal.eval(7.0)) == pytest.approx(5.0)
        assert float(cole_hopf.terminal.eval(-2.0)) == pytest.approx(0.0)
        assert cole_hopf.horizon == 1.0

    def test_stability_constant_zero(self, cole_hopf):
        assert cole_hopf.dual.stability_constant() == pytest.approx(0.0,
                                                                    abs=1e-12)

    def test_quartic_dual(self):
        prob = ss.quartic_problem()
        assert prob.dual.eval(0, 0, 1.0) == pytest.approx(0.75)

    def test_invalid_horizon_rejected(self, cole_hopf):
        with pytest.raises(ValueError):
            dataclasses.replace(cole_hopf, horizon=0.0)


class TestDeclarationChecks:
    def test_builtins_are_clean(self, cole_hopf):
        assert ss.validate_declarations(cole_hopf) == []
        assert ss.validate_declarations(ss.quadratic_drift_problem()) == []
        assert ss.validate_declarations(ss.quartic_problem()) == []

    def test_flags_understated_bound(self, cole_hopf):
        import dataclasses
        bad = dataclasses.replace(cole_hopf, m_bound=0.5)
        issues = ss.validate_declarations(bad)
        assert issues and any("bound" in msg for msg in issues)

    def test_flags_understated_lipschitz(self, cole_hopf):
        import dataclasses
        bad = dataclasses.replace(
            cole_hopf,
            terminal=ss.TerminalDatum(eval=cole_hopf.terminal.eval,
                                      lip_const=0.2))
        issues = ss.validate_declarations(bad)
        assert any("Lipschitz" in msg for msg in issues)

    def test_flags_lying_coercivity_radius(self, cole_hopf):
        import dataclasses
        ham = dataclasses.replace(cole_hopf.hamiltonian,
                                  coercivity_radius=lambda y: 0.1 * y)
        bad = dataclasses.replace(cole_hopf, hamiltonian=ham)
        issues = ss.validate_declarations(bad)
        assert any("coercivity" in msg for msg in issues)

    def test_flags_nonconvex_hamiltonian(self, cole_hopf):
        import dataclasses
        ham = ss.HamiltonianSpec(
            eval=lambda t, x, p: -0.5 * np.asarray(p, dtype=float) ** 2,
            coercivity_radius=lambda y: max(2.0 * y, 0.0),
            tx_dependent=False)
        bad = dataclasses.replace(cole_hopf, hamiltonian=ham)
        issues = ss.validate_declarations(bad)
        assert any("convexity" in msg for msg in issues)
