"""Jet-space calculus: d_T, exterior d, the insertion derivations, the
Lagrange derivative and the reparameterisation generators.

The headline oracle here is independent of the operator implementation: the
source form produced by the Lagrange derivative is cross-checked against a
finite-difference Gateaux derivative of the action integral on random
polynomial test curves.
"""

from fractions import Fraction

import numpy as np
import pytest

from concircle import expr as ex
from concircle import jetcalc as jc
from concircle.errors import OrderOverflowError

U0, U1 = jc.uvar(0), jc.uvar(1)
UD0, UD1 = jc.udotvar(0), jc.udotvar(1)


def norm2():
    return U0 * U0 + U1 * U1


def kinetic():
    return ex.const(0.5) * norm2()


def frenet_flat():
    return (U0 * UD1 - U1 * UD0) / ex.powr(norm2(), Fraction(3, 2))


def length_flat(m):
    return ex.const(-m) * ex.sqrt(norm2())


@pytest.fixture(scope="module")
def env100():
    return jc.sample_jet_env(100, 42)


class TestTotalDerivative:
    def test_dT_of_position_is_velocity(self):
        assert jc.total_derivative(jc.xvar(0)) is jc.uvar(0)

    def test_leibniz(self, env100):
        f, g = U0 * ex.sin(jc.xvar(1)), UD1 + jc.xvar(0)
        lhs = jc.total_derivative(f * g)
        rhs = jc.total_derivative(f) * g + f * jc.total_derivative(g)
        rep = jc.check_zero([lhs - rhs], env100)
        assert rep.max_raw < 1e-12

    def test_commutes_with_exterior_d(self, env100):
        f = norm2()
        lhs = jc.exterior_d(jc.total_derivative(f))
        rhs = jc.total_derivative_form(jc.exterior_d(f))
        assert jc.check_form_zero(lhs - rhs, env100).max_raw < 1e-10

    def test_order_overflow(self):
        top = jc.jet_var(0, 7)
        with pytest.raises(OrderOverflowError):
            jc.total_derivative(top)

    def test_rejects_foreign_variables(self):
        with pytest.raises(ValueError):
            jc.total_derivative(ex.var("w0"))


class TestExteriorD:
    def test_d_of_position(self):
        form = jc.exterior_d(jc.xvar(0))
        assert list(form.coeffs) == [(0, 0)]
        assert form.coeffs[(0, 0)].is_const(1.0)

    def test_d_of_product(self, env100):
        form = jc.exterior_d(U0 * U1)
        assert form.coeffs[(0, 1)] is U1
        assert form.coeffs[(1, 1)] is U0

    def test_d_squared_zero(self, env100):
        f = ex.sin(jc.xvar(0)) * U1
        dd = jc.exterior_d1(jc.exterior_d(f))
        assert jc.check_form_zero(dd, env100).max_raw < 1e-12


class TestIota:
    def test_velocity_covector_drops_to_base(self):
        form = jc.iota(1, jc.Form1({(0, 1): ex.ONE}))
        assert form.coeffs == {(0, 0): ex.ONE}

    def test_factor_two_from_second_order(self):
        form = jc.iota(1, jc.Form1({(0, 2): ex.ONE}))
        assert form.coeffs[(0, 1)].is_const(2.0)

    def test_annihilates_below_grade(self):
        form = jc.iota(3, jc.Form1({(0, 2): ex.ONE}))
        assert not form.coeffs

    def test_factorial_ladder(self):
        base = jc.Form1({(0, 2): ex.ONE})
        twice = jc.iota(1, jc.iota(1, base))
        once = jc.iota(2, base)
        assert twice.coeffs[(0, 0)].is_const(2.0)
        assert once.coeffs[(0, 0)].is_const(2.0)

    def test_form2_derivation(self):
        f2 = jc.Form2()
        f2.add_term((0, 2), (1, 0), ex.ONE)
        out = jc.iota(1, f2)
        assert out.coefficient((0, 1), (1, 0)).is_const(2.0)


# ---------------------------------------------------------------------------
# the Gateaux oracle: action derivative on random polynomial curves
# ---------------------------------------------------------------------------

def _gateaux_source_check(L_expr, source_form, rng, n_curves=10, rel=2e-4):
    """d/de S[x + e*phi] at e=0 must equal \\int E_i(x(t)) phi^i(t) dt.

    phi vanishes to second order at the interval ends, killing all boundary
    terms of a second-order Lagrangian.  Quadrature: dense Simpson; the
    variation derivative: central difference in e.
    """
    ts = np.linspace(0.0, 1.0, 481)

    def simpson(vals):
        from scipy.integrate import simpson as simp
        return simp(vals, x=ts)

    def curve_env(coeffs, eps, phi_coeffs):
        env = {}
        for i in range(2):
            c = np.polynomial.polynomial.Polynomial(coeffs[i])
            bump = np.polynomial.polynomial.Polynomial(phi_coeffs[i]) \
                * np.polynomial.polynomial.Polynomial([0, 0, 1]) \
                * np.polynomial.polynomial.Polynomial([1, -2, 1])  # t^2 (1-t)^2
            total = c + eps * bump
            for k in range(4):
                env[jc.var_name(i, k)] = total.deriv(k)(ts) if k else total(ts)
        return env

    for _ in range(n_curves):
        coeffs = rng.uniform(-1.0, 1.0, (2, 5))
        coeffs[:, 1] += 2.0  # keep the velocity away from zero
        phi = rng.uniform(-1.0, 1.0, (2, 3))
        h = 1e-5
        sup = simpson(ex.evaluate(L_expr, curve_env(coeffs, h, phi)))
        sdn = simpson(ex.evaluate(L_expr, curve_env(coeffs, -h, phi)))
        gateaux = (sup - sdn) / (2 * h)
        env0 = curve_env(coeffs, 0.0, phi)
        integrand = np.zeros_like(ts)
        for i in range(2):
            bump = np.polynomial.polynomial.Polynomial(phi[i]) \
                * np.polynomial.polynomial.Polynomial([0, 0, 1]) \
                * np.polynomial.polynomial.Polynomial([1, -2, 1])
            e_i = source_form.coeffs.get((i, 0), ex.ZERO)
            integrand = integrand + ex.evaluate(e_i, env0) * bump(ts)
        direct = simpson(integrand)
        scale = max(abs(gateaux), abs(direct), 1e-6)
        assert abs(gateaux - direct) <= rel * scale, (gateaux, direct)


class TestLagrangeDerivative:
    def test_kinetic_source_form(self, env100, rng):
        source = jc.lagrange_derivative(kinetic())
        assert sorted(source.coeffs) == [(0, 0), (1, 0)]
        vals = jc.evaluate_batch([source.coeffs[(0, 0)],
                                  source.coeffs[(1, 0)]], env100)
        ref = np.stack([-env100[jc.var_name(0, 2)],
                        -env100[jc.var_name(1, 2)]])
        assert np.allclose(vals, ref, rtol=1e-13)

    def test_kinetic_against_gateaux_oracle(self, rng):
        _gateaux_source_check(kinetic(), jc.lagrange_derivative(kinetic()),
                              rng)

    def test_full_lagrangian_against_gateaux_oracle(self, rng):
        L = frenet_flat() + length_flat(1.0)
        _gateaux_source_check(L, jc.lagrange_derivative(L), rng)

    def test_higher_slots_cancel(self, env100):
        L = frenet_flat() + length_flat(1.0)
        full = jc.lagrange_series_full(L)
        extra = [c for (i, k), c in full.items() if k > 0]
        assert extra, "series should reach higher covectors before cancelling"
        assert jc.check_zero(extra, env100).max_raw < 1e-12

    @pytest.mark.parametrize("m", [0.5, 1.0, 2.0])
    def test_delta_squared_zero(self, env100, m):
        for L in (kinetic(), length_flat(m), frenet_flat(),
                  frenet_flat() + length_flat(m)):
            h2 = jc.lagrange_derivative1(jc.lagrange_derivative(L))
            rep = jc.check_form_zero(h2, env100)
            assert rep.passed, (m, rep.max_scaled)

    def test_total_derivatives_are_null_lagrangians(self, env100):
        f = ex.sin(jc.xvar(0)) * U1
        source = jc.lagrange_derivative(jc.total_derivative(f))
        assert jc.check_form_zero(source, env100).max_raw < 1e-9

    def test_nondegenerate_second_order_lagrangian(self, env100):
        # L quadratic in u-dot: the source form is genuinely fourth order
        # and its obstruction needs jet variables up to order 7 (the cap)
        L = ex.const(0.5) * (UD0 * UD0 + UD1 * UD1) - kinetic()
        source = jc.lagrange_derivative(L)
        vals = jc.evaluate_batch([source.coeffs[(i, 0)] for i in range(2)],
                                 env100)
        # E_i = u''''_i + u''_i by hand (Ostrogradsky for this L)
        ref = np.stack([env100[jc.var_name(i, 4)] + env100[jc.var_name(i, 2)]
                        for i in range(2)])
        assert np.allclose(vals, ref, rtol=1e-12, atol=1e-12)
        h2 = jc.lagrange_derivative1(source)
        assert jc.check_form_zero(h2, env100).passed


class TestVariationality:
    def test_rejects_symmetric_top_coefficient(self):
        bad = jc.Form1({(0, 0): jc.jet_var(0, 3), (1, 0): jc.jet_var(1, 3)})
        rep = jc.variationality_check(bad, jc.sample_jet_points(100, 42))
        assert not rep.passed
        assert rep.max_residual > 1e-3

    def test_accepts_antisymmetric_top_coefficient(self, env100):
        # E_i = e_ij u''^j comes from L = -1/2 e_ij u^i u'^j
        good = jc.Form1({(0, 0): jc.jet_var(1, 3),
                         (1, 0): ex.neg(jc.jet_var(0, 3))})
        rep = jc.variationality_check(good, jc.sample_jet_points(100, 42))
        assert rep.passed
        L = ex.const(-0.5) * (U0 * UD1 - U1 * UD0)
        source = jc.lagrange_derivative(L)
        resid = [ex.sub(source.coeffs[(i, 0)], c)
                 for i, c in ((0, jc.jet_var(1, 3)),
                              (1, ex.neg(jc.jet_var(0, 3))))]
        assert jc.check_zero(resid, env100).max_raw < 1e-9

    def test_requires_source_slots(self):
        with pytest.raises(ValueError):
            jc.variationality_check(jc.Form1({(0, 1): ex.ONE}), [])


class TestZetaFields:
    def test_zermelo_for_length(self):
        samples = jc.sample_jet_points(100, 42)
        res = jc.zermelo_check(length_flat(1.0), samples)
        assert res.max_zeta1 < 1e-10 and res.max_zeta2 < 1e-10

    def test_parameter_independence_of_frenet(self):
        samples = jc.sample_jet_points(100, 42)
        res = jc.param_independence_check(frenet_flat(), samples)
        assert res.max_zeta1 < 1e-10 and res.max_zeta2 < 1e-10

    def test_kinetic_fails_zermelo(self):
        samples = jc.sample_jet_points(50, 42)
        res = jc.zermelo_check(kinetic(), samples)
        # zeta_1 L - L = 1/2|u|^2 != 0 (homogeneity degree 2)
        expected = 0.5 * (jc.env_from_points(samples)[jc.var_name(0, 1)] ** 2
                          + jc.env_from_points(samples)[jc.var_name(1, 1)] ** 2)
        assert np.allclose(res.zeta1, expected, rtol=1e-12)
        assert res.max_zeta2 < 1e-12

    def test_zeta2_is_u_contracted_udot_gradient(self, rng):
        f = frenet_flat() * ex.sin(jc.xvar(0)) + UD0 * UD0
        z2 = jc.zeta_apply(2, f)
        ref = U0 * ex.diff(f, jc.var_name(0, 2)) \
            + U1 * ex.diff(f, jc.var_name(1, 2))
        assert z2 is ref  # identical construction, hash-consed

    def test_rejects_high_order(self):
        with pytest.raises(ValueError):
            jc.zeta_apply(1, jc.jet_var(0, 3))


class TestSampling:
    def test_components_away_from_zero(self):
        env = jc.sample_jet_env(200, 7)
        for name, vals in env.items():
            assert np.all((np.abs(vals) >= 0.5) & (np.abs(vals) <= 2.0))

    def test_deterministic_given_seed(self):
        a = jc.sample_jet_env(50, 11)
        b = jc.sample_jet_env(50, 11)
        assert all(np.array_equal(a[k], b[k]) for k in a)

    def test_seed_changes_samples(self):
        a = jc.sample_jet_env(50, 11)
        b = jc.sample_jet_env(50, 12)
        assert not np.array_equal(a[jc.var_name(0, 0)], b[jc.var_name(0, 0)])

    def test_jet_point_env_round_trip(self):
        pts = jc.sample_jet_points(5, 3)
        env = jc.env_from_points(pts)
        assert env[jc.var_name(1, 4)][2] == pts[2].values[1, 4]

    def test_jet_point_validation(self):
        with pytest.raises(ValueError):
            jc.JetPoint(np.full((2, 8), np.nan))
        with pytest.raises(ValueError):
            jc.JetPoint(np.zeros((3, 8)))

    def test_jet_var_named_tuple(self):
        v = jc.JetVar(1, 3)
        assert v.name == "x1_3"
        assert v.expr() is jc.jet_var(1, 3)
        assert jc.parse_var_name("x1_3") == v
        assert jc.parse_var_name("w0") is None


def test_residual_report_serialises_to_csv(tmp_path):
    env = jc.sample_jet_env(5, 42)
    form = jc.exterior_d(kinetic())
    rep = jc.check_form_zero(form, env)
    rows = rep.csv_rows()
    assert len(rows) == 2 * 5
    assert rows[0][1] == jc.slot_label((0, 1))
    out = tmp_path / "resid.csv"
    rep.write_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0] == "point,coefficient,value"
    assert len(lines) == 11
