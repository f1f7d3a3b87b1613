"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line
(run with ``pytest -s tests/test_acceptance.py`` to see them inline).

Every tolerance is pinned here, not configured elsewhere.
"""

import time
from fractions import Fraction

import numpy as np

from concircle import expr as ex
from concircle import geometry as geo
from concircle import integrate as ig
from concircle import jetcalc as jc
from concircle import mechanics as mech

SEED = 42
N_POINTS = 100


def report(criterion, ok, detail):
    print(f"\nACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def flat_corpus(m=1.0):
    u0, u1 = jc.uvar(0), jc.uvar(1)
    ud0, ud1 = jc.udotvar(0), jc.udotvar(1)
    n2 = u0 * u0 + u1 * u1
    k = (u0 * ud1 - u1 * ud0) / ex.powr(n2, Fraction(3, 2))
    length = ex.const(-m) * ex.sqrt(n2)
    return [("kinetic", ex.const(0.5) * n2),
            ("length", length),
            ("frenet", k),
            ("full", k + length)]


def test_criterion_1_delta_squared_is_zero():
    """delta^2 = 0 on the Lagrangian corpus, 1e-7 relative, under 10 s."""
    env = jc.sample_jet_env(N_POINTS, SEED)
    t0 = time.perf_counter()
    worst = 0.0
    for label, L in flat_corpus(1.0):
        h2 = jc.lagrange_derivative1(jc.lagrange_derivative(L))
        rep = jc.check_form_zero(h2, env,
                                 jc.ZeroTest(atol=1e-9, rtol=1e-7,
                                             n_samples=N_POINTS, seed=SEED))
        worst = max(worst, rep.max_scaled)
        assert rep.passed, (label, rep.max_scaled)
    elapsed = time.perf_counter() - t0
    report(1, worst <= 1.0 and elapsed < 10.0,
           f"max scaled residual {worst:.3e} (tol 1e-7 relative), "
           f"runtime {elapsed:.2f}s < 10s")


def test_criterion_2_flat_source_form():
    """The inverse-problem source form is variational and generated by the
    geodesic-circle Lagrangian, both to 1e-8."""
    env = jc.sample_jet_env(N_POINTS, SEED)
    samples = jc.sample_jet_points(N_POINTS, SEED)
    flat = geo.metric_flat()
    worst_var = 0.0
    worst_gen = 0.0
    for m in (0.5, 1.0, 2.0):
        rep = jc.variationality_check(mech.prop41_source_form(m), samples)
        worst_var = max(worst_var, rep.max_residual)
        delta = jc.lagrange_derivative(
            mech.lagrangian_geodesic_circle(flat, m).flat_expr)
        e41 = mech.prop41_exprs(m)
        vals_d = jc.evaluate_batch([delta.coeffs[(i, 0)] for i in range(2)],
                                   env)
        vals_e = jc.evaluate_batch(e41, env)
        rel = np.abs(vals_d - vals_e) / np.maximum(np.abs(vals_e), 1e-12)
        worst_gen = max(worst_gen, float(rel.max()))
    report(2, worst_var < 1e-8 and worst_gen < 1e-8,
           f"variationality residual {worst_var:.3e} < 1e-8, "
           f"generator mismatch {worst_gen:.3e} < 1e-8, m in {{0.5, 1, 2}}")


def _fit_circle(xy):
    """Algebraic (Kasa) circle fit; returns (radius, rms residual)."""
    A = np.column_stack([2 * xy[:, 0], 2 * xy[:, 1], np.ones(len(xy))])
    b = (xy ** 2).sum(axis=1)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    center = sol[:2]
    radius = np.sqrt(sol[2] + center @ center)
    dist = np.linalg.norm(xy - center, axis=1)
    return radius, float(np.sqrt(np.mean((dist - radius) ** 2)))


def test_criterion_3_flat_circles():
    """Unit-speed variational trajectories are circles of radius 1/m."""
    flat = geo.metric_flat()
    worst_rms = 0.0
    worst_close = 0.0
    worst_radius = 0.0
    for m in (0.5, 1.0, 2.0):
        cfg = ig.IntegratorConfig(method="rk4", h=1e-3,
                                  t_span=(0.0, 2 * np.pi / m), stride=10,
                                  formulation="euler_poisson", m=m)
        res = ig.integrate(flat, "euler_poisson",
                           ([0.0, 0.0], [1.0, 0.0], [0.0, -m]), cfg)
        assert res.ok
        radius, rms = _fit_circle(res.x)
        worst_rms = max(worst_rms, rms)
        worst_close = max(worst_close,
                          res.summary()["endpoint_return_distance"])
        worst_radius = max(worst_radius, abs(radius - 1.0 / m))
    report(3, worst_rms < 1e-6 and worst_close < 1e-6,
           f"circle-fit rms {worst_rms:.3e} < 1e-6, period closure "
           f"{worst_close:.3e} < 1e-6, radius error {worst_radius:.3e}, "
           f"m in {{0.5, 1, 2}}")


def test_criterion_4_constant_frenet_curvature():
    """Both formulations conserve k on flat, sphere and hyperbolic metrics;
    the Hamilton value equals -k at every sample."""
    scenarios = [
        ("flat", geo.metric_flat(),
         ([0.0, 0.0], [1.0, 0.0], [0.0, -1.0]), 1.0),
        ("sphere", geo.metric_sphere(1.0),
         ([np.pi / 2, 0.0], [0.0, -1.0], [-2.0, 0.0]), 2.0),
        ("hyperbolic", geo.metric_hyperbolic(),
         ([0.0, 1.0], [1.0, 0.0], [0.0, -2.0]), 2.0),
    ]
    worst_drift = 0.0
    worst_hk = 0.0
    for name, metric, initial, m in scenarios:
        for formulation in ("concircular", "euler_poisson"):
            cfg = ig.IntegratorConfig(method="rk4", h=1e-3,
                                      t_span=(0.0, 10.0), stride=10,
                                      formulation=formulation, m=m)
            res = ig.integrate(metric, formulation, initial, cfg)
            assert res.ok, (name, formulation, res.message)
            s = res.summary()
            worst_drift = max(worst_drift, s["k_drift"])
            worst_hk = max(worst_hk, s["hamilton_vs_minus_k"])
    report(4, worst_drift < 1e-6 and worst_hk < 1e-8,
           f"max |k(t) - k(0)| = {worst_drift:.3e} < 1e-6 and "
           f"max |H + k| = {worst_hk:.3e} < 1e-8 over both formulations "
           f"on flat/sphere/hyperbolic, t in [0, 10], rk4 h=1e-3")


def test_criterion_5_curvature_machinery():
    """Connection metricity to 1e-9; the commutator identity to 1e-8 (and
    its failure for the flipped convention); K = 0, +1, -1 to 1e-8."""
    rng = np.random.default_rng(SEED)
    metrics = {"flat": (geo.metric_flat(), 0.0),
               "sphere(1)": (geo.metric_sphere(1.0), 1.0),
               "hyperbolic": (geo.metric_hyperbolic(), -1.0)}

    worst_chris = 0.0
    xnames = [jc.var_name(0, 0), jc.var_name(1, 0)]
    for name, (metric, _) in metrics.items():
        env = jc.sample_jet_env(N_POINTS, SEED, order_cap=0,
                                base_intervals=metric.base_intervals)
        pts = np.stack([env[xnames[0]], env[xnames[1]]], axis=1)
        gamma = metric.christoffel_exprs
        for x in pts:
            e = {xnames[0]: x[0], xnames[1]: x[1]}
            G = np.array([[[float(ex.evaluate(gamma[i][l][j], e))
                            for j in range(2)] for l in range(2)]
                          for i in range(2)])
            g = metric.components_at(x)
            for i in range(2):
                for j in range(2):
                    for q in range(2):
                        lhs = sum(g[j, l] * G[l, q, i] + g[i, l] * G[l, q, j]
                                  for l in range(2))
                        rhs = float(ex.evaluate(
                            ex.diff(metric.g[i][j], xnames[q]), e))
                        worst_chris = max(worst_chris, abs(lhs - rhs))

    worst_comm = max(geo.commutator_check(m, 50, SEED)
                     for m, _ in metrics.values())
    flipped = geo.commutator_check(metrics["sphere(1)"][0], 50, SEED,
                                   convention="candidate")

    worst_K = 0.0
    for name, (metric, kref) in metrics.items():
        for _ in range(20):
            x = [jc.sample_from_intervals(rng, metric.base_intervals[0], 1)[0],
                 jc.sample_from_intervals(rng, metric.base_intervals[1], 1)[0]]
            worst_K = max(worst_K, abs(geo.gaussian_curvature(metric, x) - kref))

    ok = worst_chris < 1e-9 and worst_comm < 1e-8 and flipped > 1e-3 \
        and worst_K < 1e-8
    report(5, ok,
           f"metricity {worst_chris:.3e} < 1e-9, commutator {worst_comm:.3e} "
           f"< 1e-8 (flipped convention residual {flipped:.3e} > 1e-3), "
           f"K error {worst_K:.3e} < 1e-8 on flat/sphere(1)/hyperbolic")


def test_criterion_6_momenta_relations():
    """The defining momenta relation, flat chart and covariant chart."""
    env = jc.sample_jet_env(50, SEED)
    worst_flat = 0.0
    worst_cov = 0.0
    for metric in (geo.metric_flat(), geo.metric_sphere(1.0)):
        for L in (mech.lagrangian_kinetic(metric),
                  mech.lagrangian_geodesic_circle(metric, 1.0)):
            worst_flat = max(worst_flat, jc.check_form_zero(
                mech.momenta_relation_flat_residual(L), env).max_raw)
            worst_cov = max(worst_cov, jc.check_form_zero(
                mech.momenta_relation_covariant_residual(L), env).max_raw)
    report(6, worst_flat < 1e-8 and worst_cov < 1e-8,
           f"flat relation residual {worst_flat:.3e} < 1e-8, covariant "
           f"relation residual {worst_cov:.3e} < 1e-8 (flat and sphere, "
           f"50 jets)")


def test_criterion_7_spin_rewrite():
    """Both right-hand-side forms of the curvature force agree on the
    sphere; the force vanishes identically on a flat metric."""
    sphere = geo.metric_sphere(1.0)
    flat = geo.metric_flat()
    worst_rewrite = 0.0
    for jet in geo.sample_curve_jets(sphere, 50, SEED, orders=2):
        worst_rewrite = max(worst_rewrite, mech.spin_rewrite_check(jet, sphere))
    worst_flat = 0.0
    for jet in geo.sample_curve_jets(flat, 50, SEED, orders=2):
        worst_flat = max(worst_flat, float(np.abs(
            mech.spin_force(jet, flat)).max()))
    report(7, worst_rewrite < 1e-8 and worst_flat < 1e-12,
           f"rewrite mismatch {worst_rewrite:.3e} < 1e-8 on 50 sphere jets, "
           f"flat spin force {worst_flat:.3e} < 1e-12")


def test_criterion_8_negative_control():
    """A symmetric third-order leading coefficient must be rejected."""
    bad = jc.Form1({(0, 0): jc.jet_var(0, 3), (1, 0): jc.jet_var(1, 3)})
    rep = jc.variationality_check(bad, jc.sample_jet_points(N_POINTS, SEED))
    report(8, (not rep.passed) and rep.max_residual > 1e-3,
           f"variationality check rejects E_i = u''_i with residual "
           f"{rep.max_residual:.3e} > 1e-3 at the default seed")


def test_criterion_9_integrator_quality(tmp_path):
    """Observed rk4 order 4 +- 0.3 on the flat circle, and byte-identical
    CSV output across two runs of the same configuration."""
    flat = geo.metric_flat()
    initial = ([0.0, 0.0], [1.0, 0.0], [0.0, -1.0])
    cfg = ig.IntegratorConfig(method="rk4", h=1e-3,
                              t_span=(0.0, 2 * np.pi), stride=10,
                              formulation="euler_poisson", m=1.0)
    conv = ig.convergence_probe(flat, "euler_poisson", initial, cfg,
                                [4e-3, 2e-3, 1e-3])
    order_ok = (not conv.inconclusive
                and abs(conv.observed_order - 4.0) <= 0.3)

    from concircle.cli import main
    scenario = tmp_path / "circle.toml"
    scenario.write_text("""
[metric]
name = "flat"
[integration]
method = "rk4"
h = 1e-3
t_span = [0.0, 6.283185307179586]
stride = 10
formulation = "euler_poisson"
[integration.initial]
x = [0.0, 0.0]
u = [1.0, 0.0]
w = [0.0, -1.0]
""", encoding="utf-8")
    assert main(["integrate", "--config", str(scenario),
                 "--out", str(tmp_path / "a")]) == 0
    assert main(["integrate", "--config", str(scenario),
                 "--out", str(tmp_path / "b")]) == 0
    identical = ((tmp_path / "a" / "trajectory.csv").read_bytes()
                 == (tmp_path / "b" / "trajectory.csv").read_bytes())

    report(9, order_ok and identical,
           f"observed rk4 order {conv.observed_order:.3f} in 4.0 +- 0.3, "
           f"byte-identical trajectory CSV across two runs: {identical}")
