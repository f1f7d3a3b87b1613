"""Command-line surface: scenario configs in, CSV reports and trajectories out.

Commands
--------
check-metric        Christoffel identity, curvature reconstruction, K report.
verify-operators    The operator identities of the jet calculus and the
                    covariant momenta relations on the configured metric.
verify-variational  The flat inverse-problem source form: variationality,
                    agreement with its generating Lagrangian, straight lines
                    among solutions, constancy of k along solutions.
integrate           One trajectory with conservation diagnostics.
convergence         Observed integrator order on the configured scenario.

Exit codes: 0 all checks passed, 1 check failures, 2 configuration error,
3 runtime computation error.  Log verbosity via CONCIRCLE_LOG
(error|warn|info|debug).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from . import expr as ex
from . import geometry as geo
from . import integrate as ig
from . import jetcalc as jc
from . import mechanics as mech
from .config import (ScenarioConfig, apply_overrides, load_config,
                     write_effective)
from .errors import ConcircleError, ConfigError

log = logging.getLogger("concircle")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_COMPUTATION = 3


def _fmt(v: float) -> str:
    return f"{v:.17g}"


@dataclass
class ReportRow:
    check: str
    location: str
    residual: float
    tolerance: float

    @property
    def verdict(self) -> str:
        return "pass" if self.residual <= self.tolerance else "fail"


def write_report(rows: List[ReportRow], path: Path) -> bool:
    """Write rows sorted by (check, location); returns overall pass."""
    rows = sorted(rows, key=lambda r: (r.check, r.location))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["check", "location", "residual", "tolerance",
                         "verdict"])
        for r in rows:
            writer.writerow([r.check, r.location, _fmt(r.residual),
                             _fmt(r.tolerance), r.verdict])
    ok = all(r.verdict == "pass" for r in rows)
    for r in rows:
        line = (f"{r.verdict.upper():4s} {r.check:36s} {r.location:12s} "
                f"residual={r.residual:.3e} tol={r.tolerance:.3e}")
        print(line)
    return ok


_KNOWN_K = {"flat": 0.0, "polar-flat": 0.0, "hyperbolic": -1.0,
            "lorentz-flat": 0.0}


def _reference_curvature(metric: geo.Metric) -> Optional[float]:
    name = metric.name or ""
    if name in _KNOWN_K:
        return _KNOWN_K[name]
    if name.startswith("sphere("):
        radius = float(name[7:-1])
        return 1.0 / (radius * radius)
    return None


def _metric_points(metric: geo.Metric, n: int, seed: int) -> np.ndarray:
    env = jc.sample_jet_env(n, seed, order_cap=0,
                            base_intervals=metric.base_intervals)
    return np.stack([env[jc.var_name(0, 0)], env[jc.var_name(1, 0)]], axis=1)


def cmd_check_metric(cfg: ScenarioConfig, out: Path) -> int:
    metric = cfg.metric.build()
    zt = cfg.verification
    rows: List[ReportRow] = []

    pts = _metric_points(metric, zt.n_samples, zt.seed)
    kpts = _metric_points(metric, 20, zt.seed + 1)

    gamma = metric.christoffel_exprs
    xnames = [jc.var_name(0, 0), jc.var_name(1, 0)]
    # metricity identity: g_{jl} G^l_{qi} + g_{il} G^l_{qj} = d g_ij / d x^q
    for p, x in enumerate(pts):
        env = metric._base_env(x)
        worst = 0.0
        for i in range(2):
            for j in range(2):
                for q in range(2):
                    lhs = 0.0
                    for l in range(2):
                        lhs += ex.evaluate(metric.g[j][l] * gamma[l][q][i]
                                           + metric.g[i][l] * gamma[l][q][j],
                                           env)
                    rhs = ex.evaluate(ex.diff(metric.g[i][j], xnames[q]), env)
                    worst = max(worst, abs(lhs - rhs))
        rows.append(ReportRow("christoffel-identity", f"point{p:03d}", worst,
                              1e-9))

    R = metric.riemann_exprs()
    for p, x in enumerate(pts):
        env = metric._base_env(x)
        g = metric.components_at(x)
        K = ex.evaluate(metric.gaussian_curvature_expr, env)
        worst = 0.0
        for l in range(2):
            for j in range(2):
                for q in range(2):
                    for i in range(2):
                        low = sum(g[i, mm] * ex.evaluate(R[l][j][q][mm], env)
                                  for mm in range(2))
                        rec = K * (g[l, q] * g[j, i] - g[l, i] * g[j, q])
                        worst = max(worst, abs(low - rec))
        rows.append(ReportRow("riemann-reconstruction", f"point{p:03d}",
                              worst, 1e-8))

    # the K report: the value itself (informational), plus the deviation
    # from the known constant curvature when the metric is a builtin
    kref = _reference_curvature(metric)
    for p, x in enumerate(kpts):
        K = geo.gaussian_curvature(metric, x)
        rows.append(ReportRow("gaussian-curvature-value", f"point{p:03d}",
                              K, float("inf")))
        if kref is not None:
            rows.append(ReportRow("gaussian-curvature-error", f"point{p:03d}",
                                  abs(K - kref), 1e-8))

    ok = write_report(rows, out / "check_metric.csv")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _corpus(metric: geo.Metric, m: float) -> List[mech.Lagrangian]:
    return [mech.lagrangian_kinetic(metric),
            mech.lagrangian_length(metric, max(m, 0.5)),
            mech.lagrangian_frenet(metric),
            mech.lagrangian_geodesic_circle(metric, max(m, 0.5))]


def cmd_verify_operators(cfg: ScenarioConfig, out: Path) -> int:
    metric = cfg.metric.build()
    zt = cfg.verification
    rows: List[ReportRow] = []
    env = jc.sample_jet_env(zt.n_samples, zt.seed,
                            base_intervals=metric.base_intervals)

    u2 = jc.uvar(0) * jc.uvar(0) + jc.uvar(1) * jc.uvar(1)
    d_dT = jc.exterior_d(jc.total_derivative(u2))
    dT_d = jc.total_derivative_form(jc.exterior_d(u2))
    rows.append(ReportRow("dT-commutes-with-d", "batch",
                          jc.check_form_zero(d_dT - dT_d, env).max_raw, 1e-10))

    f = ex.sin(jc.xvar(0)) * jc.uvar(1)
    dd = jc.exterior_d1(jc.exterior_d(f))
    rows.append(ReportRow("d-squared-zero", "batch",
                          jc.check_form_zero(dd, env).max_raw, 1e-12))

    ladder = jc.iota(1, jc.iota(1, jc.Form1({(0, 2): ex.ONE}))) \
        - jc.iota(2, jc.Form1({(0, 2): ex.ONE})).scaled(1.0)
    rows.append(ReportRow("iota-factorial-ladder", "exact",
                          jc.check_form_zero(ladder, env).max_raw, 0.0))

    for L in _corpus(metric, cfg.m):
        h2 = jc.lagrange_derivative1(jc.lagrange_derivative(L.flat_expr))
        rep = jc.check_form_zero(h2, env, zt)
        rows.append(ReportRow(f"delta-squared[{L.label}]", "batch",
                              rep.max_scaled, 1.0))

    null_l = jc.total_derivative(f)
    rows.append(ReportRow("delta-of-total-derivative", "batch",
                          jc.check_form_zero(
                              jc.lagrange_derivative(null_l), env).max_raw,
                          1e-9))

    L_gc = mech.lagrangian_geodesic_circle(metric, max(cfg.m, 0.5))
    rows.append(ReportRow("momenta-relation-flat", "batch",
                          jc.check_form_zero(
                              mech.momenta_relation_flat_residual(L_gc),
                              env).max_raw, 1e-9))
    rows.append(ReportRow("momenta-relation-covariant", "batch",
                          jc.check_form_zero(
                              mech.momenta_relation_covariant_residual(L_gc),
                              env).max_raw, 1e-8))

    ha, hb = mech.hamilton_exprs(L_gc)
    rows.append(ReportRow("hamilton-two-routes", "batch",
                          jc.check_zero([ha - hb], env).max_raw, 1e-10))
    k_flat = ex.substitute(mech.frenet_expr_cov(metric),
                           geo.cov_to_flat_substitution(metric))
    rows.append(ReportRow("hamilton-equals-minus-k", "batch",
                          jc.check_zero([ha + k_flat], env).max_raw, 1e-8))

    rows.append(ReportRow("commutator-eq8", "batch",
                          geo.commutator_check(metric, 50, zt.seed), 1e-8))
    rows.append(ReportRow("first-order-commute-eq9", "batch",
                          geo.first_order_commutation_check(metric, 50,
                                                            zt.seed), 1e-12))

    canc = mech.frenet_horizontal_cancellation_exprs(metric)
    jets = geo.sample_curve_jets(metric, zt.n_samples, zt.seed, orders=2)
    cenv = {name: np.array([j.env()[name] for j in jets])
            for name in sorted(set().union(*(c.vars for c in canc)) |
                               {jc.var_name(i, k) for i in range(2)
                                for k in range(2)} |
                               {geo.w_name(i) for i in range(2)})}
    rows.append(ReportRow("frenet-horizontal-cancellation", "batch",
                          jc.check_zero(canc, cenv).max_raw, 1e-9))

    worst = 0.0
    for jet in geo.sample_curve_jets(metric, 50, zt.seed, orders=2):
        worst = max(worst, mech.spin_rewrite_check(jet, metric))
    rows.append(ReportRow("spin-force-rewrite", "batch", worst, 1e-8))
    if metric.name == "flat":
        worst = 0.0
        for jet in geo.sample_curve_jets(metric, 50, zt.seed, orders=2):
            worst = max(worst, float(np.abs(mech.spin_force(jet, metric)).max()))
        rows.append(ReportRow("spin-force-flat-zero", "batch", worst, 1e-12))

    samples = jc.sample_jet_points(zt.n_samples, zt.seed,
                                   base_intervals=metric.base_intervals)
    zres = jc.zermelo_check(
        mech.lagrangian_length(metric, max(cfg.m, 0.5)).flat_expr, samples)
    rows.append(ReportRow("zermelo-length-part", "batch",
                          max(zres.max_zeta1, zres.max_zeta2), 1e-10))
    pres = jc.param_independence_check(k_flat, samples)
    rows.append(ReportRow("parameter-independence-frenet", "batch",
                          max(pres.max_zeta1, pres.max_zeta2), 1e-10))

    ok = write_report(rows, out / "verify_operators.csv")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_verify_variational(cfg: ScenarioConfig, out: Path) -> int:
    zt = cfg.verification
    rows: List[ReportRow] = []
    samples = jc.sample_jet_points(zt.n_samples, zt.seed)
    env = jc.env_from_points(samples)

    if cfg.corrupt_source_form:
        source = jc.Form1({(0, 0): jc.jet_var(0, 3),
                           (1, 0): jc.jet_var(1, 3)})
        label = "corrupted[u''_i]"
    else:
        source = mech.prop41_source_form(cfg.m)
        label = f"prop-source[m={cfg.m:g}]"
    rep = jc.variationality_check(source, samples, zt)
    rows.append(ReportRow(f"variationality {label}", "batch",
                          rep.max_scaled, 1.0))

    if not cfg.corrupt_source_form:
        flat = geo.metric_flat()
        L = mech.lagrangian_geodesic_circle(flat, cfg.m)
        delta = jc.lagrange_derivative(L.flat_expr)
        e41 = mech.prop41_exprs(cfg.m)
        diff = [ex.sub(delta.coeffs.get((i, 0), ex.ZERO), e41[i])
                for i in range(2)]
        drep = jc.check_zero(diff, env, zt)
        rows.append(ReportRow("delta-L-equals-source", "batch",
                              drep.max_scaled, 1.0))

        straight = dict(env)
        for i in range(2):
            for k in (2, 3):
                straight[jc.var_name(i, k)] = np.zeros_like(env[jc.var_name(i, k)])
        srep = jc.check_zero(e41, straight)
        rows.append(ReportRow("straight-lines-solve", "batch",
                              srep.max_raw, 1e-12))

        rows.append(ReportRow("k-constant-on-solutions", "batch",
                              _dtk_on_shell_residual(cfg.m, env), 1e-8))

    ok = write_report(rows, out / "verify_variational.csv")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _dtk_on_shell_residual(m: float, env) -> float:
    """Constrain u'' by solving the source form = 0, then evaluate d_T k."""
    e41 = mech.prop41_exprs(m)
    udd = [jc.var_name(0, 3), jc.var_name(1, 3)]
    M = [[ex.diff(e41[l], udd[j]) for j in range(2)] for l in range(2)]
    zero_udd = {udd[0]: ex.ZERO, udd[1]: ex.ZERO}
    c = [ex.substitute(e41[l], zero_udd) for l in range(2)]
    vals = jc.evaluate_batch([M[0][0], M[0][1], M[1][0], M[1][1], c[0], c[1]],
                             env)
    det = vals[0] * vals[3] - vals[1] * vals[2]
    udd0 = (vals[1] * vals[5] - vals[3] * vals[4]) / det
    udd1 = (vals[2] * vals[4] - vals[0] * vals[5]) / det
    flat = geo.metric_flat()
    k_flat = ex.substitute(mech.frenet_expr_cov(flat),
                           geo.cov_to_flat_substitution(flat))
    dtk = jc.total_derivative(k_flat)
    on_shell = dict(env)
    on_shell[udd[0]] = udd0
    on_shell[udd[1]] = udd1
    return float(np.abs(jc.evaluate_batch([dtk], on_shell)).max())


_TRAJ_HEADER = ["t", "x0", "x1", "u0", "u1", "w0", "w1", "speed", "k", "H",
                "S01"]


def cmd_integrate(cfg: ScenarioConfig, out: Path) -> int:
    metric = cfg.metric.build()
    initial = cfg.require_initial()
    res = ig.integrate(metric, cfg.integration.formulation, initial,
                       cfg.integration)

    with open(out / "trajectory.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_TRAJ_HEADER)
        for s in res.samples():
            writer.writerow([_fmt(v) for v in
                             (s.t, s.x[0], s.x[1], s.u[0], s.u[1], s.w[0],
                              s.w[1], s.speed, s.k, s.H, s.s01)])

    summary = res.summary()
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "value"])
        for key in sorted(summary):
            v = summary[key]
            writer.writerow([key, _fmt(v) if isinstance(v, float) else v])

    print(f"trajectory: {len(res)} samples, status: {res.message}")
    for key in sorted(summary):
        print(f"  {key} = {summary[key]}")
    return EXIT_OK if res.ok else EXIT_COMPUTATION


def cmd_convergence(cfg: ScenarioConfig, out: Path) -> int:
    metric = cfg.metric.build()
    initial = cfg.require_initial()
    res = ig.convergence_probe(metric, cfg.integration.formulation, initial,
                               cfg.integration, cfg.convergence_steps)
    with open(out / "convergence.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["h", "endpoint_error"])
        for h, e in res.as_rows():
            writer.writerow([_fmt(h), _fmt(e)])
        writer.writerow(["observed_order",
                         "inconclusive" if res.inconclusive
                         else _fmt(res.observed_order)])
    if res.inconclusive:
        print("observed order: inconclusive (non-monotone error sequence)")
    else:
        print(f"observed order: {res.observed_order:.3f}")
    return EXIT_OK


COMMANDS = {
    "check-metric": cmd_check_metric,
    "verify-operators": cmd_verify_operators,
    "verify-variational": cmd_verify_variational,
    "integrate": cmd_integrate,
    "convergence": cmd_convergence,
}


def _setup_logging() -> None:
    level = os.environ.get("CONCIRCLE_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="concircle",
        description="Variational geodesic circles on 2-D (pseudo-)Riemannian "
                    "metrics: operator checks, variationality tests and "
                    "trajectory integration.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario TOML")
        p.add_argument("--seed", type=int, default=None,
                       help="override verification seed (default 42)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--format", choices=["csv"], default="csv")
    return ap


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, seed=args.seed, out_dir=args.out)
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_effective(cfg, out / "effective.toml")
        return COMMANDS[args.command](cfg, out)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ConcircleError as err:
        print(f"computation error: {err}", file=sys.stderr)
        return EXIT_COMPUTATION


if __name__ == "__main__":
    sys.exit(main())
