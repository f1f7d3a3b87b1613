"""Metric-derived geometry on a 2-manifold.

Everything is built symbolically once per metric (Christoffel symbols,
curvature, area element, covariant derivatives along a curve) and evaluated
numerically afterwards.

Sign conventions, fixed here and relied on everywhere downstream:

* orientation sigma = +1 by default; the area covector is
  ``e_ij = sigma * sqrt(|det g|) * eps_ij`` with eps_01 = +1;
* the curvature tensor ``R_{ljq}^i`` is pinned operationally by the
  covariant commutator identity ``(Du)'^i = (Dw)^i + R_{ljq}^i u^j u^q dx^l``
  (see :func:`commutator_check`): in terms of the connection this forces

      R_{ljq}^i = d_j Gamma^i_lq - d_l Gamma^i_jq
                  + Gamma^i_jm Gamma^m_lq - Gamma^i_lm Gamma^m_jq,

  i.e. the *negative* of the more common textbook ordering; with it the
  fully lowered tensor satisfies ``R_{ljqi} = K (g_lq g_ji - g_li g_jq)``
  with K = +1 on the unit sphere.

The covariant curve chart (x, u, w, w', w'') uses the plain variable names
``w0, w1, wp0, wp1, wpp0, wpp1`` next to the jet names of x and u; ``w`` is
the covariant acceleration u' = u-dot + Gamma u u.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import expr as ex
from . import jetcalc as jc
from .errors import (DegenerateMetricError, NullVelocityError,
                     OrderOverflowError)

EPS_VELOCITY = 1e-9  # floor under ||u|| wherever a norm is divided by

_LIFT = None  # built lazily: base coordinate names -> jet variables


def lift_base_expr(e: ex.Expr) -> ex.Expr:
    """Rename the human-facing base coordinates x0, x1 to their jet names."""
    global _LIFT
    if _LIFT is None:
        _LIFT = {"x0": jc.xvar(0), "x1": jc.xvar(1)}
    return ex.substitute(e, _LIFT)


def w_name(i: int, order: int = 0) -> str:
    return ("w", "wp", "wpp")[order] + str(i)


def wvar(i: int, order: int = 0) -> ex.Expr:
    return ex.var(w_name(i, order))


class Metric:
    """2x2 symmetric metric with expression components in x0, x1."""

    def __init__(self, g00: ex.Expr, g01: ex.Expr, g11: ex.Expr,
                 signature: str = "riemannian", orientation: int = 1,
                 name: Optional[str] = None,
                 base_intervals: Optional[Sequence] = None):
        if signature not in ("riemannian", "lorentzian"):
            raise ValueError("signature must be riemannian or lorentzian")
        if orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        self.base_components = (g00, g01, g11)
        self.g = [[lift_base_expr(g00), lift_base_expr(g01)],
                  [lift_base_expr(g01), lift_base_expr(g11)]]
        self.signature = signature
        self.orientation = orientation
        self.name = name
        self.base_intervals = (tuple(base_intervals) if base_intervals
                               else (jc.DEFAULT_INTERVALS,) * 2)
        self._curve_rate_memo: dict = {}

    def __repr__(self):
        label = self.name or ",".join(str(c) for c in self.base_components)
        return f"Metric({label}, {self.signature}, sigma={self.orientation:+d})"

    # -- symbolic derived fields -----------------------------------------

    @cached_property
    def det_expr(self) -> ex.Expr:
        g = self.g
        return g[0][0] * g[1][1] - g[0][1] * g[0][1]

    @cached_property
    def inverse_exprs(self) -> list:
        d = self.det_expr
        g = self.g
        return [[g[1][1] / d, ex.neg(g[0][1]) / d],
                [ex.neg(g[0][1]) / d, g[0][0] / d]]

    @cached_property
    def christoffel_exprs(self) -> list:
        """Gamma[i][l][j], symmetric in (l, j)."""
        g, ginv = self.g, self.inverse_exprs
        xnames = [jc.var_name(0, 0), jc.var_name(1, 0)]
        dg = [[[ex.diff(g[a][b], xnames[q]) for q in range(2)]
               for b in range(2)] for a in range(2)]
        gamma = [[[ex.ZERO] * 2 for _ in range(2)] for _ in range(2)]
        for i in range(2):
            for l in range(2):
                for j in range(2):
                    acc = ex.ZERO
                    for m in range(2):
                        acc = acc + ginv[i][m] * (dg[m][j][l] + dg[m][l][j]
                                                  - dg[l][j][m])
                    gamma[i][l][j] = ex.const(0.5) * acc
        return gamma

    def riemann_exprs(self, convention: str = "pinned") -> list:
        """R[l][j][q][i] for R_{ljq}^i.

        ``pinned`` satisfies the covariant commutator identity; ``candidate``
        is its negative (the textbook ordering), kept so the pinning test can
        demonstrate the failure.
        """
        gamma = self.christoffel_exprs
        xnames = [jc.var_name(0, 0), jc.var_name(1, 0)]
        R = [[[[ex.ZERO] * 2 for _ in range(2)] for _ in range(2)]
             for _ in range(2)]
        for l in range(2):
            for j in range(2):
                for q in range(2):
                    for i in range(2):
                        acc = ex.diff(gamma[i][l][q], xnames[j]) \
                            - ex.diff(gamma[i][j][q], xnames[l])
                        for m in range(2):
                            acc = acc + (gamma[i][j][m] * gamma[m][l][q]
                                         - gamma[i][l][m] * gamma[m][j][q])
                        R[l][j][q][i] = acc
        if convention == "pinned":
            return R
        if convention == "candidate":
            return [[[[ex.neg(R[l][j][q][i]) for i in range(2)]
                      for q in range(2)] for j in range(2)] for l in range(2)]
        raise ValueError("convention must be 'pinned' or 'candidate'")

    @cached_property
    def gaussian_curvature_expr(self) -> ex.Expr:
        R = self.riemann_exprs()
        r0101 = ex.ZERO
        for m in range(2):
            r0101 = r0101 + self.g[1][m] * R[0][1][0][m]
        return r0101 / self.det_expr

    @cached_property
    def area_factor_expr(self) -> ex.Expr:
        """sigma * sqrt(|det g|); e_ij = area_factor * eps_ij."""
        return ex.const(float(self.orientation)) * ex.sqrt(ex.abs_(self.det_expr))

    @cached_property
    def u_norm_squared_expr(self) -> ex.Expr:
        u = [jc.uvar(0), jc.uvar(1)]
        acc = ex.ZERO
        for a in range(2):
            for b in range(2):
                acc = acc + self.g[a][b] * u[a] * u[b]
        return acc

    @cached_property
    def u_norm_expr(self) -> ex.Expr:
        q = self.u_norm_squared_expr
        if self.signature == "lorentzian":
            q = ex.abs_(q)
        return ex.sqrt(q)

    # -- numeric evaluation ----------------------------------------------

    def _base_env(self, x) -> Dict[str, float]:
        return {jc.var_name(0, 0): float(x[0]), jc.var_name(1, 0): float(x[1])}

    def components_at(self, x) -> np.ndarray:
        env = self._base_env(x)
        g = np.array([[ex.evaluate(self.g[a][b], env) for b in range(2)]
                      for a in range(2)])
        det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
        scale = np.abs(g).max()
        if abs(det) <= 1e-12 * scale * scale:
            raise DegenerateMetricError(f"det g ~ 0 at x = {tuple(x)}")
        return g

    def validate_signature_at(self, x) -> None:
        g = self.components_at(x)
        eigs = np.linalg.eigvalsh(g)
        positive = int(np.sum(eigs > 0))
        want = 2 if self.signature == "riemannian" else 1
        if positive != want:
            raise DegenerateMetricError(
                f"declared signature '{self.signature}' does not match "
                f"eigenvalue signs {tuple(np.sign(eigs))} at x = {tuple(x)}")

    def norm_u(self, x, v) -> Tuple[float, int]:
        """(||v||, sign of g(v,v)); rejects null/vanishing v."""
        g = self.components_at(x)
        v = np.asarray(v, dtype=float)
        q = float(v @ g @ v)
        scale = float(np.abs(g).max() * (v @ v))
        if abs(q) <= EPS_VELOCITY ** 2 + 1e-12 * scale:
            raise NullVelocityError(
                f"velocity is null or vanishing at x = {tuple(x)} (g(v,v) = {q:.3e})")
        return float(np.sqrt(abs(q))), (1 if q > 0 else -1)


# ---------------------------------------------------------------------------
# numeric field evaluation
# ---------------------------------------------------------------------------

def christoffel(metric: Metric, x) -> np.ndarray:
    """Gamma^i_{lj} values at x, shape (2, 2, 2), symmetric in (l, j)."""
    metric.components_at(x)  # degeneracy guard
    env = metric._base_env(x)
    gamma = metric.christoffel_exprs
    return np.array([[[ex.evaluate(gamma[i][l][j], env) for j in range(2)]
                      for l in range(2)] for i in range(2)])


def riemann(metric: Metric, x, convention: str = "pinned") -> np.ndarray:
    """R_{ljq}^i values at x, shape (2, 2, 2, 2) indexed [l, j, q, i]."""
    metric.components_at(x)
    env = metric._base_env(x)
    R = metric.riemann_exprs(convention)
    return np.array([[[[ex.evaluate(R[l][j][q][i], env) for i in range(2)]
                       for q in range(2)] for j in range(2)] for l in range(2)])


def gaussian_curvature(metric: Metric, x) -> float:
    metric.components_at(x)
    return float(ex.evaluate(metric.gaussian_curvature_expr,
                             metric._base_env(x)))


def wedge_norm(a, b, metric: Metric, x) -> float:
    """Signed area ||a ^ b|| = sigma * sqrt(|det g|) * (a0 b1 - a1 b0)."""
    g = metric.components_at(x)
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    sigma = float(metric.orientation)
    return float(sigma * np.sqrt(abs(det)) * (a[0] * b[1] - a[1] * b[0]))


def hodge_star(v, metric: Metric, x) -> np.ndarray:
    """(*v)^i = g^{im} v^j e_{jm} with e the metric area covector
    (rotation by +90 degrees on the flat plane with sigma = +1)."""
    g = metric.components_at(x)
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    sigma = float(metric.orientation)
    s = sigma * np.sqrt(abs(det))
    lowered = np.array([-s * v[1], s * v[0]])
    return np.linalg.solve(g, lowered)


# ---------------------------------------------------------------------------
# curve jets and the covariant chart
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CurveJet:
    """Numeric curve data: position x, velocity u, covariant acceleration
    w = u', optionally w' (third order) and w'' (fourth order)."""

    x: np.ndarray
    u: np.ndarray
    w: np.ndarray
    wp: Optional[np.ndarray] = None
    wpp: Optional[np.ndarray] = None

    def __post_init__(self):
        for field_name in ("x", "u", "w", "wp", "wpp"):
            v = getattr(self, field_name)
            if v is None:
                continue
            v = np.asarray(v, dtype=np.float64)
            if v.shape != (2,) or not np.all(np.isfinite(v)):
                raise ValueError(f"CurveJet.{field_name} must be 2 finite reals")
            object.__setattr__(self, field_name, v)

    def env(self) -> Dict[str, float]:
        out = {jc.var_name(i, 0): float(self.x[i]) for i in range(2)}
        out.update({jc.var_name(i, 1): float(self.u[i]) for i in range(2)})
        out.update({w_name(i, 0): float(self.w[i]) for i in range(2)})
        if self.wp is not None:
            out.update({w_name(i, 1): float(self.wp[i]) for i in range(2)})
        if self.wpp is not None:
            out.update({w_name(i, 2): float(self.wpp[i]) for i in range(2)})
        return out


def frenet_curvature(jet: CurveJet, metric: Metric) -> float:
    """Signed first curvature ||u ^ u'|| / ||u||^3 (orientation-dependent)."""
    n, _ = metric.norm_u(jet.x, jet.u)
    return wedge_norm(jet.u, jet.w, metric, jet.x) / n ** 3


def sample_curve_jets(metric: Metric, n_samples: int, seed: int,
                      orders: int = 3) -> List[CurveJet]:
    """Random curve jets with x inside the metric's chart and every other
    component bounded away from zero (same region as the jet sampler)."""
    rng = np.random.default_rng(seed)

    def draw(intervals):
        return jc.sample_from_intervals(rng, intervals, n_samples)

    xs = np.stack([draw(metric.base_intervals[i]) for i in range(2)], axis=1)
    comps = {name: np.stack([draw(jc.DEFAULT_INTERVALS) for _ in range(2)],
                            axis=1)
             for name in ("u", "w", "wp", "wpp")[:max(orders, 2)]}
    jets = []
    for p in range(n_samples):
        jets.append(CurveJet(
            xs[p], comps["u"][p], comps["w"][p],
            comps["wp"][p] if orders >= 3 else None,
            comps["wpp"][p] if orders >= 4 else None))
    return jets


def _gamma_uu_exprs(metric: Metric, vec_names) -> List[ex.Expr]:
    gamma = metric.christoffel_exprs
    u = [jc.uvar(0), jc.uvar(1)]
    vec = [ex.var(vec_names[0]), ex.var(vec_names[1])]
    out = []
    for i in range(2):
        acc = ex.ZERO
        for a in range(2):
            for b in range(2):
                acc = acc + gamma[i][a][b] * u[a] * vec[b]
        out.append(acc)
    return out


def curve_rates(metric: Metric) -> Dict[str, ex.Expr]:
    """d/dt of every covariant-chart variable along the curve."""
    rates = {}
    u = [jc.uvar(0), jc.uvar(1)]
    gamma_uu = _gamma_uu_exprs(metric, (jc.var_name(0, 1), jc.var_name(1, 1)))
    gamma_uw = _gamma_uu_exprs(metric, (w_name(0), w_name(1)))
    gamma_uwp = _gamma_uu_exprs(metric, (w_name(0, 1), w_name(1, 1)))
    for i in range(2):
        rates[jc.var_name(i, 0)] = u[i]
        rates[jc.var_name(i, 1)] = wvar(i) - gamma_uu[i]
        rates[w_name(i, 0)] = wvar(i, 1) - gamma_uw[i]
        rates[w_name(i, 1)] = wvar(i, 2) - gamma_uwp[i]
    return rates


def curve_total_derivative(metric: Metric, f: ex.Expr) -> ex.Expr:
    """Total t-derivative of a covariant-chart function along the curve,
    using u-dot = w - Gamma u u and (covariant) w-dot = w' - Gamma u w."""
    key = f.serial
    hit = metric._curve_rate_memo.get(key)
    if hit is not None:
        return hit
    rates = curve_rates(metric)
    acc = ex.ZERO
    for name in sorted(f.vars):
        rate = rates.get(name)
        if rate is None:
            raise OrderOverflowError(
                f"no curve rate for variable '{name}' (needs a higher-order jet)")
        acc = ex.add(acc, ex.mul(rate, ex.diff(f, name)))
    metric._curve_rate_memo[key] = acc
    return acc


def covariant_prime_vector_exprs(metric: Metric,
                                 xi: Sequence[ex.Expr]) -> List[ex.Expr]:
    """xi'^i = d_T xi^i + Gamma^i_{lj} u^l xi^j along the curve."""
    gamma = metric.christoffel_exprs
    u = [jc.uvar(0), jc.uvar(1)]
    out = []
    for i in range(2):
        acc = curve_total_derivative(metric, xi[i])
        for l in range(2):
            for j in range(2):
                acc = acc + gamma[i][l][j] * u[l] * xi[j]
        out.append(acc)
    return out


def covariant_prime_covector_exprs(metric: Metric,
                                   sigma: Sequence[ex.Expr]) -> List[ex.Expr]:
    """sigma'_i = d_T sigma_i - Gamma^l_{ji} u^j sigma_l along the curve."""
    gamma = metric.christoffel_exprs
    u = [jc.uvar(0), jc.uvar(1)]
    out = []
    for i in range(2):
        acc = curve_total_derivative(metric, sigma[i])
        for l in range(2):
            for j in range(2):
                acc = acc - gamma[l][j][i] * u[j] * sigma[l]
        out.append(acc)
    return out


def covariant_prime_vector(xi: Sequence[ex.Expr], jet: CurveJet,
                           metric: Metric) -> np.ndarray:
    exprs = covariant_prime_vector_exprs(metric, list(xi))
    env = jet.env()
    return np.array([ex.evaluate(e, env) for e in exprs])


def covariant_prime_covector(sigma: Sequence[ex.Expr], jet: CurveJet,
                             metric: Metric) -> np.ndarray:
    exprs = covariant_prime_covector_exprs(metric, list(sigma))
    env = jet.env()
    return np.array([ex.evaluate(e, env) for e in exprs])


def udot_exprs(metric: Metric) -> List[ex.Expr]:
    """u-dot^i = w^i - Gamma^i u u (inverts the covariant acceleration)."""
    gamma_uu = _gamma_uu_exprs(metric, (jc.var_name(0, 1), jc.var_name(1, 1)))
    return [wvar(i) - gamma_uu[i] for i in range(2)]


def uddot_exprs(metric: Metric) -> List[ex.Expr]:
    return [curve_total_derivative(metric, e) for e in udot_exprs(metric)]


def flat_env_from_curvejet(metric: Metric, jet: CurveJet,
                           orders: int = 3) -> Dict[str, float]:
    """Numeric flat-chart jet values (x, u, u-dot, u-double-dot, ...) derived
    from covariant curve data; raises if the curve jet is too short."""
    env = jet.env()
    out = {jc.var_name(i, 0): env[jc.var_name(i, 0)] for i in range(2)}
    out.update({jc.var_name(i, 1): env[jc.var_name(i, 1)] for i in range(2)})
    if orders >= 2:
        for i, e in enumerate(udot_exprs(metric)):
            out[jc.var_name(i, 2)] = float(ex.evaluate(e, env))
    if orders >= 3:
        for i, e in enumerate(uddot_exprs(metric)):
            out[jc.var_name(i, 3)] = float(ex.evaluate(e, env))
    if orders >= 4:
        third = [curve_total_derivative(metric, e) for e in uddot_exprs(metric)]
        for i, e in enumerate(third):
            out[jc.var_name(i, 4)] = float(ex.evaluate(e, env))
    return out


def cov_to_flat_substitution(metric: Metric) -> Dict[str, ex.Expr]:
    """Symbolic substitution turning covariant-chart expressions into
    flat-chart jet expressions (w -> u-dot + Gamma u u, and the primes)."""
    gamma_uu = _gamma_uu_exprs(metric, (jc.var_name(0, 1), jc.var_name(1, 1)))
    w_flat = [jc.udotvar(i) + gamma_uu[i] for i in range(2)]
    sub = {w_name(i): w_flat[i] for i in range(2)}

    def prime(vec):
        gamma = metric.christoffel_exprs
        u = [jc.uvar(0), jc.uvar(1)]
        out = []
        for i in range(2):
            acc = jc.total_derivative(vec[i])
            for l in range(2):
                for j in range(2):
                    acc = acc + gamma[i][l][j] * u[l] * vec[j]
            out.append(acc)
        return out

    wp_flat = prime(w_flat)
    wpp_flat = prime(wp_flat)
    sub.update({w_name(i, 1): wp_flat[i] for i in range(2)})
    sub.update({w_name(i, 2): wpp_flat[i] for i in range(2)})
    return sub


# ---------------------------------------------------------------------------
# the commutator identity (pins the curvature sign)
# ---------------------------------------------------------------------------

def _Du_forms(metric: Metric) -> List[jc.Form1]:
    """(Du)^i = du^i + Gamma^i_{lj} u^j dx^l as jet-space 1-forms."""
    gamma = metric.christoffel_exprs
    u = [jc.uvar(0), jc.uvar(1)]
    out = []
    for i in range(2):
        f = jc.Form1()
        f.add_term((i, 1), ex.ONE)
        for l in range(2):
            acc = ex.ZERO
            for j in range(2):
                acc = acc + gamma[i][l][j] * u[j]
            f.add_term((l, 0), acc)
        out.append(f)
    return out


def _form_times(form: jc.Form1, factor: ex.Expr) -> jc.Form1:
    out = jc.Form1()
    for slot, c in form.items():
        out.add_term(slot, ex.mul(factor, c))
    return out


def commutator_residual_forms(metric: Metric,
                              convention: str = "pinned") -> List[jc.Form1]:
    """LHS - RHS of the curvature commutator, one 1-form per vector index."""
    gamma = metric.christoffel_exprs
    R = metric.riemann_exprs(convention)
    u = [jc.uvar(0), jc.uvar(1)]
    Du = _Du_forms(metric)

    gamma_uu = _gamma_uu_exprs(metric, (jc.var_name(0, 1), jc.var_name(1, 1)))
    w_flat = [jc.udotvar(i) + gamma_uu[i] for i in range(2)]

    out = []
    for i in range(2):
        lhs = jc.total_derivative_form(Du[i])
        for j in range(2):
            factor = ex.ZERO
            for m in range(2):
                factor = factor + gamma[i][m][j] * u[m]
            lhs = lhs + _form_times(Du[j], factor)

        rhs = jc.exterior_d(w_flat[i])
        for l in range(2):
            acc = ex.ZERO
            for j in range(2):
                acc = acc + gamma[i][l][j] * w_flat[j]
            for j in range(2):
                for q in range(2):
                    acc = acc + R[l][j][q][i] * u[j] * u[q]
            rhs.add_term((l, 0), acc)
        out.append(lhs - rhs)
    return out


def commutator_check(metric: Metric, n_samples: int = 50, seed: int = 42,
                     convention: str = "pinned") -> float:
    """Max |coefficient| of the commutator residual over random third-order
    jets; ~0 pins the curvature sign convention."""
    env = jc.sample_jet_env(n_samples, seed,
                            base_intervals=metric.base_intervals)
    worst = 0.0
    for form in commutator_residual_forms(metric, convention):
        rep = jc.check_form_zero(form, env)
        worst = max(worst, rep.max_raw)
    return worst


def first_order_commutation_check(metric: Metric, n_samples: int = 50,
                                  seed: int = 42) -> float:
    """Residual of (dx)' = Du (the first-order derivations commute)."""
    gamma = metric.christoffel_exprs
    u = [jc.uvar(0), jc.uvar(1)]
    Du = _Du_forms(metric)
    env = jc.sample_jet_env(n_samples, seed,
                            base_intervals=metric.base_intervals)
    worst = 0.0
    for i in range(2):
        dx_form = jc.Form1({(i, 0): ex.ONE})
        lhs = jc.total_derivative_form(dx_form)
        for j in range(2):
            factor = ex.ZERO
            for m in range(2):
                factor = factor + gamma[i][m][j] * u[m]
            lhs = lhs + _form_times(jc.Form1({(j, 0): ex.ONE}), factor)
        rep = jc.check_form_zero(lhs - Du[i], env)
        worst = max(worst, rep.max_raw)
    return worst


# ---------------------------------------------------------------------------
# built-in metrics
# ---------------------------------------------------------------------------

_POSITIVE_INTERVALS = ((0.5, 2.0),)


def metric_flat() -> Metric:
    return Metric(ex.ONE, ex.ZERO, ex.ONE, name="flat")


def metric_polar_flat() -> Metric:
    x0 = ex.var("x0")
    return Metric(ex.ONE, ex.ZERO, x0 * x0, name="polar-flat",
                  base_intervals=(_POSITIVE_INTERVALS,
                                  jc.DEFAULT_INTERVALS))


def metric_sphere(radius: float = 1.0) -> Metric:
    r2 = ex.const(radius * radius)
    s = ex.sin(ex.var("x0"))
    return Metric(r2, ex.ZERO, r2 * s * s, name=f"sphere({radius:g})")


def metric_hyperbolic() -> Metric:
    x1 = ex.var("x1")
    inv = ex.ONE / (x1 * x1)
    return Metric(inv, ex.ZERO, inv, name="hyperbolic",
                  base_intervals=(jc.DEFAULT_INTERVALS,
                                  _POSITIVE_INTERVALS))


def metric_lorentz_flat() -> Metric:
    return Metric(ex.ONE, ex.ZERO, ex.const(-1.0), signature="lorentzian",
                  name="lorentz-flat")


_SPHERE_RE = re.compile(r"^sphere\((\d+(?:\.\d+)?)\)$")

BUILTIN_METRICS = ("flat", "polar-flat", "sphere(r)", "hyperbolic",
                   "lorentz-flat")


def metric_by_name(name: str) -> Metric:
    text = name.strip()
    if text == "flat":
        return metric_flat()
    if text == "polar-flat":
        return metric_polar_flat()
    if text == "hyperbolic":
        return metric_hyperbolic()
    if text == "lorentz-flat":
        return metric_lorentz_flat()
    m = _SPHERE_RE.match(text)
    if m:
        radius = float(m.group(1))
        if radius <= 0:
            raise ValueError("sphere radius must be positive")
        return metric_sphere(radius)
    raise ValueError(f"unknown metric name '{name}' "
                     f"(builtins: {', '.join(BUILTIN_METRICS)})")
