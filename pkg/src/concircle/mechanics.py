"""Third-order variational mechanics of geodesic circles in two dimensions.

The central Lagrangian is ``L = k - m ||u||`` where k is the (signed) Frenet
curvature ``||u ^ u'|| / ||u||^3``: its extremals are the curves of constant
Frenet curvature.  A Lagrangian is stored in the covariant curve chart
(x, u, w) with w = u' the covariant acceleration; the flat-chart view
L(x, u, u-dot) is obtained by substituting w = u-dot + Gamma u u.

Implemented here:

* generalized momenta, flat chart: p1 = dL/du-dot, p = dL/du - d_T p1;
* covariant momenta: pi1 = dL/dw, pi = dL/du - pi1' (covariant prime);
* the Hamilton function H = p1 u-dot + p u - L, cross-checked against the
  reparameterisation-generator identity H = zeta_1 L - d_T zeta_2 L - L;
* the covariant Euler-Poisson residual

      eps_l = [dL/dx^l - dL/du^i Gamma^i_lj u^j - dL/dw^i Gamma^i_lj w^j]
              - [pi'_l + pi1_i R_{ljq}^i u^j u^q]

  oriented so that on a flat metric it coincides with the source form
  delta L (coefficient-wise), and vanishes on solutions;
* the flat-space source form of the invariant inverse problem (E linear in
  u-double-dot, with first integral k) and its generating Lagrangian;
* the third-order acceleration w' for both trajectory formulations
  (concircular: w' = -g(w,w) u; variational: the 2x2 solve of eps = 0);
* the spin tensor S = u ^ w and the curvature (spin) force
  pi1_i R_{ljq}^i u^j u^q, together with the rewritten form
  R_{ljqi} u^j S^{qi} / (2 ||u|| ||u ^ w||): the contraction over the
  antisymmetric pair (q, i) counts each independent component once, hence
  the explicit 1/2 when summing over all q, i.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Dict, List, Sequence, Tuple

import numpy as np

from . import expr as ex
from . import geometry as geo
from . import jetcalc as jc
from .errors import ConcircleError, DomainError, SingularSolveError

U = [jc.uvar(0), jc.uvar(1)]
UDOT = [jc.udotvar(0), jc.udotvar(1)]
W = [geo.wvar(0), geo.wvar(1)]

DYNAMICS_VARS = (jc.var_name(0, 0), jc.var_name(1, 0),
                 jc.var_name(0, 1), jc.var_name(1, 1),
                 geo.w_name(0), geo.w_name(1))


class Lagrangian:
    """A second-order Lagrangian in the covariant chart, tied to its metric."""

    def __init__(self, expr_cov: ex.Expr, metric: geo.Metric, m: float = 0.0,
                 label: str = ""):
        if not np.isfinite(m) or m < 0:
            raise ValueError("m must be finite and >= 0")
        bad = [n for n in expr_cov.vars
               if jc.parse_var_name(n) is None and n not in
               (geo.w_name(0), geo.w_name(1))]
        if bad:
            raise ValueError(f"Lagrangian may depend on (x, u, w) only; got {bad}")
        orders = [k for (i, k), _ in jc._sorted_jet_vars(
            ex.substitute(expr_cov, {geo.w_name(i): jc.xvar(i) for i in range(2)}))]
        if orders and max(orders) > 1:
            raise ValueError("Lagrangian may depend on jet orders <= 1 plus w")
        self.expr_cov = expr_cov
        self.metric = metric
        self.m = float(m)
        self.label = label

    @cached_property
    def flat_expr(self) -> ex.Expr:
        """L(x, u, u-dot): the covariant w replaced via w = u-dot + Gamma u u."""
        return ex.substitute(self.expr_cov,
                             geo.cov_to_flat_substitution(self.metric))

    def __repr__(self):
        return f"Lagrangian({self.label or self.expr_cov}, m={self.m})"


def _u_norm_cubed(metric: geo.Metric):
    n2 = metric.u_norm_squared_expr
    if metric.signature == "lorentzian":
        n2 = ex.abs_(n2)
    return ex.powr(n2, Fraction(3, 2))


def frenet_expr_cov(metric: geo.Metric) -> ex.Expr:
    """k = ||u ^ w|| / ||u||^3 in the covariant chart (linear in w)."""
    area = metric.area_factor_expr
    wedge = U[0] * W[1] - U[1] * W[0]
    return area * wedge / _u_norm_cubed(metric)


def lagrangian_kinetic(metric: geo.Metric) -> Lagrangian:
    return Lagrangian(ex.const(0.5) * metric.u_norm_squared_expr, metric,
                      0.0, "kinetic")


def lagrangian_length(metric: geo.Metric, m: float) -> Lagrangian:
    return Lagrangian(ex.neg(ex.const(m) * metric.u_norm_expr), metric, m,
                      f"-{m:g}|u|")


def lagrangian_frenet(metric: geo.Metric) -> Lagrangian:
    return Lagrangian(frenet_expr_cov(metric), metric, 0.0, "k")


def lagrangian_geodesic_circle(metric: geo.Metric, m: float) -> Lagrangian:
    expr = frenet_expr_cov(metric) - ex.const(m) * metric.u_norm_expr
    return Lagrangian(expr, metric, m, f"k - {m:g}|u|")


# ---------------------------------------------------------------------------
# momenta and the Hamilton function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Momenta:
    """Covector pair (p1, p): p1 conjugate to the second-order variable,
    p to the first-order one; ``frame`` records the construction chart."""

    p1: np.ndarray
    p: np.ndarray
    frame: str  # "flat" | "covariant"


def momenta_flat_exprs(L: Lagrangian) -> Tuple[List[ex.Expr], List[ex.Expr]]:
    Lf = L.flat_expr
    p1 = [ex.diff(Lf, jc.var_name(i, 2)) for i in range(2)]
    p = [ex.sub(ex.diff(Lf, jc.var_name(i, 1)), jc.total_derivative(p1[i]))
         for i in range(2)]
    return p1, p


def _as_env(jet) -> Dict[str, float]:
    if isinstance(jet, jc.JetPoint):
        return jet.env()
    if isinstance(jet, geo.CurveJet):
        raise TypeError("flat-chart operation: convert the curve jet with "
                        "geometry.flat_env_from_curvejet first")
    return dict(jet)


def momenta_flat(L: Lagrangian, jet) -> Momenta:
    """Numeric flat-chart momenta at a jet point carrying orders <= 3."""
    p1e, pe = momenta_flat_exprs(L)
    env = _as_env(jet)
    return Momenta(np.array([ex.evaluate(e, env) for e in p1e]),
                   np.array([ex.evaluate(e, env) for e in pe]), "flat")


def momenta_covariant_exprs(L: Lagrangian) -> Tuple[List[ex.Expr], List[ex.Expr]]:
    pi1 = [ex.diff(L.expr_cov, geo.w_name(i)) for i in range(2)]
    pi1_prime = geo.covariant_prime_covector_exprs(L.metric, pi1)
    pi = [ex.sub(ex.diff(L.expr_cov, jc.var_name(i, 1)), pi1_prime[i])
          for i in range(2)]
    return pi1, pi


def momenta_covariant(L: Lagrangian, jet: geo.CurveJet) -> Momenta:
    pi1e, pie = momenta_covariant_exprs(L)
    env = jet.env()
    return Momenta(np.array([ex.evaluate(e, env) for e in pi1e]),
                   np.array([ex.evaluate(e, env) for e in pie]), "covariant")


def hamilton_exprs(L: Lagrangian) -> Tuple[ex.Expr, ex.Expr]:
    """(momenta route, generator route) for H in the flat chart."""
    Lf = L.flat_expr
    p1e, pe = momenta_flat_exprs(L)
    h_momenta = ex.ZERO
    for i in range(2):
        h_momenta = h_momenta + p1e[i] * UDOT[i] + pe[i] * U[i]
    h_momenta = h_momenta - Lf
    h_zeta = jc.zeta_apply(1, Lf) \
        - jc.total_derivative(jc.zeta_apply(2, Lf)) - Lf
    return h_momenta, h_zeta


def hamilton(L: Lagrangian, jet) -> float:
    """H = p1 u-dot + p u - L; the generator identity is evaluated alongside
    and the two must agree to 1e-10 (internal consistency check)."""
    ha, hb = hamilton_exprs(L)
    env = _as_env(jet)
    va = float(ex.evaluate(ha, env))
    vb = float(ex.evaluate(hb, env))
    if abs(va - vb) > 1e-10 * max(1.0, abs(va)):
        raise ConcircleError(
            f"Hamilton cross-check failed: {va!r} vs {vb!r}")
    return va


def hamilton_at_curvejet(L: Lagrangian, jet: geo.CurveJet) -> float:
    return hamilton(L, geo.flat_env_from_curvejet(L.metric, jet, orders=3))


def momenta_relation_flat_residual(L: Lagrangian) -> jc.Form1:
    """(p1_i du^i + p_i dx^i) - (iota_1 dL - 1/2 d_T iota_2 dL); vanishes
    identically (the defining relation of the flat momenta)."""
    Lf = L.flat_expr
    p1e, pe = momenta_flat_exprs(L)
    lhs = jc.Form1()
    for i in range(2):
        lhs.add_term((i, 1), p1e[i])
        lhs.add_term((i, 0), pe[i])
    dl = jc.exterior_d(Lf)
    rhs = jc.iota(1, dl) + jc.total_derivative_form(jc.iota(2, dl)).scaled(-0.5)
    return lhs - rhs


def momenta_relation_covariant_residual(L: Lagrangian) -> jc.Form1:
    """pi1 (Du) + pi dx - (iota_1 dL - 1/2 d_T iota_2 dL) as jet-space
    1-forms (the covariant analogue; the prime of the scalar-valued 1-form
    is its total derivative).  Vanishes identically."""
    metric = L.metric
    to_flat = geo.cov_to_flat_substitution(metric)
    pi1e, pie = momenta_covariant_exprs(L)
    pi1_flat = [ex.substitute(e, to_flat) for e in pi1e]
    pi_flat = [ex.substitute(e, to_flat) for e in pie]
    Du = geo._Du_forms(metric)
    lhs = jc.Form1()
    for i in range(2):
        for slot, c in Du[i].items():
            lhs.add_term(slot, ex.mul(pi1_flat[i], c))
        lhs.add_term((i, 0), pi_flat[i])
    dl = jc.exterior_d(L.flat_expr)
    rhs = jc.iota(1, dl) + jc.total_derivative_form(jc.iota(2, dl)).scaled(-0.5)
    return lhs - rhs


# ---------------------------------------------------------------------------
# covariant Euler-Poisson equation
# ---------------------------------------------------------------------------

def spin_force_exprs(metric: geo.Metric,
                     pi1: Sequence[ex.Expr]) -> List[ex.Expr]:
    """F_l = pi1_i R_{ljq}^i u^j u^q (the curvature term of the equation)."""
    R = metric.riemann_exprs()
    out = []
    for l in range(2):
        acc = ex.ZERO
        for i in range(2):
            for j in range(2):
                for q in range(2):
                    acc = acc + pi1[i] * R[l][j][q][i] * U[j] * U[q]
        out.append(acc)
    return out


def euler_poisson_exprs(L: Lagrangian) -> List[ex.Expr]:
    """Residual covector of the covariant Euler-Poisson equation, oriented
    as a source form (flat metric: coefficient-wise equal to delta L)."""
    metric = L.metric
    gamma = metric.christoffel_exprs
    pi1, pi = momenta_covariant_exprs(L)
    pi_prime = geo.covariant_prime_covector_exprs(metric, pi)
    spin = spin_force_exprs(metric, pi1)
    out = []
    for l in range(2):
        rhs = ex.diff(L.expr_cov, jc.var_name(l, 0))
        for i in range(2):
            gu = ex.ZERO
            gw = ex.ZERO
            for j in range(2):
                gu = gu + gamma[i][l][j] * U[j]
                gw = gw + gamma[i][l][j] * W[j]
            rhs = rhs - ex.diff(L.expr_cov, jc.var_name(i, 1)) * gu
            rhs = rhs - ex.diff(L.expr_cov, geo.w_name(i)) * gw
        out.append(rhs - (pi_prime[l] + spin[l]))
    return out


def euler_poisson_covariant(L: Lagrangian, jet: geo.CurveJet) -> np.ndarray:
    """Numeric residual covector at a curve jet (needs w'; also w'' when L
    is nonlinear in w).  Zero on solutions."""
    exprs = euler_poisson_exprs(L)
    env = jet.env()
    return np.array([ex.evaluate(e, env) for e in exprs])


def frenet_horizontal_cancellation_exprs(metric: geo.Metric) -> List[ex.Expr]:
    """dk/dx^l - dk/du^i Gamma^i_lj u^j - dk/dw^i Gamma^i_lj w^j; vanishes
    identically thanks to the metricity identity of the connection."""
    k = frenet_expr_cov(metric)
    gamma = metric.christoffel_exprs
    out = []
    for l in range(2):
        acc = ex.diff(k, jc.var_name(l, 0))
        for i in range(2):
            gu = ex.ZERO
            gw = ex.ZERO
            for j in range(2):
                gu = gu + gamma[i][l][j] * U[j]
                gw = gw + gamma[i][l][j] * W[j]
            acc = acc - ex.diff(k, jc.var_name(i, 1)) * gu
            acc = acc - ex.diff(k, geo.w_name(i)) * gw
        out.append(acc)
    return out


# ---------------------------------------------------------------------------
# the flat inverse-problem source form
# ---------------------------------------------------------------------------

def prop41_exprs(m: float) -> List[ex.Expr]:
    """Flat source form with Euclidean symmetry, straight lines among the
    solutions and first integral k:

        E_i = e_ij u''^j/|u|^3 - 3 (u'.u) e_ij u'^j/|u|^5
              + m (|u|^2 u'_i - (u'.u) u_i)/|u|^3

    (flat chart: primes are plain t-derivatives, e_01 = +1)."""
    u0, u1 = U
    ud0, ud1 = UDOT
    udd = [jc.jet_var(0, 3), jc.jet_var(1, 3)]
    n2 = u0 * u0 + u1 * u1
    n3 = ex.powr(n2, Fraction(3, 2))
    n5 = ex.powr(n2, Fraction(5, 2))
    uu = ud0 * u0 + ud1 * u1
    e_udd = [udd[1], ex.neg(udd[0])]   # e_ij v^j with e_01 = +1
    e_ud = [ud1, ex.neg(ud0)]
    mC = ex.const(m)
    out = []
    for i, (ui, udi) in enumerate(((u0, ud0), (u1, ud1))):
        term = e_udd[i] / n3 - ex.const(3.0) * uu * e_ud[i] / n5
        term = term + mC * (n2 * udi - uu * ui) / n3
        out.append(term)
    return out


def prop41_source_form(m: float) -> jc.Form1:
    e0, e1 = prop41_exprs(m)
    return jc.Form1({(0, 0): e0, (1, 0): e1})


# ---------------------------------------------------------------------------
# third-order acceleration (the right-hand sides the integrator consumes)
# ---------------------------------------------------------------------------

FORMULATIONS = ("concircular", "euler_poisson")

_accel_cache: dict = {}


def _euler_poisson_Mc_exprs(metric: geo.Metric, m: float):
    """eps(x,u,w,w') is affine in w': eps = M w' + c.  Returns (M, c) exprs
    over (x, u, w)."""
    key = (id(metric), m)
    hit = _accel_cache.get(key)
    if hit is not None:
        return hit
    L = lagrangian_geodesic_circle(metric, m)
    eps = euler_poisson_exprs(L)
    wp_names = {geo.w_name(0, 1), geo.w_name(1, 1), geo.w_name(0, 2),
                geo.w_name(1, 2)}
    M = [[ex.diff(eps[l], geo.w_name(j, 1)) for j in range(2)]
         for l in range(2)]
    for row in M:
        for entry in row:
            if entry.vars & wp_names:
                raise ConcircleError("equation is not affine in w'")
    zero_wp = {geo.w_name(i, 1): ex.ZERO for i in range(2)}
    c = [ex.substitute(eps[l], zero_wp) for l in range(2)]
    for entry in c:
        if entry.vars & wp_names:
            raise ConcircleError("equation is not affine in w'")
    _accel_cache[key] = (M, c)
    return M, c


def geodesic_circle_accel(metric: geo.Metric, x, u, w, formulation: str,
                          m: float = 1.0) -> np.ndarray:
    """The unique w' solving the chosen third-order equation at (x, u, w)."""
    x = np.asarray(x, float)
    u = np.asarray(u, float)
    w = np.asarray(w, float)
    metric.norm_u(x, u)  # null / vanishing velocity guard
    if formulation == "concircular":
        g = metric.components_at(x)
        return -(w @ g @ w) * u
    if formulation != "euler_poisson":
        raise ValueError(f"unknown formulation '{formulation}'")
    if m <= 0:
        raise ValueError("the variational formulation needs m > 0 (with m = 0 "
                         "the equation leaves the along-u acceleration free)")
    Me, ce = _euler_poisson_Mc_exprs(metric, m)
    env = geo.CurveJet(x, u, w).env()
    M = np.array([[ex.evaluate(Me[l][j], env) for j in range(2)]
                  for l in range(2)])
    c = np.array([ex.evaluate(ce[l], env) for l in range(2)])
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    scale = np.abs(M).max()
    if abs(det) <= 1e-12 * scale * scale:
        cond = float("inf") if det == 0 else scale * scale / abs(det)
        raise SingularSolveError("acceleration solve degenerated", cond)
    return np.linalg.solve(M, -c)


def dynamics_pack_exprs(metric: geo.Metric, formulation: str,
                        m: float) -> List[ex.Expr]:
    """The 15 expressions the trajectory kernels evaluate per step, over the
    variables ``DYNAMICS_VARS``: g (3), Gamma (6), M (4), c (2)."""
    g = metric.g
    gamma = metric.christoffel_exprs
    out = [g[0][0], g[0][1], g[1][1]]
    for i in range(2):
        out += [gamma[i][0][0], gamma[i][0][1], gamma[i][1][1]]
    if formulation == "euler_poisson":
        if m <= 0:
            raise ValueError("the variational formulation needs m > 0")
        Me, ce = _euler_poisson_Mc_exprs(metric, m)
        out += [Me[0][0], Me[0][1], Me[1][0], Me[1][1], ce[0], ce[1]]
    elif formulation == "concircular":
        out += [ex.ZERO] * 6
    else:
        raise ValueError(f"unknown formulation '{formulation}'")
    return out


# ---------------------------------------------------------------------------
# spin tensor and spin force
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpinTensor:
    """S^{qi} = u^q w^i - u^i w^q; in 2-D one scalar S^{01} determines it."""

    s01: float

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[0.0, self.s01], [-self.s01, 0.0]])


def spin_tensor(u, w) -> SpinTensor:
    return SpinTensor(float(u[0] * w[1] - u[1] * w[0]))


def spin_force(jet: geo.CurveJet, metric: geo.Metric) -> np.ndarray:
    """pi1_i R_{ljq}^i u^j u^q with pi1 the covariant momentum of L = k.

    This undivided form is what the integrator's equation carries; it stays
    regular on straight geodesics (u ^ w = 0)."""
    pi1 = [ex.diff(frenet_expr_cov(metric), geo.w_name(i)) for i in range(2)]
    exprs = spin_force_exprs(metric, pi1)
    env = jet.env()
    return np.array([ex.evaluate(e, env) for e in exprs])


def spin_force_rewritten(jet: geo.CurveJet, metric: geo.Metric) -> np.ndarray:
    """R_{ljqi} u^j S^{qi} / (2 ||u|| ||u ^ w||): the interpretation of the
    curvature force through the spin tensor (defined away from u ^ w = 0).

    The 1/2 compensates the double-count when summing the antisymmetric pair
    (q, i) over all index values rather than q < i."""
    g = metric.components_at(jet.x)
    R_up = geo.riemann(metric, jet.x)          # R[l,j,q,i] for R_{ljq}^i
    R_low = np.einsum("ljqm,im->ljqi", R_up, g)
    S = spin_tensor(jet.u, jet.w).matrix
    n, _ = metric.norm_u(jet.x, jet.u)
    wedge = geo.wedge_norm(jet.u, jet.w, metric, jet.x)
    scale = np.sqrt(abs(np.linalg.det(g))) * (np.abs(jet.u) @ np.abs(jet.w[::-1]))
    if abs(wedge) <= 1e-12 * max(scale, 1e-300):
        raise DomainError("u ^ u' is degenerate; the rewritten spin force "
                          "is undefined (use the undivided form)")
    return np.einsum("ljqi,j,qi->l", R_low, jet.u, S) / (2.0 * n * wedge)


def spin_rewrite_check(jet: geo.CurveJet, metric: geo.Metric) -> float:
    """Max componentwise difference between the two right-hand-side forms."""
    direct = spin_force(jet, metric)
    rewritten = spin_force_rewritten(jet, metric)
    return float(np.abs(direct - rewritten).max())
