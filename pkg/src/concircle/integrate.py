"""Trajectory integration for the third-order geodesic-circle equations.

The third-order equation is reduced to a first-order system in the state
y = (x, u, w) with w the covariant acceleration: x-dot = u,
u-dot = w - Gamma u u, and w evolves through the covariant w' supplied by the
chosen formulation (concircular or variational; see
:func:`concircle.mechanics.geodesic_circle_accel`).  Stepping runs inside the
kernel backend; diagnostics (speed, Frenet curvature, Hamilton value, spin
scalar) are attached per recorded sample afterwards, each computed from the
same state snapshot.

No constraint projection is applied anywhere: drift in the conserved
quantities is the acceptance signal, not something to hide.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from . import backend
from . import expr as ex
from . import geometry as geo
from . import jetcalc as jc
from . import mechanics as mech
from ._kernels import (STATUS_DEGENERATE_METRIC, STATUS_NONFINITE,
                       STATUS_NULL_VELOCITY, STATUS_OK, STATUS_SINGULAR_SOLVE,
                       STATUS_STEP_BUDGET, STATUS_STEP_UNDERFLOW)
from .tape import _STATUS_MESSAGES as _TAPE_MESSAGES
from .tape import compile_tape

log = logging.getLogger("concircle")

MAX_ADAPTIVE_STEPS = 2_000_000

_STATUS_TEXT = {
    STATUS_DEGENERATE_METRIC: "metric became degenerate along the trajectory",
    STATUS_NULL_VELOCITY: "velocity became null or vanished",
    STATUS_SINGULAR_SOLVE: "acceleration solve became singular",
    STATUS_NONFINITE: "state derivative became non-finite",
    STATUS_STEP_BUDGET: "step budget exhausted",
    STATUS_STEP_UNDERFLOW: "adaptive step size underflowed",
}


def status_message(status: int) -> str:
    if status == STATUS_OK:
        return "ok"
    if status in _TAPE_MESSAGES:
        return _TAPE_MESSAGES[status]
    return _STATUS_TEXT.get(status, f"kernel status {status}")


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"
    h: float = 1e-3
    atol: float = 1e-10          # rkf45 only
    rtol: float = 1e-10          # rkf45 only
    t_span: Tuple[float, float] = (0.0, 10.0)
    stride: int = 10
    formulation: str = "concircular"
    m: float = 1.0

    def __post_init__(self):
        if self.method not in ("rk4", "rkf45"):
            raise ValueError("method must be rk4 or rkf45")
        if not (self.h > 0):
            raise ValueError("step h must be positive")
        if not (self.atol > 0 and self.rtol > 0):
            raise ValueError("atol and rtol must be positive")
        t0, t1 = self.t_span
        if not (np.isfinite(t0) and np.isfinite(t1) and t1 > t0):
            raise ValueError("t_span must be finite with t1 > t0")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.formulation not in mech.FORMULATIONS:
            raise ValueError(f"formulation must be one of {mech.FORMULATIONS}")


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    x: np.ndarray
    u: np.ndarray
    w: np.ndarray
    speed: float
    k: float
    H: float
    s01: float


@dataclass
class TrajectoryResult:
    t: np.ndarray
    x: np.ndarray        # (n, 2)
    u: np.ndarray
    w: np.ndarray
    speed: np.ndarray
    k: np.ndarray
    H: np.ndarray
    s01: np.ndarray
    status: int
    steps: int
    config: IntegratorConfig
    formulation: str

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    @property
    def message(self) -> str:
        return status_message(self.status)

    def __len__(self) -> int:
        return len(self.t)

    def samples(self) -> Iterator[TrajectorySample]:
        for i in range(len(self.t)):
            yield TrajectorySample(float(self.t[i]), self.x[i], self.u[i],
                                   self.w[i], float(self.speed[i]),
                                   float(self.k[i]), float(self.H[i]),
                                   float(self.s01[i]))

    def summary(self) -> dict:
        k0 = float(self.k[0])
        out = {
            "status": self.message,
            "n_samples": len(self.t),
            "k_initial": k0,
            "k_drift": float(np.abs(self.k - k0).max()),
            "hamilton_plus_k0_drift": float(np.abs(self.H + k0).max()),
            "hamilton_vs_minus_k": float(np.abs(self.H + self.k).max()),
            "speed_drift": float(np.abs(self.speed - self.speed[0]).max()),
            "endpoint_return_distance":
                float(np.linalg.norm(self.x[-1] - self.x[0])),
        }
        return out


def _diagnostic_exprs(metric: geo.Metric, m: float):
    """(speed, k, H) over (x, u, w, w'); H is the flat-chart Hamilton value
    of L = k - m|u| composed with the chart conversion."""
    L = mech.lagrangian_geodesic_circle(metric, m)
    h_flat, _ = mech.hamilton_exprs(L)
    udot = geo.udot_exprs(metric)
    uddot = geo.uddot_exprs(metric)
    conv = {jc.var_name(i, 2): udot[i] for i in range(2)}
    conv.update({jc.var_name(i, 3): uddot[i] for i in range(2)})
    h_cov = ex.substitute(h_flat, conv)
    speed = metric.u_norm_expr
    k = mech.frenet_expr_cov(metric)
    return [speed, k, h_cov]


_DIAG_VARS = mech.DYNAMICS_VARS + (geo.w_name(0, 1), geo.w_name(1, 1))


def _attach_diagnostics(metric: geo.Metric, formulation: str, m: float,
                        t: np.ndarray, y: np.ndarray):
    x, u, w = y[:, 0:2], y[:, 2:4], y[:, 4:6]

    dyn_tape = compile_tape(
        list(mech.dynamics_pack_exprs(metric, formulation, m)),
        mech.DYNAMICS_VARS)
    rows = dyn_tape.eval_many(np.ascontiguousarray(y.T))
    g00, g01, g11 = rows[0], rows[1], rows[2]

    if formulation == "concircular":
        gww = g00 * w[:, 0] ** 2 + 2 * g01 * w[:, 0] * w[:, 1] + g11 * w[:, 1] ** 2
        wp = -gww[:, None] * u
    else:
        m00, m01, m10, m11 = rows[9], rows[10], rows[11], rows[12]
        c0, c1 = rows[13], rows[14]
        detm = m00 * m11 - m01 * m10
        wp = np.stack([(m01 * c1 - m11 * c0) / detm,
                       (m10 * c0 - m00 * c1) / detm], axis=1)

    diag_tape = compile_tape(_diagnostic_exprs(metric, m), _DIAG_VARS)
    vals = np.concatenate([y, wp], axis=1)
    diag = diag_tape.eval_many(np.ascontiguousarray(vals.T))
    s01 = u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0]
    return t, x, u, w, diag[0], diag[1], diag[2], s01


def integrate(metric: geo.Metric, formulation: str, initial,
              config: IntegratorConfig) -> TrajectoryResult:
    """Integrate from initial = (x, u, w).

    Guard violations mid-trajectory end the run early; the partial
    trajectory is returned with the corresponding status (an invalid initial
    state raises instead)."""
    x0, u0, w0 = (np.asarray(v, dtype=np.float64) for v in initial)
    metric.validate_signature_at(x0)
    metric.norm_u(x0, u0)
    y0 = np.concatenate([x0, u0, w0])

    pack = mech.dynamics_pack_exprs(metric, formulation, config.m)
    tape = compile_tape(list(pack), mech.DYNAMICS_VARS)
    kern = backend.kernels()
    form_code = 0 if formulation == "concircular" else 1
    t0, t1 = config.t_span

    # non-finite transients right before a guard stop are expected on
    # blow-up trajectories; the kernels report them through status codes
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if config.method == "rk4":
            nsteps = max(1, int(round((t1 - t0) / config.h)))
            h_eff = (t1 - t0) / nsteps
            if abs(h_eff - config.h) > 1e-9 * config.h:
                log.debug("rk4 step adjusted to %.17g to land on t1", h_eff)
            n_buf = nsteps // config.stride + 2
            ts = np.empty(n_buf, dtype=np.float64)
            ys = np.empty((n_buf, 6), dtype=np.float64)
            status, nsamp, steps = kern.rk4_path(
                tape.ops, tape.arga, tape.argb, tape.consts, tape.out,
                form_code, geo.EPS_VELOCITY, y0, t0, h_eff, nsteps,
                config.stride, ts, ys)
        else:
            n_buf = MAX_ADAPTIVE_STEPS // config.stride + 16
            ts = np.empty(n_buf, dtype=np.float64)
            ys = np.empty((n_buf, 6), dtype=np.float64)
            h_init = min(config.h, (t1 - t0) / 10.0)
            status, nsamp, steps = kern.rkf45_path(
                tape.ops, tape.arga, tape.argb, tape.consts, tape.out,
                form_code, geo.EPS_VELOCITY, y0, t0, t1, h_init,
                config.atol, config.rtol, config.stride, MAX_ADAPTIVE_STEPS,
                ts, ys)

    status = int(status)
    nsamp = int(nsamp)
    if status != STATUS_OK:
        log.warning("trajectory stopped early after %d steps: %s", steps,
                    status_message(status))
    t, x, u, w, speed, k, H, s01 = _attach_diagnostics(
        metric, formulation, config.m, ts[:nsamp].copy(), ys[:nsamp].copy())
    return TrajectoryResult(t, x, u, w, speed, k, H, s01, status, int(steps),
                            config, formulation)


# ---------------------------------------------------------------------------
# convergence probe
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceResult:
    steps: List[float]
    errors: List[float]
    observed_order: Optional[float]
    inconclusive: bool

    def as_rows(self) -> List[Tuple[float, float]]:
        return list(zip(self.steps, self.errors))


def convergence_probe(metric: geo.Metric, formulation: str, initial,
                      config: IntegratorConfig,
                      steps: Sequence[float]) -> ConvergenceResult:
    """Observed convergence order from endpoint errors against the finest-h
    reference run (Richardson-style: successive log-ratio slopes)."""
    hs = sorted(set(float(h) for h in steps), reverse=True)
    if len(hs) < 3:
        raise ValueError("need at least three step sizes")

    def endpoint(h: float) -> np.ndarray:
        cfg = IntegratorConfig(method="rk4", h=h, atol=config.atol,
                               rtol=config.rtol, t_span=config.t_span,
                               stride=10 ** 9, formulation=formulation,
                               m=config.m)
        res = integrate(metric, formulation, initial, cfg)
        if not res.ok:
            raise RuntimeError(f"convergence run at h={h} failed: {res.message}")
        return np.concatenate([res.x[-1], res.u[-1], res.w[-1]])

    ref = endpoint(hs[-1])
    coarse = hs[:-1]
    errors = [float(np.linalg.norm(endpoint(h) - ref)) for h in coarse]

    monotone = all(errors[i] > errors[i + 1] > 0 for i in range(len(errors) - 1))
    if not monotone:
        return ConvergenceResult(coarse, errors, None, True)
    orders = [np.log(errors[i] / errors[i + 1])
              / np.log(coarse[i] / coarse[i + 1])
              for i in range(len(errors) - 1)]
    return ConvergenceResult(coarse, errors, float(np.mean(orders)), False)
