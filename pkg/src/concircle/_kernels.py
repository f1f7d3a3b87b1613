"""Hot numeric kernels: tape evaluation and the trajectory drivers.

Plain-python definitions, written so that :mod:`concircle.backend` can apply
``numba.njit`` to them unchanged (the pure-numpy/python fallback calls them
as-is).  No exceptions are raised here; every function reports a status code:

    0   ok                          11  degenerate metric (det g ~ 0)
    1   division by zero            12  null / vanishing velocity
    2   log domain                  13  singular acceleration solve
    3   sqrt domain                 14  non-finite state derivative
    4   pow domain                  15  step budget exhausted
                                    16  step size underflow (rkf45)

State layout used by the drivers: y = (x0, x1, u0, u1, w0, w1), matching the
dynamics tape's variable order.  The dynamics tape exposes 15 outputs, indexed
through ``out_idx``:

    0..2   g00 g01 g11
    3..8   Gamma^0_00 Gamma^0_01 Gamma^0_11 Gamma^1_00 Gamma^1_01 Gamma^1_11
    9..12  M00 M01 M10 M11   (d(residual)/d(w') for the variational equation)
    13..14 c0 c1             (residual at w' = 0)

Formulation codes: 0 = concircular (w' = -g(w,w) u), 1 = variational
(solve M w' = -c).
"""

import math

import numpy as np

STATUS_OK = 0
STATUS_DEGENERATE_METRIC = 11
STATUS_NULL_VELOCITY = 12
STATUS_SINGULAR_SOLVE = 13
STATUS_NONFINITE = 14
STATUS_STEP_BUDGET = 15
STATUS_STEP_UNDERFLOW = 16

# Fehlberg 4(5) tableau (propagates the 5th-order solution)
RKF_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 4.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
])
RKF_B4 = np.array([25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0,
                   -1.0 / 5.0, 0.0])
RKF_B5 = np.array([16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0,
                   -9.0 / 50.0, 2.0 / 55.0])


def eval_tape(ops, arga, argb, consts, vals, regs):
    n = ops.shape[0]
    for i in range(n):
        op = ops[i]
        if op == 0:
            regs[i] = consts[arga[i]]
        elif op == 1:
            regs[i] = vals[arga[i]]
        elif op == 2:
            regs[i] = -regs[arga[i]]
        elif op == 3:
            regs[i] = math.sin(regs[arga[i]])
        elif op == 4:
            regs[i] = math.cos(regs[arga[i]])
        elif op == 5:
            regs[i] = math.exp(regs[arga[i]])
        elif op == 6:
            a = regs[arga[i]]
            if a <= 0.0:
                return 2
            regs[i] = math.log(a)
        elif op == 7:
            a = regs[arga[i]]
            if a < 0.0:
                return 3
            regs[i] = math.sqrt(a)
        elif op == 8:
            regs[i] = abs(regs[arga[i]])
        elif op == 9:
            regs[i] = regs[arga[i]] + regs[argb[i]]
        elif op == 10:
            regs[i] = regs[arga[i]] - regs[argb[i]]
        elif op == 11:
            regs[i] = regs[arga[i]] * regs[argb[i]]
        elif op == 12:
            b = regs[argb[i]]
            if b == 0.0:
                return 1
            regs[i] = regs[arga[i]] / b
        elif op == 13:
            a = regs[arga[i]]
            k = argb[i]
            if k < 0 and a == 0.0:
                return 1
            regs[i] = a ** k
        else:
            a = regs[arga[i]]
            r = consts[argb[i]]
            if a < 0.0:
                return 4
            if a == 0.0 and r < 0.0:
                return 1
            regs[i] = a ** r
    return 0


def eval_tape_batch(ops, arga, argb, consts, vals, out_idx, out):
    """Scalar loop over points; the numpy backend substitutes a vectorised
    version (see backend module)."""
    npts = vals.shape[1]
    regs = np.empty(ops.shape[0], dtype=np.float64)
    point = np.empty(vals.shape[0], dtype=np.float64)
    for p in range(npts):
        for v in range(vals.shape[0]):
            point[v] = vals[v, p]
        status = eval_tape(ops, arga, argb, consts, point, regs)
        if status != 0:
            return status
        for j in range(out_idx.shape[0]):
            out[j, p] = regs[out_idx[j]]
    return 0


def dyn_rhs(ops, arga, argb, consts, out_idx, formulation, eps_u, y, vals,
            regs, dy):
    for d in range(6):
        vals[d] = y[d]
    status = eval_tape(ops, arga, argb, consts, vals, regs)
    if status != 0:
        return status

    g00 = regs[out_idx[0]]
    g01 = regs[out_idx[1]]
    g11 = regs[out_idx[2]]
    detg = g00 * g11 - g01 * g01
    sg = max(abs(g00), abs(g01), abs(g11))
    if abs(detg) <= 1e-12 * sg * sg:
        return STATUS_DEGENERATE_METRIC

    u0 = y[2]
    u1 = y[3]
    w0 = y[4]
    w1 = y[5]
    guu = g00 * u0 * u0 + 2.0 * g01 * u0 * u1 + g11 * u1 * u1
    scale_u = abs(g00 * u0 * u0) + 2.0 * abs(g01 * u0 * u1) + abs(g11 * u1 * u1)
    if abs(guu) <= eps_u * eps_u + 1e-12 * scale_u:
        return STATUS_NULL_VELOCITY

    G000 = regs[out_idx[3]]
    G001 = regs[out_idx[4]]
    G011 = regs[out_idx[5]]
    G100 = regs[out_idx[6]]
    G101 = regs[out_idx[7]]
    G111 = regs[out_idx[8]]

    dy[0] = u0
    dy[1] = u1
    # udot = w - Gamma u u  (covariant w is the stored second-order variable)
    dy[2] = w0 - (G000 * u0 * u0 + 2.0 * G001 * u0 * u1 + G011 * u1 * u1)
    dy[3] = w1 - (G100 * u0 * u0 + 2.0 * G101 * u0 * u1 + G111 * u1 * u1)

    if formulation == 0:
        gww = g00 * w0 * w0 + 2.0 * g01 * w0 * w1 + g11 * w1 * w1
        wp0 = -gww * u0
        wp1 = -gww * u1
    else:
        m00 = regs[out_idx[9]]
        m01 = regs[out_idx[10]]
        m10 = regs[out_idx[11]]
        m11 = regs[out_idx[12]]
        c0 = regs[out_idx[13]]
        c1 = regs[out_idx[14]]
        detm = m00 * m11 - m01 * m10
        mm = max(abs(m00), abs(m01), abs(m10), abs(m11))
        if abs(detm) <= 1e-12 * mm * mm:
            return STATUS_SINGULAR_SOLVE
        wp0 = (m01 * c1 - m11 * c0) / detm
        wp1 = (m10 * c0 - m00 * c1) / detm

    # wdot = w' - Gamma u w
    dy[4] = wp0 - (G000 * u0 * w0 + G001 * (u0 * w1 + u1 * w0) + G011 * u1 * w1)
    dy[5] = wp1 - (G100 * u0 * w0 + G101 * (u0 * w1 + u1 * w0) + G111 * u1 * w1)

    for d in range(6):
        if not math.isfinite(dy[d]):
            return STATUS_NONFINITE
    return 0


def rk4_path(ops, arga, argb, consts, out_idx, formulation, eps_u, y0, t0, h,
             nsteps, stride, ts, ys):
    """Classic RK4 with fixed step; records every ``stride``-th step plus the
    endpoints.  Returns (status, n_samples, steps_completed)."""
    vals = np.empty(6, dtype=np.float64)
    regs = np.empty(ops.shape[0], dtype=np.float64)
    k = np.empty((4, 6), dtype=np.float64)
    ytmp = np.empty(6, dtype=np.float64)
    y = np.empty(6, dtype=np.float64)
    for d in range(6):
        y[d] = y0[d]

    ts[0] = t0
    for d in range(6):
        ys[0, d] = y[d]
    nsamp = 1

    for i in range(1, nsteps + 1):
        for s in range(4):
            if s == 0:
                for d in range(6):
                    ytmp[d] = y[d]
            elif s < 3:
                for d in range(6):
                    ytmp[d] = y[d] + 0.5 * h * k[s - 1, d]
            else:
                for d in range(6):
                    ytmp[d] = y[d] + h * k[2, d]
            status = dyn_rhs(ops, arga, argb, consts, out_idx, formulation,
                             eps_u, ytmp, vals, regs, k[s])
            if status != 0:
                return status, nsamp, i - 1
        for d in range(6):
            y[d] += (h / 6.0) * (k[0, d] + 2.0 * k[1, d] + 2.0 * k[2, d] + k[3, d])
        if i % stride == 0 or i == nsteps:
            ts[nsamp] = t0 + i * h
            for d in range(6):
                ys[nsamp, d] = y[d]
            nsamp += 1
    return 0, nsamp, nsteps


def rkf45_path(ops, arga, argb, consts, out_idx, formulation, eps_u, y0, t0,
               t1, h0, atol, rtol, stride, max_steps, ts, ys):
    """Adaptive Fehlberg 4(5); propagates the 5th-order solution and records
    every ``stride``-th accepted step plus the endpoints."""
    vals = np.empty(6, dtype=np.float64)
    regs = np.empty(ops.shape[0], dtype=np.float64)
    k = np.empty((6, 6), dtype=np.float64)
    ytmp = np.empty(6, dtype=np.float64)
    y5 = np.empty(6, dtype=np.float64)
    y = np.empty(6, dtype=np.float64)
    for d in range(6):
        y[d] = y0[d]

    ts[0] = t0
    for d in range(6):
        ys[0, d] = y[d]
    nsamp = 1

    span = t1 - t0
    hmin = 1e-14 * span
    t = t0
    h = h0
    naccepted = 0
    attempts = 0
    while t < t1 - 1e-15 * span:
        attempts += 1
        if attempts > max_steps:
            return STATUS_STEP_BUDGET, nsamp, naccepted
        if t + h > t1:
            h = t1 - t
        for s in range(6):
            for d in range(6):
                acc = 0.0
                for j in range(s):
                    acc += RKF_A[s, j] * k[j, d]
                ytmp[d] = y[d] + h * acc
            status = dyn_rhs(ops, arga, argb, consts, out_idx, formulation,
                             eps_u, ytmp, vals, regs, k[s])
            if status != 0:
                return status, nsamp, naccepted

        errnorm = 0.0
        for d in range(6):
            acc4 = 0.0
            acc5 = 0.0
            for j in range(6):
                acc4 += RKF_B4[j] * k[j, d]
                acc5 += RKF_B5[j] * k[j, d]
            y5[d] = y[d] + h * acc5
            e = h * (acc5 - acc4)
            sc = atol + rtol * max(abs(y[d]), abs(y5[d]))
            errnorm += (e / sc) * (e / sc)
        errnorm = math.sqrt(errnorm / 6.0)

        if errnorm <= 1.0:
            t = t + h
            for d in range(6):
                y[d] = y5[d]
            naccepted += 1
            if naccepted % stride == 0 or t >= t1 - 1e-15 * span:
                if nsamp >= ts.shape[0]:
                    return STATUS_STEP_BUDGET, nsamp, naccepted
                ts[nsamp] = t
                for d in range(6):
                    ys[nsamp, d] = y[d]
                nsamp += 1

        if errnorm == 0.0:
            fac = 5.0
        else:
            fac = 0.9 * errnorm ** -0.2
            if fac < 0.2:
                fac = 0.2
            elif fac > 5.0:
                fac = 5.0
        h = h * fac
        if h < hmin:
            return STATUS_STEP_UNDERFLOW, nsamp, naccepted
    return 0, nsamp, naccepted
