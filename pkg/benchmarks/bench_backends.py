#!/usr/bin/env python3
"""Compare the numba kernels against the pure-numpy/python fallback.

Backend selection happens once per process (CONCIRCLE_BACKEND), so each
timing runs in a subprocess.  Two workloads:

* sweep     : batched tape evaluation of the obstruction 2-form
               coefficients of the geodesic-circle Lagrangian at N jet
               points (the shape of every identity check);
* trajectory: a variational trajectory on the unit sphere (the ODE
               stepping loop, where the compiled kernels matter most).

Usage: python benchmarks/bench_backends.py [--points 100] [--span 10.0]
"""

import argparse
import json
import os
import subprocess
import sys
import textwrap

WORKER = r"""
import json, sys, time
import numpy as np
from concircle import backend

workload = sys.argv[1]
points = int(sys.argv[2])
span = float(sys.argv[3])

backend.kernels()  # force selection + JIT outside the timed region
t_setup = time.perf_counter()

if workload == "sweep":
    from concircle import jetcalc as jc, geometry as geo, mechanics as mech
    L = mech.lagrangian_geodesic_circle(geo.metric_flat(), 1.0)
    obstruction = jc.lagrange_derivative1(jc.lagrange_derivative(L.flat_expr))
    env = jc.sample_jet_env(points, 42)
    jc.check_form_zero(obstruction, env)  # warm (compiles the tapes)
    reps = 20
    t0 = time.perf_counter()
    for _ in range(reps):
        jc.check_form_zero(obstruction, env)
    elapsed = (time.perf_counter() - t0) / reps
else:
    from concircle import geometry as geo, integrate as ig
    metric = geo.metric_sphere(1.0)
    cfg = ig.IntegratorConfig(method="rk4", h=1e-3, t_span=(0.0, span),
                              stride=100, formulation="euler_poisson", m=2.0)
    initial = ([np.pi / 2, 0.0], [0.0, -1.0], [-2.0, 0.0])
    res = ig.integrate(metric, "euler_poisson", initial, cfg)  # warm
    assert res.ok
    t0 = time.perf_counter()
    res = ig.integrate(metric, "euler_poisson", initial, cfg)
    elapsed = time.perf_counter() - t0

print(json.dumps({"backend": backend.backend_name(), "seconds": elapsed}))
"""


def run(workload: str, backend: str, points: int, span: float) -> dict:
    env = dict(os.environ, CONCIRCLE_BACKEND=backend)
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, workload, str(points), str(span)],
        env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> int:
    ap = argparse.ArgumentParser(
        description=textwrap.dedent(__doc__).strip().splitlines()[0])
    ap.add_argument("--points", type=int, default=100)
    ap.add_argument("--span", type=float, default=10.0)
    args = ap.parse_args()

    print(f"{'workload':12s} {'numba [s]':>12s} {'numpy [s]':>12s} "
          f"{'speedup':>9s}")
    for workload in ("sweep", "trajectory"):
        results = {}
        for backend in ("numba", "numpy"):
            try:
                results[backend] = run(workload, backend, args.points,
                                       args.span)["seconds"]
            except subprocess.CalledProcessError as err:
                print(f"{workload}: {backend} backend failed:\n{err.stderr}",
                      file=sys.stderr)
                return 1
        ratio = results["numpy"] / results["numba"]
        print(f"{workload:12s} {results['numba']:12.4f} "
              f"{results['numpy']:12.4f} {ratio:8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
