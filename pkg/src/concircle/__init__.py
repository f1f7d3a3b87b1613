"""Third-order variational mechanics of geodesic circles on 2-D metrics.

Library layout (one module per concern):

* :mod:`concircle.expr`     : symbolic scalar expressions (parse/diff/eval)
* :mod:`concircle.jetcalc`  : jet-space calculus: d_T, iota_r, the Lagrange
  derivative, the reparameterisation generators, numeric zero tests
* :mod:`concircle.geometry` : metric-derived fields, covariant derivatives
  along curves, the curvature commutator, Frenet curvature
* :mod:`concircle.mechanics`: momenta, Hamilton function, the covariant
  Euler-Poisson equation, spin tensor/force, the concrete geodesic-circle
  Lagrangian
* :mod:`concircle.integrate`: trajectory integration (rk4 / rkf45) with
  conservation diagnostics
* :mod:`concircle.cli`      : TOML-configured commands with CSV reports

Hot numeric kernels run under numba when available; set
``CONCIRCLE_BACKEND=numpy`` to force the pure-python/numpy fallback
(``auto`` and ``numba`` are the other values).
"""

__version__ = "0.1.0"

from . import backend, expr, geometry, integrate, jetcalc, mechanics  # noqa: F401,E402
