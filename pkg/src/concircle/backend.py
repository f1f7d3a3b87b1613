"""Backend selection for the hot kernels.

The env flag ``CONCIRCLE_BACKEND`` picks the implementation:

* ``numba``: kernels in :mod:`concircle._kernels` are compiled with
  ``numba.njit(cache=True)``;
* ``numpy``: the same kernel code runs as plain python, except the batched
  tape evaluator, which switches to a per-instruction numpy-vectorised loop;
* ``auto`` (default): numba when importable, numpy otherwise.

Selection happens once per process, on first use; ``benchmarks/`` compares
the two via subprocesses.
"""

from __future__ import annotations

import logging
import os
from types import SimpleNamespace

import numpy as np

from . import _kernels

log = logging.getLogger("concircle")

_selected = None
_NUMBA_KERNELS = ("eval_tape", "dyn_rhs", "rk4_path", "rkf45_path",
                  "eval_tape_batch")


def _eval_tape_batch_numpy(ops, arga, argb, consts, vals, out_idx, out):
    """Vectorised batch evaluation: one numpy op per instruction, all points
    at once.  Matches the scalar kernel bit-for-bit (same op order per
    point)."""
    n = ops.shape[0]
    npts = vals.shape[1]
    regs = np.empty((n, npts), dtype=np.float64)
    for i in range(n):
        op = ops[i]
        if op == 0:
            regs[i] = consts[arga[i]]
        elif op == 1:
            regs[i] = vals[arga[i]]
        elif op == 2:
            np.negative(regs[arga[i]], out=regs[i])
        elif op == 3:
            np.sin(regs[arga[i]], out=regs[i])
        elif op == 4:
            np.cos(regs[arga[i]], out=regs[i])
        elif op == 5:
            np.exp(regs[arga[i]], out=regs[i])
        elif op == 6:
            a = regs[arga[i]]
            if np.any(a <= 0.0):
                return 2
            np.log(a, out=regs[i])
        elif op == 7:
            a = regs[arga[i]]
            if np.any(a < 0.0):
                return 3
            np.sqrt(a, out=regs[i])
        elif op == 8:
            np.abs(regs[arga[i]], out=regs[i])
        elif op == 9:
            np.add(regs[arga[i]], regs[argb[i]], out=regs[i])
        elif op == 10:
            np.subtract(regs[arga[i]], regs[argb[i]], out=regs[i])
        elif op == 11:
            np.multiply(regs[arga[i]], regs[argb[i]], out=regs[i])
        elif op == 12:
            b = regs[argb[i]]
            if np.any(b == 0.0):
                return 1
            np.divide(regs[arga[i]], b, out=regs[i])
        elif op == 13:
            a = regs[arga[i]]
            kexp = int(argb[i])
            if kexp < 0 and np.any(a == 0.0):
                return 1
            np.power(a, kexp, out=regs[i])
        else:
            a = regs[arga[i]]
            r = consts[argb[i]]
            if np.any(a < 0.0):
                return 4
            if r < 0.0 and np.any(a == 0.0):
                return 1
            np.power(a, r, out=regs[i])
    for j in range(out_idx.shape[0]):
        out[j] = regs[out_idx[j]]
    return 0


def _build_numpy():
    return SimpleNamespace(
        name="numpy",
        eval_tape=_kernels.eval_tape,
        eval_tape_batch=_eval_tape_batch_numpy,
        rk4_path=_kernels.rk4_path,
        rkf45_path=_kernels.rkf45_path,
    )


def _build_numba():
    from numba import njit

    # jit in dependency order, rebinding the module globals so that callers
    # compiled later link against the compiled callees
    compiled = {}
    for name in _NUMBA_KERNELS:
        fn = getattr(_kernels, name)
        jfn = njit(cache=True, fastmath=False)(fn)
        setattr(_kernels, name, jfn)
        compiled[name] = jfn
    return SimpleNamespace(name="numba", **compiled)


def kernels() -> SimpleNamespace:
    """Return the active kernel namespace, selecting a backend on first use."""
    global _selected
    if _selected is not None:
        return _selected
    choice = os.environ.get("CONCIRCLE_BACKEND", "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"CONCIRCLE_BACKEND must be auto, numba or numpy (got {choice!r})")
    if choice in ("auto", "numba"):
        try:
            _selected = _build_numba()
        except ImportError:
            if choice == "numba":
                raise
            log.info("numba unavailable; falling back to the numpy backend")
            _selected = _build_numpy()
    else:
        _selected = _build_numpy()
    log.debug("kernel backend: %s", _selected.name)
    return _selected


def backend_name() -> str:
    return kernels().name
