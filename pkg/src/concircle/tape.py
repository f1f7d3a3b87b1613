"""Compilation of expression DAGs to flat instruction tapes.

A tape is the evaluation-order-linearised form of one or more expressions
sharing subexpressions: three int32 arrays (opcode, first operand, second
operand) plus a float64 constant table.  Instruction ``i`` writes register
``i``; operands index earlier registers.  The hot kernels (see
:mod:`concircle.backend`) execute tapes either as compiled numba loops or as
plain python/numpy, so everything the integrator touches per step is data,
not Python objects.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import expr as ex
from .errors import DomainError, UnboundVariableError

OP_CONST = 0
OP_VAR = 1
OP_NEG = 2
OP_SIN = 3
OP_COS = 4
OP_EXP = 5
OP_LOG = 6
OP_SQRT = 7
OP_ABS = 8
OP_ADD = 9
OP_SUB = 10
OP_MUL = 11
OP_DIV = 12
OP_IPOW = 13
OP_FPOW = 14

_UNARY_CODE = {ex.NEG: OP_NEG, ex.SIN: OP_SIN, ex.COS: OP_COS, ex.EXP: OP_EXP,
               ex.LOG: OP_LOG, ex.SQRT: OP_SQRT, ex.ABS: OP_ABS}
_BINARY_CODE = {ex.ADD: OP_ADD, ex.SUB: OP_SUB, ex.MUL: OP_MUL, ex.DIV: OP_DIV}

# tape evaluation status codes (shared with the kernels)
OK = 0
ERR_DIV0 = 1
ERR_LOG = 2
ERR_SQRT = 3
ERR_POW = 4

_STATUS_MESSAGES = {
    ERR_DIV0: "division by zero",
    ERR_LOG: "log of a non-positive value",
    ERR_SQRT: "sqrt of a negative value",
    ERR_POW: "invalid power (negative or zero base)",
}


def raise_for_status(status: int) -> None:
    if status != OK:
        raise DomainError(_STATUS_MESSAGES.get(status, f"tape error {status}"))


class Tape:
    """Compiled form of a list of expressions over a fixed variable order."""

    __slots__ = ("ops", "arga", "argb", "consts", "out", "var_order", "n_regs")

    def __init__(self, ops, arga, argb, consts, out, var_order):
        self.ops = ops
        self.arga = arga
        self.argb = argb
        self.consts = consts
        self.out = out
        self.var_order = tuple(var_order)
        self.n_regs = len(ops)

    def __len__(self):
        return self.n_regs

    @property
    def n_outputs(self) -> int:
        return len(self.out)

    def eval(self, values) -> np.ndarray:
        """Evaluate at one point; ``values`` follows ``var_order``."""
        from . import backend
        kern = backend.kernels()
        vals = np.asarray(values, dtype=np.float64)
        regs = np.empty(self.n_regs, dtype=np.float64)
        status = kern.eval_tape(self.ops, self.arga, self.argb, self.consts,
                                vals, regs)
        raise_for_status(int(status))
        return regs[self.out].copy()

    def eval_many(self, values: np.ndarray) -> np.ndarray:
        """Evaluate at many points; ``values`` has shape (n_vars, n_points).

        Returns an array of shape (n_outputs, n_points).
        """
        from . import backend
        kern = backend.kernels()
        vals = np.ascontiguousarray(values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] != len(self.var_order):
            raise ValueError("values must have shape (n_vars, n_points)")
        out = np.empty((self.n_outputs, vals.shape[1]), dtype=np.float64)
        status = kern.eval_tape_batch(self.ops, self.arga, self.argb,
                                      self.consts, vals, self.out, out)
        raise_for_status(int(status))
        return out


def compile_tape(exprs: Sequence[ex.Expr], var_order: Sequence[str]) -> Tape:
    """Topologically order the shared DAG of ``exprs`` into a :class:`Tape`.

    Every variable appearing in the expressions must be listed in
    ``var_order`` (compilation is the binding point, so lookups inside the
    hot loop are plain indexing).
    """
    slot = {name: i for i, name in enumerate(var_order)}

    # collect reachable nodes, then emit in serial order (children first:
    # interning guarantees child.serial < parent.serial)
    seen: dict = {}
    stack = list(exprs)
    while stack:
        n = stack.pop()
        if n.serial in seen:
            continue
        seen[n.serial] = n
        stack.extend(n.args)
    nodes = [seen[s] for s in sorted(seen)]

    n_instr = len(nodes)
    ops = np.zeros(n_instr, dtype=np.int32)
    arga = np.zeros(n_instr, dtype=np.int32)
    argb = np.zeros(n_instr, dtype=np.int32)
    consts: list = []
    reg_of: dict = {}

    for i, node in enumerate(nodes):
        reg_of[node.serial] = i
        op = node.op
        if op == ex.CONST:
            ops[i] = OP_CONST
            arga[i] = len(consts)
            consts.append(node.payload)
        elif op == ex.VAR:
            try:
                ops[i] = OP_VAR
                arga[i] = slot[node.payload]
            except KeyError:
                raise UnboundVariableError(node.payload) from None
        elif op in _UNARY_CODE:
            ops[i] = _UNARY_CODE[op]
            arga[i] = reg_of[node.args[0].serial]
        elif op in _BINARY_CODE:
            ops[i] = _BINARY_CODE[op]
            arga[i] = reg_of[node.args[0].serial]
            argb[i] = reg_of[node.args[1].serial]
        elif op == ex.POW:
            r = node.payload
            arga[i] = reg_of[node.args[0].serial]
            if r.denominator == 1 and abs(r.numerator) < 2 ** 30:
                ops[i] = OP_IPOW
                argb[i] = r.numerator
            else:
                ops[i] = OP_FPOW
                argb[i] = len(consts)
                consts.append(float(r))
        else:
            raise AssertionError(f"unhandled op {op}")

    out = np.array([reg_of[e.serial] for e in exprs], dtype=np.int32)
    return Tape(ops, arga, argb, np.asarray(consts, dtype=np.float64), out,
                var_order)
