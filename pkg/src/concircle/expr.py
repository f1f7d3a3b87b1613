"""Symbolic scalar expressions: parse, differentiate exactly, evaluate numerically.

Nodes are immutable and hash-consed (structurally identical subtrees are the
same object), which keeps the large trees produced by repeated total
derivatives shareable and makes memoised differentiation cheap.  The only
rewriting performed by the constructors is constant folding plus the identity
elements (0, 1, double negation, ``e - e``); anything smarter is deliberately
out of scope: downstream code decides expression equality by numeric
sampling.

Grammar (see :func:`parse`)::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | base ('^' exponent)?
    base   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus and takes a *rational literal* exponent:
an optionally signed integer or decimal, or a parenthesised ``p/q``.  Chained
exponents are rejected.  Function names: sin, cos, exp, log, sqrt, abs.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Mapping, Union

import numpy as np

from .errors import DomainError, ParseError, UnboundVariableError

Value = Union[float, np.ndarray]

CONST = "const"
VAR = "var"
NEG = "neg"
SIN = "sin"
COS = "cos"
EXP = "exp"
LOG = "log"
SQRT = "sqrt"
ABS = "abs"
ADD = "add"
SUB = "sub"
MUL = "mul"
DIV = "div"
POW = "pow"

UNARY_FUNCTIONS = {SIN, COS, EXP, LOG, SQRT, ABS}

_EMPTY: frozenset = frozenset()


class Expr:
    """One hash-consed node of an expression tree.

    Use the module-level constructors (:func:`const`, :func:`var`,
    :func:`add`, ...) or the overloaded operators; never instantiate
    directly.  Identity (``is``) coincides with structural equality.
    """

    __slots__ = ("op", "args", "payload", "serial", "vars")

    def __init__(self, op, args, payload, serial, vars_):
        self.op = op
        self.args = args
        self.payload = payload
        self.serial = serial
        self.vars = vars_

    # -- sugar for building expressions in code --------------------------
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return powr(self, exponent)

    def __str__(self):
        return format_expr(self)

    def __repr__(self):
        return f"Expr({format_expr(self)})"

    def is_zero(self) -> bool:
        return self.op == CONST and self.payload == 0.0

    def is_const(self, value=None) -> bool:
        if self.op != CONST:
            return False
        return value is None or self.payload == value


_interned: dict = {}
_next_serial = 0


def _node(op, args=(), payload=None) -> Expr:
    global _next_serial
    key = (op, tuple(a.serial for a in args), payload)
    hit = _interned.get(key)
    if hit is not None:
        return hit
    if op == VAR:
        vars_ = frozenset((payload,))
    elif args:
        vars_ = frozenset().union(*(a.vars for a in args))
    else:
        vars_ = _EMPTY
    node = Expr(op, args, payload, _next_serial, vars_)
    _next_serial += 1
    _interned[key] = node
    return node


def _coerce(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float)):
        return const(float(x))
    raise TypeError(f"cannot treat {x!r} as an expression")


def clear_caches() -> None:
    """Drop the intern table and derivative memos (frees memory between
    unrelated symbolic sessions; live Expr objects stay valid)."""
    _interned.clear()
    _diff_memo.clear()


# ---------------------------------------------------------------------------
# constructors (with constant folding)
# ---------------------------------------------------------------------------

def const(value: float) -> Expr:
    return _node(CONST, payload=float(value))


ZERO = None  # assigned below, after const() exists
ONE = None


def var(name: str) -> Expr:
    return _node(VAR, payload=name)


def neg(a: Expr) -> Expr:
    if a.op == CONST:
        return const(-a.payload)
    if a.op == NEG:
        return a.args[0]
    return _node(NEG, (a,))


def add(a: Expr, b: Expr) -> Expr:
    if a.op == CONST and b.op == CONST:
        return const(a.payload + b.payload)
    if a.is_zero():
        return b
    if b.is_zero():
        return a
    if a.op == NEG and a.args[0] is b:
        return const(0.0)
    if b.op == NEG and b.args[0] is a:
        return const(0.0)
    # canonical operand order maximises sharing of commutative products/sums
    if a.serial > b.serial:
        a, b = b, a
    return _node(ADD, (a, b))


def sub(a: Expr, b: Expr) -> Expr:
    if a is b:
        return const(0.0)
    if a.op == CONST and b.op == CONST:
        return const(a.payload - b.payload)
    if b.is_zero():
        return a
    if a.is_zero():
        return neg(b)
    return _node(SUB, (a, b))


def mul(a: Expr, b: Expr) -> Expr:
    if a.op == CONST and b.op == CONST:
        return const(a.payload * b.payload)
    if a.is_zero() or b.is_zero():
        return const(0.0)
    if a.is_const(1.0):
        return b
    if b.is_const(1.0):
        return a
    if a.is_const(-1.0):
        return neg(b)
    if b.is_const(-1.0):
        return neg(a)
    if a.serial > b.serial:
        a, b = b, a
    return _node(MUL, (a, b))


def div(a: Expr, b: Expr) -> Expr:
    if b.is_const(1.0):
        return a
    if a.op == CONST and b.op == CONST and b.payload != 0.0:
        return const(a.payload / b.payload)
    return _node(DIV, (a, b))


def _unary(op, a: Expr) -> Expr:
    if a.op == CONST:
        v = a.payload
        with np.errstate(all="ignore"):
            folded = {SIN: np.sin, COS: np.cos, EXP: np.exp,
                      LOG: np.log, SQRT: np.sqrt, ABS: np.abs}[op](v)
        if np.isfinite(folded):
            return const(float(folded))
    return _node(op, (a,))


def sin(a: Expr) -> Expr:
    return _unary(SIN, a)


def cos(a: Expr) -> Expr:
    return _unary(COS, a)


def exp(a: Expr) -> Expr:
    return _unary(EXP, a)


def log(a: Expr) -> Expr:
    return _unary(LOG, a)


def sqrt(a: Expr) -> Expr:
    return _unary(SQRT, a)


def abs_(a: Expr) -> Expr:
    return _unary(ABS, a)


def powr(a: Expr, exponent) -> Expr:
    """Power with a constant rational exponent."""
    if not isinstance(exponent, Fraction):
        if isinstance(exponent, int):
            exponent = Fraction(exponent)
        elif isinstance(exponent, float) and exponent == int(exponent):
            exponent = Fraction(int(exponent))
        else:
            raise TypeError("exponent must be an int or Fraction")
    if exponent == 0:
        return const(1.0)
    if exponent == 1:
        return a
    if a.op == CONST:
        base = a.payload
        if base > 0 or (base != 0 and exponent.denominator == 1) \
                or (base == 0 and exponent > 0):
            try:
                folded = (base ** exponent.numerator if exponent.denominator == 1
                          else base ** float(exponent))
            except OverflowError:
                folded = float("inf")
            if np.isfinite(folded):
                return const(float(folded))
    return _node(POW, (a,), exponent)


ZERO = const(0.0)
ONE = const(1.0)


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------

_diff_memo: dict = {}


def diff(e: Expr, name: str) -> Expr:
    """Exact symbolic derivative of ``e`` with respect to variable ``name``.

    Constant-folds only; abs differentiates to e/|e| (undefined at 0, where
    evaluation raises).
    """
    if name not in e.vars:
        return ZERO
    stack = [e]
    while stack:
        n = stack[-1]
        if name not in n.vars or (n.serial, name) in _diff_memo:
            stack.pop()
            continue
        ready = True
        for a in n.args:
            if name in a.vars and (a.serial, name) not in _diff_memo:
                stack.append(a)
                ready = False
        if not ready:
            continue
        _diff_memo[(n.serial, name)] = _diff_node(n, name)
        stack.pop()
    return _diff_memo[(e.serial, name)]


def _dval(e: Expr, name: str) -> Expr:
    if name not in e.vars:
        return ZERO
    return _diff_memo[(e.serial, name)]


def _diff_node(e: Expr, name: str) -> Expr:
    op = e.op
    if op == VAR:
        return ONE if e.payload == name else ZERO
    if op == NEG:
        return neg(_dval(e.args[0], name))
    if op == ADD:
        return add(_dval(e.args[0], name), _dval(e.args[1], name))
    if op == SUB:
        return sub(_dval(e.args[0], name), _dval(e.args[1], name))
    if op == MUL:
        a, b = e.args
        return add(mul(_dval(a, name), b), mul(a, _dval(b, name)))
    if op == DIV:
        a, b = e.args
        return sub(div(_dval(a, name), b), div(mul(a, _dval(b, name)), mul(b, b)))
    if op == SIN:
        return mul(cos(e.args[0]), _dval(e.args[0], name))
    if op == COS:
        return neg(mul(sin(e.args[0]), _dval(e.args[0], name)))
    if op == EXP:
        return mul(e, _dval(e.args[0], name))
    if op == LOG:
        return div(_dval(e.args[0], name), e.args[0])
    if op == SQRT:
        return div(_dval(e.args[0], name), mul(const(2.0), e))
    if op == ABS:
        return mul(div(e.args[0], e), _dval(e.args[0], name))
    if op == POW:
        return mul(mul(const(float(e.payload)), powr(e.args[0], e.payload - 1)),
                   _dval(e.args[0], name))
    raise AssertionError(f"unhandled op {op}")


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _bad(mask) -> bool:
    return bool(np.any(mask))


def evaluate(e: Expr, env: Mapping[str, Value]) -> Value:
    """Evaluate ``e`` in IEEE double precision.

    ``env`` maps variable names to floats or equally-shaped numpy arrays
    (array values evaluate the whole tree pointwise in one walk).  Raises
    :class:`UnboundVariableError` / :class:`DomainError` loudly.
    """
    memo: dict = {}
    stack = [e]
    while stack:
        n = stack[-1]
        if n.serial in memo:
            stack.pop()
            continue
        op = n.op
        if op == CONST:
            memo[n.serial] = n.payload
            stack.pop()
            continue
        if op == VAR:
            try:
                v = env[n.payload]
            except KeyError:
                raise UnboundVariableError(n.payload) from None
            memo[n.serial] = v if isinstance(v, np.ndarray) else float(v)
            stack.pop()
            continue
        ready = True
        for a in n.args:
            if a.serial not in memo:
                stack.append(a)
                ready = False
        if not ready:
            continue
        memo[n.serial] = _apply(n, [memo[a.serial] for a in n.args])
        stack.pop()
    return memo[e.serial]


def _apply(n: Expr, vals):
    op = n.op
    if op == ADD:
        return vals[0] + vals[1]
    if op == SUB:
        return vals[0] - vals[1]
    if op == MUL:
        return vals[0] * vals[1]
    if op == DIV:
        if _bad(vals[1] == 0):
            raise DomainError("division by zero")
        return vals[0] / vals[1]
    if op == NEG:
        return -vals[0]
    if op == SIN:
        return np.sin(vals[0])
    if op == COS:
        return np.cos(vals[0])
    if op == EXP:
        return np.exp(vals[0])
    if op == LOG:
        if _bad(vals[0] <= 0):
            raise DomainError("log of a non-positive value")
        return np.log(vals[0])
    if op == SQRT:
        if _bad(vals[0] < 0):
            raise DomainError("sqrt of a negative value")
        return np.sqrt(vals[0])
    if op == ABS:
        return np.abs(vals[0])
    if op == POW:
        base = vals[0]
        r = n.payload
        if r.denominator == 1:
            k = r.numerator
            if k < 0 and _bad(base == 0):
                raise DomainError("zero raised to a negative power")
            return base ** k
        if _bad(base < 0):
            raise DomainError("negative base with a fractional exponent")
        if float(r) < 0 and _bad(base == 0):
            raise DomainError("zero raised to a negative power")
        return base ** float(r)
    raise AssertionError(f"unhandled op {op}")


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions, rebuilding (and re-folding) the tree."""
    touched = frozenset(mapping.keys())
    if not (e.vars & touched):
        return e
    memo: dict = {}
    stack = [e]
    while stack:
        n = stack[-1]
        if n.serial in memo:
            stack.pop()
            continue
        if not (n.vars & touched):
            memo[n.serial] = n
            stack.pop()
            continue
        if n.op == VAR:
            memo[n.serial] = mapping.get(n.payload, n)
            stack.pop()
            continue
        ready = True
        for a in n.args:
            if a.serial not in memo:
                stack.append(a)
                ready = False
        if not ready:
            continue
        memo[n.serial] = _rebuild(n, tuple(memo[a.serial] for a in n.args))
        stack.pop()
    return memo[e.serial]


def _rebuild(n: Expr, args) -> Expr:
    op = n.op
    if op == ADD:
        return add(*args)
    if op == SUB:
        return sub(*args)
    if op == MUL:
        return mul(*args)
    if op == DIV:
        return div(*args)
    if op == NEG:
        return neg(*args)
    if op == POW:
        return powr(args[0], n.payload)
    if op in UNARY_FUNCTIONS:
        return _unary(op, args[0])
    raise AssertionError(f"unhandled op {op}")


def flatten_terms(e: Expr):
    """Split the top-level +/- chain into (sign, term) pairs.

    Used by the cancellation-aware zero test: the magnitude of the largest
    term is the natural scale against which the (possibly cancelling) sum is
    judged.
    """
    out = []
    stack = [(1.0, e)]
    while stack:
        s, n = stack.pop()
        if n.op == ADD:
            stack.append((s, n.args[0]))
            stack.append((s, n.args[1]))
        elif n.op == SUB:
            stack.append((s, n.args[0]))
            stack.append((-s, n.args[1]))
        elif n.op == NEG:
            stack.append((-s, n.args[0]))
        else:
            out.append((s, n))
    return out


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

_PREC_ADD = 10
_PREC_MUL = 20
_PREC_NEG = 30
_PREC_POW = 40
_PREC_ATOM = 50


def _fmt_const(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def format_expr(e: Expr) -> str:
    """Render to a string that :func:`parse` maps back to an
    evaluation-equivalent tree."""
    def prec_of(n: Expr) -> int:
        if n.op == CONST:
            return _PREC_ATOM if n.payload >= 0 else _PREC_NEG
        return {ADD: _PREC_ADD, SUB: _PREC_ADD, MUL: _PREC_MUL, DIV: _PREC_MUL,
                NEG: _PREC_NEG, POW: _PREC_POW}.get(n.op, _PREC_ATOM)

    def render(n: Expr, ctx: int) -> str:
        op = n.op
        if op == CONST:
            s = _fmt_const(n.payload)
        elif op == VAR:
            s = n.payload
        elif op in UNARY_FUNCTIONS:
            s = f"{op}({render(n.args[0], 0)})"
        elif op == NEG:
            s = "-" + render(n.args[0], _PREC_NEG)
        elif op == ADD:
            s = f"{render(n.args[0], _PREC_ADD)} + {render(n.args[1], _PREC_ADD + 1)}"
        elif op == SUB:
            s = f"{render(n.args[0], _PREC_ADD)} - {render(n.args[1], _PREC_ADD + 1)}"
        elif op == MUL:
            s = f"{render(n.args[0], _PREC_MUL)}*{render(n.args[1], _PREC_MUL + 1)}"
        elif op == DIV:
            s = f"{render(n.args[0], _PREC_MUL)}/{render(n.args[1], _PREC_MUL + 1)}"
        elif op == POW:
            r = n.payload
            es = str(r.numerator) if r.denominator == 1 else f"({r.numerator}/{r.denominator})"
            s = f"{render(n.args[0], _PREC_POW + 1)}^{es}"
        else:
            raise AssertionError(op)
        if prec_of(n) < ctx:
            return f"({s})"
        return s

    return render(e, 0)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()])"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, symbol: str):
        kind, val, off = self.next()
        if kind != "op" or val != symbol:
            raise ParseError(f"expected '{symbol}'", off)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {val!r}", off)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                rhs = self.term()
                e = add(e, rhs) if val == "+" else sub(e, rhs)
            else:
                return e

    def term(self) -> Expr:
        e = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                rhs = self.factor()
                e = mul(e, rhs) if val == "*" else div(e, rhs)
            else:
                return e

    def factor(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return neg(self.factor())
        e = self.base()
        kind, val, off = self.peek()
        if kind == "op" and val == "^":
            self.next()
            r = self.exponent()
            kind2, val2, off2 = self.peek()
            if kind2 == "op" and val2 == "^":
                raise ParseError("chained exponents are not supported", off2)
            return powr(e, r)
        return e

    def exponent(self) -> Fraction:
        # rational literal: [-] NUMBER, or '(' [-] INT [/ INT] ')'
        kind, val, off = self.peek()
        if kind == "op" and val == "(":
            self.next()
            r = self._signed_rational(parenthesised=True)
            self.expect_op(")")
            return r
        return self._signed_rational(parenthesised=False)

    def _signed_rational(self, parenthesised: bool) -> Fraction:
        sign = 1
        kind, val, off = self.peek()
        if kind == "op" and val == "-":
            self.next()
            sign = -1
            kind, val, off = self.peek()
        if kind != "num":
            raise ParseError("exponent must be a rational constant", off)
        self.next()
        num = Fraction(val)  # exact for both integer and decimal literals
        kind2, val2, _ = self.peek()
        if parenthesised and kind2 == "op" and val2 == "/":
            self.next()
            kind3, val3, off3 = self.next()
            if kind3 != "num" or "." in val3 or "e" in val3 or "E" in val3:
                raise ParseError("denominator must be an integer", off3)
            num = num / Fraction(val3)
        return sign * num

    def base(self) -> Expr:
        kind, val, off = self.next()
        if kind == "num":
            return const(float(val))
        if kind == "ident":
            kind2, val2, _ = self.peek()
            if kind2 == "op" and val2 == "(":
                if val not in UNARY_FUNCTIONS:
                    raise ParseError(f"unknown function name '{val}'", off)
                self.next()
                inner = self.expr()
                self.expect_op(")")
                return _unary(val, inner)
            return var(val)
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise ParseError(f"unexpected token {val!r}" if val else "unexpected end of input", off)


def parse(text: str) -> Expr:
    """Parse expression text (see module docstring for the grammar)."""
    return _Parser(text).parse()
