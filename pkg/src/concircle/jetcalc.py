"""Calculus on the prolonged velocity space of a 2-dimensional manifold.

Jet coordinates are scalar expression variables ``x{i}_{k}`` for index
i in {0, 1} and derivative order k (0 = position, 1 = velocity u,
2 = u-dot, 3 = u-double-dot, ...), capped at a configurable order (default
7, enough to push a third-order source form through three total
derivatives).

Implemented operators, all exact/symbolic with numeric zero-testing on
seeded random jet points:

* total derivative ``d_T`` (degree-0 derivation of type d),
* exterior differential on functions and 1-forms,
* insertion derivations ``iota_r`` (degree 0, type i, factorial ladder),
* the Lagrange derivative: the alternating series
  ``(iota_0 - d_T iota_1 + d_T^2 iota_2 / 2! - ...) d``, which maps
  Lagrangians to their source (Euler-Poisson) 1-forms and 1-forms to their
  obstruction 2-forms (the variationality test is "the obstruction vanishes"),
* the reparameterisation generators ``zeta_1``, ``zeta_2`` with the
  homogeneity (Zermelo) and parameter-independence residuals.

Expressions are never simplified; "is zero" is decided by evaluating at
random jet points with a cancellation-aware scale (the largest top-level
additive term before cancellation).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import expr as ex
from .errors import OrderOverflowError
from .tape import compile_tape

ORDER_CAP_DEFAULT = 7
DIM = 2

Slot = Tuple[int, int]  # (index i, order k)

_VAR_RE = re.compile(r"^x([01])_([0-9]+)$")


class JetVar(NamedTuple):
    """A jet coordinate: index i in {0, 1} and derivative order k
    (0 = position, 1 = velocity, ...), interned as the expression variable
    ``x{i}_{k}``."""

    i: int
    k: int

    @property
    def name(self) -> str:
        return f"x{self.i}_{self.k}"

    def expr(self) -> ex.Expr:
        return ex.var(self.name)


def var_name(i: int, k: int) -> str:
    return JetVar(i, k).name


def jet_var(i: int, k: int) -> ex.Expr:
    return ex.var(var_name(i, k))


def xvar(i: int) -> ex.Expr:
    return jet_var(i, 0)


def uvar(i: int) -> ex.Expr:
    return jet_var(i, 1)


def udotvar(i: int) -> ex.Expr:
    return jet_var(i, 2)


def parse_var_name(name: str) -> Optional[JetVar]:
    m = _VAR_RE.match(name)
    if m is None:
        return None
    return JetVar(int(m.group(1)), int(m.group(2)))


def _sorted_jet_vars(e: ex.Expr) -> List[Tuple[Slot, str]]:
    out = []
    for name in e.vars:
        slot = parse_var_name(name)
        if slot is None:
            raise ValueError(f"'{name}' is not a jet variable")
        out.append((slot, name))
    out.sort()
    return out


def max_order(e: ex.Expr) -> int:
    """Highest derivative order appearing in the expression (-1 if none)."""
    best = -1
    for (i, k), _ in _sorted_jet_vars(e):
        best = max(best, k)
    return best


# ---------------------------------------------------------------------------
# total derivative
# ---------------------------------------------------------------------------

_dT_memo: dict = {}


def total_derivative(e: ex.Expr, order_cap: int = ORDER_CAP_DEFAULT) -> ex.Expr:
    """d_T f = sum_k x_(k+1)^i  d f / d x_(k)^i.

    Raises :class:`OrderOverflowError` if the result would need an order
    above ``order_cap``.
    """
    key = (e.serial, order_cap)
    hit = _dT_memo.get(key)
    if hit is not None:
        return hit
    acc = ex.ZERO
    for (i, k), name in _sorted_jet_vars(e):
        if k + 1 > order_cap:
            raise OrderOverflowError(
                f"d_T needs order {k + 1} > cap {order_cap} (variable {name})")
        acc = ex.add(acc, ex.mul(jet_var(i, k + 1), ex.diff(e, name)))
    _dT_memo[key] = acc
    return acc


# ---------------------------------------------------------------------------
# differential forms over the jet covector basis dx_(k)^i
# ---------------------------------------------------------------------------

def slot_label(slot: Slot) -> str:
    i, k = slot
    return f"dx{i}_({k})"


class Form1:
    """Degree-1 form: coefficients over the covectors dx_(k)^i."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Optional[Dict[Slot, ex.Expr]] = None):
        self.coeffs = {}
        if coeffs:
            for slot, c in coeffs.items():
                if not c.is_zero():
                    self.coeffs[slot] = c

    def add_term(self, slot: Slot, c: ex.Expr) -> None:
        if c.is_zero():
            return
        old = self.coeffs.get(slot)
        new = c if old is None else ex.add(old, c)
        if new.is_zero():
            self.coeffs.pop(slot, None)
        else:
            self.coeffs[slot] = new

    def items(self) -> List[Tuple[Slot, ex.Expr]]:
        return sorted(self.coeffs.items())

    def max_basis_order(self) -> int:
        return max((k for (_, k) in self.coeffs), default=-1)

    def scaled(self, factor: float) -> "Form1":
        f = ex.const(factor)
        return Form1({s: ex.mul(f, c) for s, c in self.coeffs.items()})

    def __add__(self, other: "Form1") -> "Form1":
        out = Form1(dict(self.coeffs))
        for slot, c in other.coeffs.items():
            out.add_term(slot, c)
        return out

    def __sub__(self, other: "Form1") -> "Form1":
        out = Form1(dict(self.coeffs))
        for slot, c in other.coeffs.items():
            out.add_term(slot, ex.neg(c))
        return out

    def source_part(self) -> "Form1":
        return Form1({s: c for s, c in self.coeffs.items() if s[1] == 0})

    def __repr__(self):
        parts = [f"({c}) {slot_label(s)}" for s, c in self.items()]
        return "Form1[" + " + ".join(parts) + "]" if parts else "Form1[0]"


class Form2:
    """Degree-2 form: antisymmetric coefficients over dx_(k)^i ^ dx_(m)^j.

    Stored upper-triangular in the slot order; the sign convention is applied
    on insertion, so antisymmetry holds structurally.
    """

    __slots__ = ("coeffs",)

    def __init__(self):
        self.coeffs: Dict[Tuple[Slot, Slot], ex.Expr] = {}

    def add_term(self, a: Slot, b: Slot, c: ex.Expr) -> None:
        if c.is_zero() or a == b:
            return
        if a > b:
            a, b = b, a
            c = ex.neg(c)
        key = (a, b)
        old = self.coeffs.get(key)
        new = c if old is None else ex.add(old, c)
        if new.is_zero():
            self.coeffs.pop(key, None)
        else:
            self.coeffs[key] = new

    def items(self) -> List[Tuple[Tuple[Slot, Slot], ex.Expr]]:
        return sorted(self.coeffs.items())

    def coefficient(self, a: Slot, b: Slot) -> ex.Expr:
        if a == b:
            return ex.ZERO
        if a > b:
            c = self.coeffs.get((b, a))
            return ex.ZERO if c is None else ex.neg(c)
        c = self.coeffs.get((a, b))
        return ex.ZERO if c is None else c

    def max_basis_order(self) -> int:
        return max((max(a[1], b[1]) for (a, b) in self.coeffs), default=-1)

    def scaled(self, factor: float) -> "Form2":
        out = Form2()
        f = ex.const(factor)
        for (a, b), c in self.coeffs.items():
            out.add_term(a, b, ex.mul(f, c))
        return out

    def __add__(self, other: "Form2") -> "Form2":
        out = Form2()
        for (a, b), c in self.coeffs.items():
            out.add_term(a, b, c)
        for (a, b), c in other.coeffs.items():
            out.add_term(a, b, c)
        return out

    def __repr__(self):
        parts = [f"({c}) {slot_label(a)}^{slot_label(b)}"
                 for (a, b), c in self.items()]
        return "Form2[" + " + ".join(parts) + "]" if parts else "Form2[0]"


def exterior_d(f: ex.Expr) -> Form1:
    out = Form1()
    for slot, name in _sorted_jet_vars(f):
        out.add_term(slot, ex.diff(f, name))
    return out


def exterior_d1(omega: Form1) -> Form2:
    out = Form2()
    for slot, c in omega.items():
        for vslot, name in _sorted_jet_vars(c):
            out.add_term(vslot, slot, ex.diff(c, name))
    return out


def _iota_factor(k: int, r: int) -> float:
    return float(math.factorial(k) // math.factorial(k - r))


def iota(r: int, form):
    """Insertion derivation: dx_(k) -> k!/(k-r)! dx_(k-r), zero for r > k."""
    if r < 0:
        raise ValueError("r must be >= 0")
    if isinstance(form, Form1):
        out = Form1()
        for (i, k), c in form.items():
            if k >= r:
                out.add_term((i, k - r), ex.mul(ex.const(_iota_factor(k, r)), c))
        return out
    if isinstance(form, Form2):
        out = Form2()
        for ((i, k), (j, m)), c in form.items():
            if k >= r:
                out.add_term((i, k - r), (j, m),
                             ex.mul(ex.const(_iota_factor(k, r)), c))
            if m >= r:
                out.add_term((i, k), (j, m - r),
                             ex.mul(ex.const(_iota_factor(m, r)), c))
        return out
    raise TypeError("iota acts on Form1 or Form2")


def total_derivative_form(form, order_cap: int = ORDER_CAP_DEFAULT):
    """d_T extended to forms: derives coefficients and shifts basis covectors
    (d_T dx_(k) = dx_(k+1), since d_T commutes with d)."""
    if isinstance(form, Form1):
        out = Form1()
        for (i, k), c in form.items():
            out.add_term((i, k), total_derivative(c, order_cap))
            if k + 1 > order_cap:
                raise OrderOverflowError(
                    f"d_T would shift basis covector to order {k + 1} > cap")
            out.add_term((i, k + 1), c)
        return out
    if isinstance(form, Form2):
        out = Form2()
        for (a, b), c in form.items():
            out.add_term(a, b, total_derivative(c, order_cap))
            for slot, other, sign in ((a, b, 1.0), (b, a, -1.0)):
                i, k = slot
                if k + 1 > order_cap:
                    raise OrderOverflowError(
                        f"d_T would shift basis covector to order {k + 1} > cap")
                shifted = c if sign > 0 else ex.neg(c)
                out.add_term((i, k + 1), other, shifted)
        return out
    raise TypeError("expected Form1 or Form2")


def _lagrange_series(differential, order_cap: int):
    rmax = differential.max_basis_order()
    acc = None
    for r in range(rmax + 1):
        term = iota(r, differential)
        for _ in range(r):
            term = total_derivative_form(term, order_cap)
        term = term.scaled((-1.0) ** r / math.factorial(r))
        acc = term if acc is None else acc + term
    if acc is None:
        acc = differential.__class__() if isinstance(differential, Form2) else Form1()
    return acc


def lagrange_derivative(f: ex.Expr,
                        order_cap: int = ORDER_CAP_DEFAULT) -> Form1:
    """The source (Euler-Poisson) 1-form of a Lagrangian function.

    Computed from the alternating iota/d_T series applied to df; the
    coefficients the series leaves on higher covectors cancel identically
    and are dropped (a regression test evaluates them to confirm).
    """
    return _lagrange_series(exterior_d(f), order_cap).source_part()


def lagrange_series_full(f: ex.Expr,
                         order_cap: int = ORDER_CAP_DEFAULT) -> Form1:
    """Unprojected series result, for tests of the cancellation."""
    return _lagrange_series(exterior_d(f), order_cap)


def lagrange_derivative1(omega: Form1,
                         order_cap: int = ORDER_CAP_DEFAULT) -> Form2:
    """The variationality-obstruction 2-form of a source form."""
    return _lagrange_series(exterior_d1(omega), order_cap)


# ---------------------------------------------------------------------------
# jet points, sampling, numeric zero tests
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JetPoint:
    """Numeric values of x_(k)^i, k <= order cap; dimension fixed at 2."""

    values: np.ndarray  # shape (2, K+1)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != DIM:
            raise ValueError("JetPoint values must have shape (2, K+1)")
        if not np.all(np.isfinite(v)):
            raise ValueError("JetPoint values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def order_cap(self) -> int:
        return self.values.shape[1] - 1

    def env(self) -> Dict[str, float]:
        return {var_name(i, k): float(self.values[i, k])
                for i in range(DIM) for k in range(self.values.shape[1])}


@dataclass(frozen=True)
class ZeroTest:
    """Probabilistic zero test: |value| < atol + rtol * scale at every sample,
    scale being the largest top-level additive term before cancellation."""

    atol: float = 1e-9
    rtol: float = 1e-7
    n_samples: int = 100
    seed: int = 42


DEFAULT_ZERO_TEST = ZeroTest()

DEFAULT_INTERVALS = ((-2.0, -0.5), (0.5, 2.0))


def sample_from_intervals(rng, intervals, n):
    intervals = tuple(intervals)
    idx = rng.integers(0, len(intervals), n)
    lo = np.array([iv[0] for iv in intervals])[idx]
    hi = np.array([iv[1] for iv in intervals])[idx]
    return lo + (hi - lo) * rng.uniform(0.0, 1.0, n)


def sample_jet_env(n_samples: int, seed: int,
                   order_cap: int = ORDER_CAP_DEFAULT,
                   base_intervals=None) -> Dict[str, np.ndarray]:
    """Vectorised random jet samples, each component away from zero.

    ``base_intervals`` optionally overrides the sampling region of the two
    base coordinates (list of interval tuples per coordinate), used for
    metrics with restricted charts.
    """
    rng = np.random.default_rng(seed)
    env = {}
    for i in range(DIM):
        for k in range(order_cap + 1):
            if k == 0 and base_intervals is not None:
                intervals = base_intervals[i]
            else:
                intervals = DEFAULT_INTERVALS
            env[var_name(i, k)] = sample_from_intervals(rng, intervals,
                                                         n_samples)
    return env


def sample_jet_points(n_samples: int, seed: int,
                      order_cap: int = ORDER_CAP_DEFAULT,
                      base_intervals=None) -> List[JetPoint]:
    env = sample_jet_env(n_samples, seed, order_cap, base_intervals)
    pts = []
    for p in range(n_samples):
        vals = np.array([[env[var_name(i, k)][p] for k in range(order_cap + 1)]
                         for i in range(DIM)])
        pts.append(JetPoint(vals))
    return pts


def env_from_points(points: Sequence[JetPoint]) -> Dict[str, np.ndarray]:
    cap = min(p.order_cap for p in points)
    return {var_name(i, k): np.array([p.values[i, k] for p in points])
            for i in range(DIM) for k in range(cap + 1)}


def evaluate_batch(exprs: Sequence[ex.Expr],
                   env: Dict[str, np.ndarray]) -> np.ndarray:
    """Evaluate expressions at all sample points at once; (n_exprs, n_pts)."""
    if not exprs:
        return np.zeros((0, 0))
    names = sorted(set().union(*(e.vars for e in exprs)))
    n_pts = len(next(iter(env.values()))) if env else 1
    values = np.empty((len(names), n_pts), dtype=np.float64)
    for row, name in enumerate(names):
        values[row] = env[name]
    tape = compile_tape(list(exprs), names)
    return tape.eval_many(values)


def residuals_with_scale(exprs: Sequence[ex.Expr],
                         env: Dict[str, np.ndarray]):
    """Evaluate each expression and the cancellation scale of its top-level
    additive terms.  Returns (values, scales), both (n_exprs, n_pts)."""
    all_terms: List[ex.Expr] = []
    signs: List[float] = []
    offsets = [0]
    for e in exprs:
        for s, t in ex.flatten_terms(e):
            all_terms.append(t)
            signs.append(s)
        offsets.append(len(all_terms))
    term_vals = evaluate_batch(all_terms, env)
    n_pts = term_vals.shape[1] if all_terms else 0
    values = np.zeros((len(exprs), n_pts))
    scales = np.zeros((len(exprs), n_pts))
    sgn = np.asarray(signs)
    for idx in range(len(exprs)):
        lo, hi = offsets[idx], offsets[idx + 1]
        if lo == hi:
            continue
        block = term_vals[lo:hi]
        values[idx] = (sgn[lo:hi, None] * block).sum(axis=0)
        scales[idx] = np.abs(block).max(axis=0)
    return values, scales


@dataclass
class ZeroReport:
    passed: bool
    max_raw: float
    max_scaled: float  # |value| / (atol + rtol*scale), max over coeffs/points
    labels: List[str] = field(default_factory=list)
    values: Optional[np.ndarray] = None
    scales: Optional[np.ndarray] = None

    def csv_rows(self) -> List[Tuple[int, str, float]]:
        """(point index, coefficient label, value) triples, CSV-ready."""
        if self.values is None:
            return []
        return [(p, self.labels[c], float(self.values[c, p]))
                for c in range(self.values.shape[0])
                for p in range(self.values.shape[1])]

    def write_csv(self, path) -> None:
        import csv
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["point", "coefficient", "value"])
            for point, label, value in self.csv_rows():
                writer.writerow([point, label, f"{value:.17g}"])


def check_zero(exprs: Sequence[ex.Expr], env: Dict[str, np.ndarray],
               cfg: ZeroTest = DEFAULT_ZERO_TEST,
               labels: Optional[List[str]] = None) -> ZeroReport:
    if not exprs:
        return ZeroReport(True, 0.0, 0.0, labels or [])
    values, scales = residuals_with_scale(exprs, env)
    denom = cfg.atol + cfg.rtol * scales
    scaled = np.abs(values) / denom
    return ZeroReport(bool(np.all(scaled <= 1.0)),
                      float(np.abs(values).max()),
                      float(scaled.max()),
                      labels or [str(i) for i in range(len(exprs))],
                      values, scales)


def check_form_zero(form, env: Dict[str, np.ndarray],
                    cfg: ZeroTest = DEFAULT_ZERO_TEST) -> ZeroReport:
    if isinstance(form, Form1):
        labels = [slot_label(s) for s, _ in form.items()]
        exprs = [c for _, c in form.items()]
    else:
        labels = [f"{slot_label(a)}^{slot_label(b)}" for (a, b), _ in form.items()]
        exprs = [c for _, c in form.items()]
    return check_zero(exprs, env, cfg, labels)


# ---------------------------------------------------------------------------
# variationality and the reparameterisation generators
# ---------------------------------------------------------------------------

@dataclass
class VariationalityReport:
    passed: bool
    max_residual: float        # raw |coefficient| maximum
    max_scaled: float
    n_coefficients: int


def variationality_check(source: Form1, samples: Sequence[JetPoint],
                         cfg: ZeroTest = DEFAULT_ZERO_TEST,
                         order_cap: int = ORDER_CAP_DEFAULT) -> VariationalityReport:
    """A source form is variational iff its obstruction 2-form vanishes;
    here: iff every coefficient evaluates below tolerance at every sample."""
    for (i, k) in source.coeffs:
        if k != 0:
            raise ValueError("source form must live on dx_(0)^i only")
    obstruction = lagrange_derivative1(source, order_cap)
    env = env_from_points(samples)
    rep = check_form_zero(obstruction, env, cfg)
    return VariationalityReport(rep.passed, rep.max_raw, rep.max_scaled,
                                len(obstruction.coeffs))


def zeta_apply(which: int, f: ex.Expr) -> ex.Expr:
    """Apply a fundamental field of the prolonged reparameterisation group:
    zeta_1 = u d/du + 2 u-dot d/du-dot,  zeta_2 = u d/du-dot."""
    if max_order(f) > 2:
        raise ValueError("zeta fields act on functions of jet order <= 2")
    acc = ex.ZERO
    for i in range(DIM):
        if which == 1:
            acc = ex.add(acc, ex.mul(uvar(i), ex.diff(f, var_name(i, 1))))
            acc = ex.add(acc, ex.mul(ex.mul(ex.const(2.0), udotvar(i)),
                                     ex.diff(f, var_name(i, 2))))
        elif which == 2:
            acc = ex.add(acc, ex.mul(uvar(i), ex.diff(f, var_name(i, 2))))
        else:
            raise ValueError("which must be 1 or 2")
    return acc


@dataclass
class ResidualPair:
    zeta1: np.ndarray
    zeta2: np.ndarray

    @property
    def max_zeta1(self) -> float:
        return float(np.abs(self.zeta1).max())

    @property
    def max_zeta2(self) -> float:
        return float(np.abs(self.zeta2).max())


def zermelo_check(L: ex.Expr, samples: Sequence[JetPoint]) -> ResidualPair:
    """Residuals (zeta_1 L - L, zeta_2 L); both vanish iff the action
    integral is parameter-independent for the first-order part."""
    env = env_from_points(samples)
    vals = evaluate_batch([ex.sub(zeta_apply(1, L), L), zeta_apply(2, L)], env)
    return ResidualPair(vals[0], vals[1])


def param_independence_check(f: ex.Expr,
                             samples: Sequence[JetPoint]) -> ResidualPair:
    """Residuals (zeta_1 f, zeta_2 f); both vanish iff f is invariant under
    reparameterisation of the curve parameter."""
    env = env_from_points(samples)
    vals = evaluate_batch([zeta_apply(1, f), zeta_apply(2, f)], env)
    return ResidualPair(vals[0], vals[1])
