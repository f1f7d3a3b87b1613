"""Scenario configuration: TOML schema, validation, effective-config echo.

Validation is strict: unknown keys are rejected anywhere in the tree and
every error carries the dotted path of the offending field.  A run writes
the fully-resolved configuration (defaults filled in, CLI overrides applied)
next to its outputs; re-running from that file reproduces the outputs
byte-for-byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import tomli

from . import expr as ex
from . import geometry as geo
from .errors import ConfigError, ParseError
from .integrate import IntegratorConfig
from .jetcalc import ZeroTest


@dataclass(frozen=True)
class MetricSpec:
    name: Optional[str] = None
    g00: Optional[str] = None
    g01: Optional[str] = None
    g11: Optional[str] = None
    signature: str = "riemannian"
    orientation: int = 1

    def build(self) -> geo.Metric:
        if self.name is not None:
            metric = geo.metric_by_name(self.name)
            if self.orientation != metric.orientation:
                metric = geo.Metric(*metric.base_components,
                                    signature=metric.signature,
                                    orientation=self.orientation,
                                    name=metric.name,
                                    base_intervals=metric.base_intervals)
            return metric
        comps = []
        for key, text in (("g00", self.g00), ("g01", self.g01),
                          ("g11", self.g11)):
            try:
                e = ex.parse(text)
            except ParseError as err:
                raise ConfigError(f"metric.{key}", str(err)) from None
            extra = e.vars - {"x0", "x1"}
            if extra:
                raise ConfigError(f"metric.{key}",
                                  f"only x0, x1 allowed; got {sorted(extra)}")
            comps.append(e)
        return geo.Metric(comps[0], comps[1], comps[2],
                          signature=self.signature,
                          orientation=self.orientation)


@dataclass(frozen=True)
class ScenarioConfig:
    metric: MetricSpec = MetricSpec(name="flat")
    m: float = 1.0
    integration: IntegratorConfig = IntegratorConfig()
    initial: Optional[Tuple[Tuple[float, float], Tuple[float, float],
                            Tuple[float, float]]] = None
    verification: ZeroTest = ZeroTest()
    corrupt_source_form: bool = False
    convergence_steps: Tuple[float, ...] = (4e-3, 2e-3, 1e-3)
    out_dir: str = "out"
    out_format: str = "csv"

    def require_initial(self):
        if self.initial is None:
            raise ConfigError("integration.initial",
                              "required for this command")
        return self.initial


# ---------------------------------------------------------------------------
# validation helpers
# ---------------------------------------------------------------------------

def _check_keys(table: dict, path: str, allowed: Sequence[str]) -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path else key,
                              "unknown key")


def _get(table: dict, path: str, key: str, types, default=None,
         required: bool = False):
    full = f"{path}.{key}" if path else key
    if key not in table:
        if required:
            raise ConfigError(full, "required field is missing")
        return default
    value = table[key]
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise ConfigError(full, f"expected {types}, got bool")
    if not isinstance(value, types):
        raise ConfigError(full, f"expected {types}, got {type(value).__name__}")
    return value


def _get_pair(table: dict, path: str, key: str, required: bool = False):
    v = _get(table, path, key, list, default=None, required=required)
    if v is None:
        return None
    full = f"{path}.{key}"
    if len(v) != 2 or not all(isinstance(c, (int, float))
                              and not isinstance(c, bool) for c in v):
        raise ConfigError(full, "expected a pair of numbers")
    return (float(v[0]), float(v[1]))


def parse_config(data: dict) -> ScenarioConfig:
    _check_keys(data, "", ("metric", "lagrangian", "integration",
                           "verification", "convergence", "output"))

    mt = data.get("metric", {})
    _check_keys(mt, "metric", ("name", "g00", "g01", "g10", "g11",
                               "signature", "orientation"))
    if "name" in mt and any(k in mt for k in ("g00", "g01", "g11")):
        raise ConfigError("metric", "give either name or explicit components")
    signature = _get(mt, "metric", "signature", str, "riemannian")
    if signature not in ("riemannian", "lorentzian"):
        raise ConfigError("metric.signature",
                          "must be riemannian or lorentzian")
    orientation = _get(mt, "metric", "orientation", int, 1)
    if orientation not in (1, -1):
        raise ConfigError("metric.orientation", "must be 1 or -1")
    if "name" in mt:
        mspec = MetricSpec(name=_get(mt, "metric", "name", str, required=True),
                           signature=signature, orientation=orientation)
    else:
        g00 = _get(mt, "metric", "g00", str, required=True)
        g01 = _get(mt, "metric", "g01", str, required=True)
        g11 = _get(mt, "metric", "g11", str, required=True)
        if "g10" in mt:
            g10 = _get(mt, "metric", "g10", str)
            # structural symmetry check: identical interned trees required
            try:
                if ex.parse(g10) is not ex.parse(g01):
                    raise ConfigError("metric.g10",
                                      "metric must be symmetric (g10 != g01)")
            except ParseError as err:
                raise ConfigError("metric.g10", str(err)) from None
        mspec = MetricSpec(g00=g00, g01=g01, g11=g11, signature=signature,
                           orientation=orientation)

    lag = data.get("lagrangian", {})
    _check_keys(lag, "lagrangian", ("m",))
    m = float(_get(lag, "lagrangian", "m", (int, float), 1.0))
    if m < 0:
        raise ConfigError("lagrangian.m", "must be >= 0")

    it = data.get("integration", {})
    _check_keys(it, "integration", ("method", "h", "atol", "rtol", "t_span",
                                    "stride", "formulation", "initial"))
    initial = None
    if "initial" in it:
        init = it["initial"]
        _check_keys(init, "integration.initial", ("x", "u", "w"))
        x = _get_pair(init, "integration.initial", "x", required=True)
        u = _get_pair(init, "integration.initial", "u", required=True)
        w = _get_pair(init, "integration.initial", "w", required=True)
        initial = (x, u, w)
    t_span = _get_pair(it, "integration", "t_span") or (0.0, 10.0)
    try:
        icfg = IntegratorConfig(
            method=_get(it, "integration", "method", str, "rk4"),
            h=float(_get(it, "integration", "h", (int, float), 1e-3)),
            atol=float(_get(it, "integration", "atol", (int, float), 1e-10)),
            rtol=float(_get(it, "integration", "rtol", (int, float), 1e-10)),
            t_span=t_span,
            stride=_get(it, "integration", "stride", int, 10),
            formulation=_get(it, "integration", "formulation", str,
                             "concircular"),
            m=m)
    except ValueError as err:
        raise ConfigError("integration", str(err)) from None

    ver = data.get("verification", {})
    _check_keys(ver, "verification", ("samples", "seed", "atol", "rtol",
                                      "corrupt_source_form"))
    zt = ZeroTest(
        atol=float(_get(ver, "verification", "atol", (int, float), 1e-9)),
        rtol=float(_get(ver, "verification", "rtol", (int, float), 1e-7)),
        n_samples=_get(ver, "verification", "samples", int, 100),
        seed=_get(ver, "verification", "seed", int, 42))
    if zt.n_samples < 1:
        raise ConfigError("verification.samples", "must be >= 1")
    corrupt = _get(ver, "verification", "corrupt_source_form", bool, False)

    conv = data.get("convergence", {})
    _check_keys(conv, "convergence", ("steps",))
    steps = conv.get("steps", [4e-3, 2e-3, 1e-3])
    if (not isinstance(steps, list) or len(steps) < 3
            or not all(isinstance(s, (int, float)) and not isinstance(s, bool)
                       and s > 0 for s in steps)):
        raise ConfigError("convergence.steps",
                          "need at least three positive step sizes")

    outt = data.get("output", {})
    _check_keys(outt, "output", ("dir", "format"))
    out_fmt = _get(outt, "output", "format", str, "csv")
    if out_fmt != "csv":
        raise ConfigError("output.format", "only 'csv' is supported")

    return ScenarioConfig(metric=mspec, m=m, integration=icfg,
                          initial=initial, verification=zt,
                          corrupt_source_form=corrupt,
                          convergence_steps=tuple(float(s) for s in steps),
                          out_dir=_get(outt, "output", "dir", str, "out"),
                          out_format=out_fmt)


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(str(path), "config file not found") from None
    except tomli.TOMLDecodeError as err:
        raise ConfigError(str(path), f"invalid TOML: {err}") from None
    return parse_config(data)


def apply_overrides(cfg: ScenarioConfig, seed: Optional[int] = None,
                    out_dir: Optional[str] = None) -> ScenarioConfig:
    from dataclasses import replace
    if seed is not None:
        cfg = replace(cfg, verification=ZeroTest(
            atol=cfg.verification.atol, rtol=cfg.verification.rtol,
            n_samples=cfg.verification.n_samples, seed=seed))
    if out_dir is not None:
        cfg = replace(cfg, out_dir=out_dir)
    return cfg


# ---------------------------------------------------------------------------
# effective-config echo (deterministic TOML emission)
# ---------------------------------------------------------------------------

def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)  # JSON escaping is valid for TOML basic strings
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(c) for c in v) + "]"
    raise TypeError(f"cannot emit {type(v)} to TOML")


def effective_toml(cfg: ScenarioConfig) -> str:
    lines: List[str] = []

    def table(name: str, pairs):
        lines.append(f"[{name}]")
        for key, value in pairs:
            if value is not None:
                lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")

    ms = cfg.metric
    table("metric", [("name", ms.name), ("g00", ms.g00), ("g01", ms.g01),
                     ("g11", ms.g11), ("signature", ms.signature),
                     ("orientation", ms.orientation)])
    table("lagrangian", [("m", cfg.m)])
    ic = cfg.integration
    table("integration", [("method", ic.method), ("h", ic.h),
                          ("atol", ic.atol), ("rtol", ic.rtol),
                          ("t_span", list(ic.t_span)), ("stride", ic.stride),
                          ("formulation", ic.formulation)])
    if cfg.initial is not None:
        x, u, w = cfg.initial
        table("integration.initial", [("x", list(x)), ("u", list(u)),
                                      ("w", list(w))])
    vt = cfg.verification
    table("verification", [("samples", vt.n_samples), ("seed", vt.seed),
                           ("atol", vt.atol), ("rtol", vt.rtol),
                           ("corrupt_source_form", cfg.corrupt_source_form)])
    table("convergence", [("steps", list(cfg.convergence_steps))])
    table("output", [("dir", cfg.out_dir), ("format", cfg.out_format)])
    return "\n".join(lines)


def write_effective(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(effective_toml(cfg), encoding="utf-8")
