"""Configuration files: parsing, validation, resolution and echo.

One TOML file drives every subcommand, with sections

    [params]    physical constants; values may be numbers, [re, im] pairs
                for the pumps, or arithmetic expressions over other
                parameter names (e.g. delta1 = "0.001 * coupling_j"),
                resolved once at load time and echoed resolved.
    [grids]     frequency/angle grid shape for the criteria.
    [ensemble]  stochastic simulation block.
    [sweep]     two-axis parameter scan specification.

Expressions support + - * / ** and parentheses over numeric literals and
previously defined parameter names; nothing else evaluates.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

import numpy as np

from .errors import ConfigError
from .model import CouplerParams
from .positive_p import EnsembleConfig

PARAM_FIELDS = ("gamma1", "gamma2", "delta1", "delta2", "eps1", "eps2",
                "chi1", "chi2", "coupling_j")
REAL_FIELDS = ("gamma1", "gamma2", "delta1", "delta2", "chi1", "chi2",
               "coupling_j")
OBSERVABLES = ("min_epr_12", "min_epr_21", "classification",
               "min_duan_simon")


@dataclass(frozen=True)
class GridConfig:
    omega_max: Optional[float] = None
    omega_points: int = 400
    theta_points: int = 180
    include_negative: bool = False


@dataclass(frozen=True)
class SweepAxis:
    name: str
    scale: str
    lo: float
    hi: float
    n_points: int


@dataclass(frozen=True)
class SweepSpec:
    axis1: SweepAxis
    axis2: SweepAxis
    observable: str
    fixed: CouplerParams

    def axis_values(self, axis: SweepAxis) -> np.ndarray:
        if axis.scale == "log":
            return np.geomspace(axis.lo, axis.hi, axis.n_points)
        return np.linspace(axis.lo, axis.hi, axis.n_points)


@dataclass
class Config:
    params: CouplerParams
    grids: GridConfig = field(default_factory=GridConfig)
    ensemble: Optional[EnsembleConfig] = None
    sweep: Optional[SweepSpec] = None


_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)


def _eval_expression(text: str, names: Dict[str, complex],
                     fieldname: str) -> complex:
    """Evaluate a restricted arithmetic expression over known names."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(fieldname, f"cannot parse expression {text!r}") \
            from exc

    def walk(node) -> complex:
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value,
                                                         (int, float)):
            return complex(node.value)
        if isinstance(node, ast.Name):
            if node.id not in names:
                raise ConfigError(
                    fieldname, f"unknown name {node.id!r} in expression")
            return names[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op,
                                                        (ast.UAdd, ast.USub)):
            value = walk(node.operand)
            return value if isinstance(node.op, ast.UAdd) else -value
        if isinstance(node, ast.BinOp) and isinstance(node.op,
                                                      _ALLOWED_BINOPS):
            left, right = walk(node.left), walk(node.right)
            if isinstance(node.op, ast.Add):
                return left + right
            if isinstance(node.op, ast.Sub):
                return left - right
            if isinstance(node.op, ast.Mult):
                return left * right
            if isinstance(node.op, ast.Div):
                return left / right
            return left ** right
        raise ConfigError(fieldname,
                          f"unsupported syntax in expression {text!r}")

    return walk(tree)


def _coerce_value(field_name: str, raw, resolved: Dict[str, complex]) -> complex:
    if isinstance(raw, str):
        return _eval_expression(raw, resolved, field_name)
    if isinstance(raw, (int, float)):
        return complex(raw)
    if isinstance(raw, list) and len(raw) == 2 and all(
            isinstance(x, (int, float)) for x in raw):
        return complex(raw[0], raw[1])
    raise ConfigError(field_name,
                      f"expected number, [re, im] pair or expression, "
                      f"got {raw!r}")


def resolve_params(section: dict) -> CouplerParams:
    """Resolve the [params] section, following name references."""
    missing = [f for f in PARAM_FIELDS if f not in section]
    if missing:
        raise ConfigError(missing[0], "required parameter missing")
    unknown = [k for k in section if k not in PARAM_FIELDS]
    if unknown:
        raise ConfigError(unknown[0], "unknown parameter name")

    resolved: Dict[str, complex] = {}
    pending = dict(section)
    for _ in range(len(PARAM_FIELDS) + 1):
        progressed = False
        for name in list(pending):
            raw = pending[name]
            try:
                value = _coerce_value(name, raw, resolved)
            except ConfigError as exc:
                if "unknown name" in str(exc):
                    continue        # dependency not resolved yet
                raise
            resolved[name] = value
            del pending[name]
            progressed = True
        if not pending:
            break
        if not progressed:
            raise ConfigError(sorted(pending)[0],
                              "circular or unresolvable expression")

    kwargs = {}
    for name in PARAM_FIELDS:
        value = resolved[name]
        if name in REAL_FIELDS:
            if abs(value.imag) > 0:
                raise ConfigError(name, "must be real")
            kwargs[name] = value.real
        else:
            kwargs[name] = value
    for name in ("gamma1", "gamma2"):
        if kwargs[name] <= 0:
            raise ConfigError(name, "must be positive")
    for name in PARAM_FIELDS:
        value = kwargs[name]
        if isinstance(value, complex):
            ok = math.isfinite(value.real) and math.isfinite(value.imag)
        else:
            ok = math.isfinite(value)
        if not ok:
            raise ConfigError(name, "must be finite")
    try:
        return CouplerParams(**kwargs)
    except ValueError as exc:
        raise ConfigError("params", str(exc)) from exc


def _parse_grids(section: dict) -> GridConfig:
    known = {"omega_max", "omega_points", "theta_points", "include_negative"}
    for key in section:
        if key not in known:
            raise ConfigError(f"grids.{key}", "unknown grid option")
    omega_max = section.get("omega_max")
    if omega_max is not None:
        omega_max = float(omega_max)
        if omega_max <= 0:
            raise ConfigError("grids.omega_max", "must be positive")
    omega_points = int(section.get("omega_points", 400))
    theta_points = int(section.get("theta_points", 180))
    if omega_points < 2:
        raise ConfigError("grids.omega_points", "need at least 2 points")
    if theta_points < 2:
        raise ConfigError("grids.theta_points", "need at least 2 points")
    return GridConfig(omega_max=omega_max, omega_points=omega_points,
                      theta_points=theta_points,
                      include_negative=bool(section.get("include_negative",
                                                        False)))


def _parse_ensemble(section: dict) -> EnsembleConfig:
    known = {"n_traj", "dt", "t_final", "seed", "record_stride",
             "overflow_guard", "midpoint_iters", "stepper"}
    for key in section:
        if key not in known:
            raise ConfigError(f"ensemble.{key}", "unknown ensemble option")
    for key in ("n_traj", "dt", "t_final", "seed"):
        if key not in section:
            raise ConfigError(f"ensemble.{key}", "required option missing")
    try:
        return EnsembleConfig(
            n_traj=int(section["n_traj"]),
            dt=float(section["dt"]),
            t_final=float(section["t_final"]),
            seed=int(section["seed"]),
            record_stride=int(section.get("record_stride", 1)),
            overflow_guard=(float(section["overflow_guard"])
                            if "overflow_guard" in section else None),
            midpoint_iters=int(section.get("midpoint_iters", 3)),
            stepper=str(section.get("stepper", "semi_implicit")),
        )
    except ValueError as exc:
        raise ConfigError("ensemble", str(exc)) from exc


def _parse_axis(section: dict, which: str) -> SweepAxis:
    for key in ("name", "lo", "hi", "n"):
        if key not in section:
            raise ConfigError(f"sweep.{which}.{key}", "required")
    name = str(section["name"])
    if name not in PARAM_FIELDS:
        raise ConfigError(f"sweep.{which}.name",
                          f"must be one of {PARAM_FIELDS}")
    scale = str(section.get("scale", "linear"))
    if scale not in ("linear", "log"):
        raise ConfigError(f"sweep.{which}.scale", "must be linear or log")
    lo = float(section["lo"])
    hi = float(section["hi"])
    n = int(section["n"])
    if n < 2:
        raise ConfigError(f"sweep.{which}.n", "need at least 2 points")
    if not lo < hi:
        raise ConfigError(f"sweep.{which}.lo", "must satisfy lo < hi")
    if scale == "log" and lo <= 0:
        raise ConfigError(f"sweep.{which}.lo",
                          "log scale requires positive bounds")
    return SweepAxis(name=name, scale=scale, lo=lo, hi=hi, n_points=n)


def _parse_sweep(section: dict, params: CouplerParams) -> SweepSpec:
    known = {"axis1", "axis2", "observable"}
    for key in section:
        if key not in known:
            raise ConfigError(f"sweep.{key}", "unknown sweep option")
    for key in ("axis1", "axis2"):
        if key not in section:
            raise ConfigError(f"sweep.{key}", "required")
    observable = str(section.get("observable", "classification"))
    if observable not in OBSERVABLES:
        raise ConfigError("sweep.observable",
                          f"must be one of {OBSERVABLES}")
    return SweepSpec(axis1=_parse_axis(section["axis1"], "axis1"),
                     axis2=_parse_axis(section["axis2"], "axis2"),
                     observable=observable, fixed=params)


def load_config(path) -> Config:
    """Parse and resolve a configuration file.

    Raises
    ------
    ConfigError
        Naming the offending field for any validation failure.
    """
    path = Path(path)
    try:
        with open(path, "rb") as handle:
            raw = tomllib.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError("config", f"file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"invalid TOML: {exc}") from exc

    if "params" not in raw:
        raise ConfigError("params", "section missing")
    params = resolve_params(raw["params"])
    grids = _parse_grids(raw.get("grids", {}))
    ensemble = (_parse_ensemble(raw["ensemble"])
                if "ensemble" in raw else None)
    sweep = _parse_sweep(raw["sweep"], params) if "sweep" in raw else None
    return Config(params=params, grids=grids, ensemble=ensemble, sweep=sweep)


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def render_resolved(config: Config) -> str:
    """Render a config back to TOML with every expression resolved.

    Feeding the rendered text back through ``load_config`` reproduces the
    same resolved values, which is the round-trip contract for reports.
    """
    p = config.params
    lines = ["[params]"]
    for name in REAL_FIELDS:
        lines.append(f"{name} = {_fmt(getattr(p, name))}")
    for name in ("eps1", "eps2"):
        value = getattr(p, name)
        lines.append(f"{name} = [{_fmt(value.real)}, {_fmt(value.imag)}]")
    g = config.grids
    lines += ["", "[grids]"]
    if g.omega_max is not None:
        lines.append(f"omega_max = {_fmt(g.omega_max)}")
    lines.append(f"omega_points = {g.omega_points}")
    lines.append(f"theta_points = {g.theta_points}")
    lines.append(f"include_negative = {'true' if g.include_negative else 'false'}")
    e = config.ensemble
    if e is not None:
        lines += ["", "[ensemble]"]
        lines.append(f"n_traj = {e.n_traj}")
        lines.append(f"dt = {_fmt(e.dt)}")
        lines.append(f"t_final = {_fmt(e.t_final)}")
        lines.append(f"seed = {e.seed}")
        lines.append(f"record_stride = {e.record_stride}")
        if e.overflow_guard is not None:
            lines.append(f"overflow_guard = {_fmt(e.overflow_guard)}")
        lines.append(f"midpoint_iters = {e.midpoint_iters}")
        lines.append(f"stepper = \"{e.stepper}\"")
    s = config.sweep
    if s is not None:
        lines += ["", "[sweep]"]
        lines.append(f"observable = \"{s.observable}\"")
        for label, axis in (("axis1", s.axis1), ("axis2", s.axis2)):
            lines.append(
                f"{label} = {{ name = \"{axis.name}\", scale = "
                f"\"{axis.scale}\", lo = {_fmt(axis.lo)}, hi = "
                f"{_fmt(axis.hi)}, n = {axis.n_points} }}")
    return "\n".join(lines) + "\n"
