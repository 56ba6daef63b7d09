"""Flat ``section.key = value`` run configuration."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .potentials import BUILTIN_POTENTIALS, Potential, builtin_potential, constant, geometric
from .systems import CATALOG, SystemSpec, TruncationPolicy, builtin_system

_SYSTEM_PARAMS = {
    "doubling": (),
    "golden_cantor": (),
    "gauss": (),
    "linear_cantor": ("N", "r"),
    "perturbed_doubling": ("eps",),
}
_POTENTIAL_KINDS = ("geometric", "constant", "builtin")


@dataclass(frozen=True)
class RunConfig:
    system_name: str = "doubling"
    system_params: tuple = ()
    potential_kind: str = "geometric"
    potential_t: float = 1.0
    potential_values: tuple = ()
    potential_name: str | None = None
    grid_size: int = 257
    depth: int = 12
    anchor: float | None = None
    trunc_epsilon: float = 1e-10
    tol: float = 1e-9
    tol_t: float = 1e-8
    max_iter: int = 10_000
    output_path: str | None = None
    workers: int | None = None
    t_min: float = 0.0
    t_max: float = 1.5
    t_steps: int = 21
    t_lo: float = 0.0
    t_hi: float = 1.0
    _system: SystemSpec = field(default=None, repr=False, compare=False)

    def system(self) -> SystemSpec:
        if self._system is None:
            kw = dict(self.system_params)
            if "N" in kw:
                kw["N"] = int(kw["N"])
            sys = builtin_system(self.system_name, **kw)
            object.__setattr__(self, "_system", sys)
        return self._system

    def potential(self, t: float | None = None) -> Potential:
        if self.potential_kind == "geometric":
            return geometric(self.potential_t if t is None else t)
        if self.potential_kind == "constant":
            return constant(self.potential_values)
        return builtin_potential(self.potential_name)

    def truncation(self) -> TruncationPolicy:
        return TruncationPolicy(epsilon=self.trunc_epsilon)

    def resolved_anchor(self) -> float:
        return self.system().midpoint if self.anchor is None else self.anchor

    def replace(self, **changes) -> "RunConfig":
        cfg = dataclasses.replace(self, **changes)
        return validate(cfg)


# key -> (RunConfig field, parser)
def _int(v):
    f = float(v)
    if not f.is_integer():
        raise ValueError(f"{v!r} is not an integer")
    return int(f)


def _float(v):
    f = float(v)
    if not math.isfinite(f):
        raise ValueError(f"{v!r} is not finite")
    return f


def _floats(v):
    return tuple(_float(p) for p in v.split(",") if p.strip())


_KEYS = {
    "system.name": ("system_name", str),
    "potential.kind": ("potential_kind", str),
    "potential.t": ("potential_t", _float),
    "potential.values": ("potential_values", _floats),
    "potential.name": ("potential_name", str),
    "run.grid_size": ("grid_size", _int),
    "run.depth": ("depth", _int),
    "run.anchor": ("anchor", _float),
    "run.trunc_epsilon": ("trunc_epsilon", _float),
    "run.tol": ("tol", _float),
    "run.tol_t": ("tol_t", _float),
    "run.max_iter": ("max_iter", _int),
    "run.output_path": ("output_path", str),
    "run.workers": ("workers", _int),
    "curve.t_min": ("t_min", _float),
    "curve.t_max": ("t_max", _float),
    "curve.t_steps": ("t_steps", _int),
    "dimension.t_lo": ("t_lo", _float),
    "dimension.t_hi": ("t_hi", _float),
}
_PARAM_KEYS = {f"system.{p}" for ps in _SYSTEM_PARAMS.values() for p in ps}


def parse_config(text: str) -> RunConfig:
    """Parse and validate a run configuration.

    Raises
    ------
    ConfigError
        On syntax errors, unknown or duplicate keys and out-of-range values.
        The message names the line number and key.
    """
    values = {}
    params = {}
    where = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in where:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first set on line {where[key]})")
        where[key] = lineno
        if not value:
            raise ConfigError(f"line {lineno}: key {key!r} has no value")
        if key in _KEYS:
            name, conv = _KEYS[key]
            try:
                values[name] = conv(value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: key {key!r}: {exc}") from None
        elif key in _PARAM_KEYS:
            try:
                params[key.split(".", 1)[1]] = (lineno, _float(value))
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: key {key!r}: {exc}") from None
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")

    name = values.get("system_name", RunConfig.system_name)
    if name not in _SYSTEM_PARAMS:
        ln = where.get("system.name", 0)
        raise ConfigError(f"line {ln}: key 'system.name': unknown system {name!r}; expected one of {', '.join(CATALOG)}")
    for p, (ln, _) in params.items():
        if p not in _SYSTEM_PARAMS[name]:
            raise ConfigError(f"line {ln}: key 'system.{p}' does not apply to {name}")
    values["system_params"] = tuple((p, v) for p, (_, v) in sorted(params.items()))
    return validate(RunConfig(**values), where)


def validate(cfg: RunConfig, where: dict | None = None) -> RunConfig:
    where = where or {}

    def fail(key, msg):
        raise ConfigError(f"line {where.get(key, 0)}: key {key!r}: {msg}")

    if cfg.potential_kind not in _POTENTIAL_KINDS:
        fail("potential.kind", f"unknown potential {cfg.potential_kind!r}; expected one of {_POTENTIAL_KINDS}")
    if cfg.potential_kind == "builtin" and cfg.potential_name not in BUILTIN_POTENTIALS:
        fail("potential.name", f"unknown builtin {cfg.potential_name!r}; expected one of {BUILTIN_POTENTIALS}")
    if cfg.potential_kind == "constant" and not cfg.potential_values:
        fail("potential.values", "constant potential needs a comma-separated list of values")
    if cfg.grid_size < 2:
        fail("run.grid_size", "must be >= 2")
    if cfg.depth < 1:
        fail("run.depth", "must be >= 1")
    if cfg.max_iter < 1:
        fail("run.max_iter", "must be >= 1")
    for key, v in (("run.trunc_epsilon", cfg.trunc_epsilon), ("run.tol", cfg.tol), ("run.tol_t", cfg.tol_t)):
        if not v > 0:
            fail(key, "tolerances must be > 0")
    if cfg.workers is not None and cfg.workers < 1:
        fail("run.workers", "must be >= 1")
    if cfg.t_steps < 2:
        fail("curve.t_steps", "must be >= 2")
    if not cfg.t_max > cfg.t_min:
        fail("curve.t_max", "must exceed curve.t_min")
    if not cfg.t_hi > cfg.t_lo:
        fail("dimension.t_hi", "must exceed dimension.t_lo")
    try:
        sys = cfg.system()
    except (ConfigError, ValueError) as exc:
        fail("system.name", str(exc))
    if cfg.anchor is not None and not sys.contains(cfg.anchor):
        fail("run.anchor", f"{cfg.anchor} outside the hull [{sys.lo}, {sys.hi}]")
    if cfg.potential_kind == "constant":
        if sys.is_countable or len(cfg.potential_values) != sys.branch_count:
            fail("potential.values", f"need one value per branch of {sys.name}")
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)
