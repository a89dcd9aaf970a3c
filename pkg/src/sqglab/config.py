"""Run configuration: a line-based ``key = value`` file with ``#`` comments.

Parsing is fail-closed.  Unknown keys, malformed or out-of-range values and
missing required keys raise :class:`ConfigError` naming the line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .galerkin import INTEGRATORS

REQUIRED = ("m", "T", "dt")
INIT_RECIPES = ("random", "mode", "bump")
GAMMA_METHODS = ("closed_form", "quadrature")


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        super().__init__(f"line {line}: {msg}" if line is not None else msg)
        self.line = line


@dataclass(frozen=True)
class RunConfig:
    # dynamics
    m: int = 32
    T: float = 5.0
    dt: float = 1e-2
    integrator: str = "implicit_midpoint"
    tol: float = 1e-13
    max_iter: int = 100
    stride: int = 10
    seed: int = 0
    threads: int = 1
    # initial data
    init: str = "random"
    init_beta: float = 1.0
    init_norm: float = 1.0
    init_p: int = 1
    init_q: int = 1
    full_modes: int = 256
    # domain: only the square (0, pi)^2 is supported
    domain: str = "pi_square"
    # oversampling (0 means 8 m)
    M: int = 0
    # test function
    rho: float = math.pi / 3
    center_x: float = math.pi / 2
    center_y: float = math.pi / 2
    # gamma
    gamma_methods: tuple[str, ...] = GAMMA_METHODS
    # invariants (rk4 order study)
    rk4_m: int = 16
    rk4_T: float = 1.0
    rk4_dts: tuple[float, ...] = (4e-3, 2e-3, 1e-3)
    rk4_init_norm: float = 20.0
    # commutators
    s: float = 1.0
    p: float = math.inf
    lemma_m: int = 8
    lemma_seeds: int = 10
    bound_m: int = 32
    chi_p: float = 4.0
    ladder_levels: int = 5
    # heat oracle
    heat_times: tuple[float, ...] = (0.01, 0.1, 1.0)
    heat_pairs: int = 25
    frac_orders: tuple[float, ...] = (0.5, 1.0, 1.5)
    # convergence
    ladder: tuple[int, ...] = (8, 16, 32, 64)
    decay_ladder: tuple[int, ...] = (16, 64, 256)
    decay_k: float = 0.0
    epsilon: float = 0.25
    weak_m: int = 16
    weak_T: float = 2.0
    weak_dt: float = 2e-2
    weak_stride: int = 5
    # output
    out: str = "out"
    figures: bool = True

    @property
    def oversampling(self) -> int:
        return self.M or 8 * self.m

    def to_text(self) -> str:
        """Effective configuration; parsing it reproduces this object."""
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


_FIELDS = {f.name: f for f in fields(RunConfig)}
_DEFAULTS = RunConfig()


def _parse_scalar(kind, text: str, key: str, line: int):
    try:
        if kind is bool:
            low = text.lower()
            if low not in ("true", "false"):
                raise ValueError
            return low == "true"
        if kind is int:
            return int(text)
        if kind is float:
            v = float(text)
            if math.isnan(v):
                raise ValueError
            return v
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind.__name__}", line) from None


def _kind(name: str):
    default = getattr(_DEFAULTS, name)
    if isinstance(default, tuple):
        return tuple, type(default[0])
    return type(default), None


def _range(lo=None, hi=None, lo_open=False, hi_open=False):
    def check(v):
        if lo is not None and (v <= lo if lo_open else v < lo):
            return False
        return hi is None or (v < hi if hi_open else v <= hi)
    return check


def _choice(options):
    return lambda v: v in options


def _each(pred):
    return lambda v: len(v) > 0 and all(pred(x) for x in v)


_RULES = {
    "m": (_range(1, 4096), "1 <= m <= 4096"),
    "T": (_range(0, None, True), "T > 0"),
    "dt": (_range(0, None, True), "dt > 0"),
    "integrator": (_choice(INTEGRATORS), "one of " + ", ".join(INTEGRATORS)),
    "tol": (_range(0, 1e-3, True), "0 < tol <= 1e-3"),
    "max_iter": (_range(1), "max_iter >= 1"),
    "stride": (_range(1), "stride >= 1"),
    "seed": (_range(0, 2 ** 64 - 1), "0 <= seed < 2^64"),
    "threads": (_range(0, 1024), "0 <= threads <= 1024 (0 = auto)"),
    "init": (_choice(INIT_RECIPES), "one of " + ", ".join(INIT_RECIPES)),
    "init_beta": (_range(0), "init_beta >= 0"),
    "init_norm": (_range(0, None, True), "init_norm > 0"),
    "init_p": (_range(1), "init_p >= 1"),
    "init_q": (_range(1), "init_q >= 1"),
    "full_modes": (_range(1, 65536), "1 <= full_modes <= 65536"),
    "domain": (_choice(("pi_square",)), "pi_square (the only supported domain)"),
    "M": (_range(0, 65536), "0 <= M <= 65536 (0 = 8 m)"),
    "rho": (_range(0, None, True), "rho > 0"),
    "center_x": (_range(0, math.pi, True, True), "0 < center_x < pi"),
    "center_y": (_range(0, math.pi, True, True), "0 < center_y < pi"),
    "gamma_methods": (_each(_choice(GAMMA_METHODS)), "subset of " + ", ".join(GAMMA_METHODS)),
    "rk4_m": (_range(1, 4096), "1 <= rk4_m <= 4096"),
    "rk4_T": (_range(0, None, True), "rk4_T > 0"),
    "rk4_dts": (_each(_range(0, None, True)), "positive step sizes"),
    "rk4_init_norm": (_range(0, None, True), "rk4_init_norm > 0"),
    "s": (_range(0, 2, True, True), "0 < s < 2"),
    "p": (_range(1), "p >= 1 (inf allowed)"),
    "lemma_m": (_range(1, 1024), "1 <= lemma_m <= 1024"),
    "lemma_seeds": (_range(1, 1000), "1 <= lemma_seeds <= 1000"),
    "bound_m": (_range(1, 1024), "1 <= bound_m <= 1024"),
    "chi_p": (_range(1, None), "chi_p >= 1"),
    "ladder_levels": (_range(1, 12), "1 <= ladder_levels <= 12"),
    "heat_times": (_each(_range(0, None, True)), "positive times"),
    "heat_pairs": (_range(1, 10000), "1 <= heat_pairs <= 10000"),
    "frac_orders": (_each(lambda v: 0 < v < 2), "orders in (0, 2)"),
    "ladder": (_each(_range(1, 4096)), "levels in [1, 4096]"),
    "decay_ladder": (_each(_range(1, 8192)), "levels in [1, 8192]"),
    "decay_k": (_range(0, 4), "0 <= decay_k <= 4"),
    "epsilon": (_range(0, 1, True), "0 < epsilon <= 1"),
    "weak_m": (_range(1, 1024), "1 <= weak_m <= 1024"),
    "weak_T": (_range(0, None, True), "weak_T > 0"),
    "weak_dt": (_range(0, None, True), "weak_dt > 0"),
    "weak_stride": (_range(1), "weak_stride >= 1"),
}


def parse_text(text: str) -> RunConfig:
    values: dict = {}
    seen: dict[str, int] = {}
    lineno = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first set on line {seen[key]})", lineno)
        if not val:
            raise ConfigError(f"{key}: empty value", lineno)
        seen[key] = lineno
        kind, item = _kind(key)
        if kind is tuple:
            v = tuple(_parse_scalar(item, x.strip(), key, lineno) for x in val.split(","))
        else:
            v = _parse_scalar(kind, val, key, lineno)
        rule = _RULES.get(key)
        if rule is not None and not rule[0](v):
            raise ConfigError(f"{key} = {val} is invalid; expected {rule[1]}", lineno)
        values[key] = v
    missing = [k for k in REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required key(s) at end of file: {', '.join(missing)}", lineno)
    cfg = replace(_DEFAULTS, **values)
    if cfg.rho >= min(cfg.center_x, cfg.center_y, math.pi - cfg.center_x, math.pi - cfg.center_y):
        line = seen.get("rho") or seen.get("center_x") or seen.get("center_y")
        raise ConfigError("test-function support must lie inside the square", line)
    n = round(cfg.T / cfg.dt)
    if abs(n * cfg.dt - cfg.T) > 1e-9 * cfg.T:
        raise ConfigError(f"T = {cfg.T} is not a multiple of dt = {cfg.dt}", seen.get("dt"))
    return cfg


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    return parse_text(path.read_text(encoding="utf-8"))


def write_effective(cfg: RunConfig, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "effective_config.txt"
    path.write_text(cfg.to_text(), encoding="utf-8")
    return path
