"""Run configuration: strict YAML parsing, validation and construction of run objects.

All keys live at the top level except the nested maps ``v0``, ``v1`` and
``forcing``.  Unknown keys are errors.  See the README for the full table.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .grids import InvalidParameterError, SurfaceFunction, SurfaceGrid, build_line_grid, build_surface_grid, norm

__all__ = ["ConfigError", "SimConfig", "parse_config", "config_from_dict", "profile_values", "build_run", "Run"]


class ConfigError(InvalidParameterError):
    """Invalid configuration; the message starts with the offending key path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


PROFILE_KEYS = {
    "zero": set(),
    "gaussian": {"amplitude", "center", "width", "parity"},
    "csv": {"path"},
}


@dataclass(frozen=True)
class SimConfig:
    L: float
    n: int
    dt: float
    T: float
    g: float = 9.81
    rho: float = 1000.0
    M: float | None = None
    line_size: int = 2**14
    route: str = "variational"
    scheme: str = "implicit-midpoint"
    stride: int = 1
    coupling: bool = True
    v0: dict = field(default_factory=lambda: {"profile": "zero"})
    v1: dict = field(default_factory=lambda: {"profile": "zero"})
    h0: float = 0.0
    h1: float = 0.0
    forcing: dict = field(default_factory=lambda: {"kind": "zero"})
    output_dir: str = "output"
    snapshot_times: tuple = ()
    seed: int = 0

    def resolved(self) -> dict:
        """Plain dictionary with every default filled in (``M`` resolved to ``2L`` when unset)."""
        out = dataclasses.asdict(self)
        out["M"] = self.line_M
        out["snapshot_times"] = list(self.snapshot_times)
        return out

    @property
    def line_M(self) -> float:
        return float(self.M) if self.M is not None else 2.0 * self.L


_FIELDS = {f.name: f for f in dataclasses.fields(SimConfig)}
_REQUIRED = ("L", "n", "dt", "T")
_TYPES = {
    "L": float, "n": int, "dt": float, "T": float, "g": float, "rho": float, "M": float, "line_size": int,
    "route": str, "scheme": str, "stride": int, "coupling": bool, "v0": dict, "v1": dict, "h0": float,
    "h1": float, "forcing": dict, "output_dir": str, "snapshot_times": list, "seed": int,
}


def _coerce(key: str, value, kind):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {type(value).__name__}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {type(value).__name__}")
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected true/false, got {type(value).__name__}")
        return value
    if not isinstance(value, kind):
        raise ConfigError(key, f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def _check_profile(key: str, spec: dict, base: Path | None) -> dict:
    spec = dict(spec)
    profile = spec.pop("profile", None)
    if profile not in PROFILE_KEYS:
        raise ConfigError(f"{key}.profile", f"must be one of {sorted(PROFILE_KEYS)}")
    extra = set(spec) - PROFILE_KEYS[profile]
    if extra:
        raise ConfigError(f"{key}.{sorted(extra)[0]}", f"unknown key for profile {profile!r}")
    for k in ("amplitude", "center", "width"):
        if k in spec:
            spec[k] = _coerce(f"{key}.{k}", spec[k], float)
    if spec.get("width", 1.0) <= 0:
        raise ConfigError(f"{key}.width", "must be positive")
    if spec.get("parity", "even") not in ("even", "odd"):
        raise ConfigError(f"{key}.parity", "must be 'even' or 'odd'")
    if profile == "csv":
        path = Path(_coerce(f"{key}.path", spec.get("path"), str))
        if base is not None and not path.is_absolute():
            path = base / path
        if not path.is_file():
            raise ConfigError(f"{key}.path", f"file {path} not found")
        spec["path"] = str(path)
    return {"profile": profile, **spec}


def config_from_dict(raw: dict, *, base: Path | None = None) -> SimConfig:
    """Validate a parsed mapping and return a :class:`SimConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("", "configuration must be a mapping")
    unknown = sorted(set(raw) - set(_FIELDS))
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise ConfigError(missing[0], "required key missing")
    vals = {}
    for key, value in raw.items():
        if key == "M" and value is None:
            continue
        vals[key] = _coerce(key, value, _TYPES[key])
    if vals["L"] <= 1:
        raise ConfigError("L", "L must exceed 1")
    if vals["n"] < 8:
        raise ConfigError("n", "n must be at least 8")
    if vals["dt"] <= 0:
        raise ConfigError("dt", "dt must be positive")
    if vals["T"] <= 0:
        raise ConfigError("T", "T must be positive")
    if vals.get("g", 1.0) <= 0 or vals.get("rho", 1.0) <= 0:
        raise ConfigError("g" if vals.get("g", 1.0) <= 0 else "rho", "must be positive")
    if "M" in vals and vals["M"] < vals["L"]:
        raise ConfigError("M", "line half-width M must be at least L")
    size = vals.get("line_size", 2**14)
    if size < 16 or size & (size - 1):
        raise ConfigError("line_size", "must be a power of two >= 16")
    if vals.get("route", "variational") not in ("variational", "reflect", "direct"):
        raise ConfigError("route", "must be 'variational', 'reflect' or 'direct'")
    if vals.get("scheme", "implicit-midpoint") not in ("implicit-midpoint", "rk4"):
        raise ConfigError("scheme", "must be 'implicit-midpoint' or 'rk4'")
    if vals.get("stride", 1) < 1:
        raise ConfigError("stride", "must be a positive number of steps")
    for key in ("v0", "v1"):
        if key in vals:
            vals[key] = _check_profile(key, vals[key], base)
    if "forcing" in vals:
        vals["forcing"] = _check_forcing(vals["forcing"], vals["T"])
    if "snapshot_times" in vals:
        times = [_coerce(f"snapshot_times[{i}]", t, float) for i, t in enumerate(vals["snapshot_times"])]
        if any(t < 0 or t > vals["T"] for t in times):
            raise ConfigError("snapshot_times", "times must lie in [0, T]")
        vals["snapshot_times"] = tuple(times)
    out_dir = vals.get("output_dir", "output")
    if base is not None and not Path(out_dir).is_absolute():
        vals["output_dir"] = str(base / out_dir)
    return SimConfig(**vals)


def _check_forcing(spec: dict, t_end: float) -> dict:
    from .coupling import Forcing

    spec = dict(spec)
    kind = spec.pop("kind", "zero")
    try:
        if kind == "table":
            for k in ("times", "values"):
                spec[k] = [_coerce(f"forcing.{k}", x, float) for x in _coerce(f"forcing.{k}", spec.get(k, []), list)]
        else:
            spec = {k: _coerce(f"forcing.{k}", x, float) for k, x in spec.items()}
        forcing = Forcing(kind, spec)
    except ConfigError:
        raise
    except InvalidParameterError as exc:
        raise ConfigError("forcing", str(exc)) from exc
    if not forcing.covers(t_end):
        raise ConfigError("forcing.times", "forcing table does not cover simulation window")
    return {"kind": kind, **spec}


def parse_config(path) -> SimConfig:
    """Read a YAML file and validate it; relative paths inside resolve against its directory."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError("", f"config file {path} not found")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("", f"YAML syntax error: {exc}") from exc
    return config_from_dict(raw or {}, base=path.parent)


# ---------------------------------------------------------------------------
# building the run
# ---------------------------------------------------------------------------


def profile_values(grid: SurfaceGrid, spec: dict) -> np.ndarray:
    """Node values of an initial-data profile."""
    x = grid.nodes
    kind = spec.get("profile", "zero")
    if kind == "zero":
        return np.zeros(grid.size)
    if kind == "gaussian":
        a = spec.get("amplitude", 1.0)
        c = spec.get("center", 1.0)
        w = spec.get("width", 1.0)
        vals = a * np.exp(-(((np.abs(x) - c) / w) ** 2))
        return vals * np.sign(x) if spec.get("parity", "even") == "odd" else vals
    if kind == "csv":
        data = np.loadtxt(spec["path"], delimiter=",", ndmin=2, comments="#")
        col = data[:, -1]
        if col.size != grid.size:
            raise ConfigError("csv", f"{spec['path']} has {col.size} values, grid has {grid.size} nodes")
        return col
    raise ConfigError("profile", f"unknown profile {kind!r}")


@dataclass
class Run:
    initial: object
    params: object
    op: object
    kernel: object
    forcing: object
    manifest: dict


def _version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:  # pragma: no cover - source checkout without metadata
        return "unknown"


def build_run(config: SimConfig) -> Run:
    """Assemble grids, operator, kernel, forcing and initial state for a configuration."""
    import time

    from threadpoolctl import threadpool_limits

    from .coupling import Forcing, PhysicsParams, SystemState, heave_kernel
    from .grids import gagliardo_half_norm
    from .omega import assemble_dtn

    started = time.perf_counter()
    grid = build_surface_grid(config.L, config.n)
    line = build_line_grid(config.line_M, config.line_size, cover=config.L)
    params = PhysicsParams(config.g, config.rho)
    threads = os.environ.get("FLOATHEAVE_THREADS")
    with threadpool_limits(int(threads) if threads else None):
        op = assemble_dtn(grid, config.route, g=config.g, line=line)
    kernel = heave_kernel(grid)
    fspec = dict(config.forcing)
    forcing = Forcing(fspec.pop("kind", "zero"), fspec)
    v0 = SurfaceFunction(grid, profile_values(grid, config.v0))
    v1 = SurfaceFunction(grid, profile_values(grid, config.v1))
    initial = SystemState(v0, config.h0, v1, config.h1)
    manifest = {
        "config": config.resolved(),
        "version": _version(),
        "operator": op.diagnostics(),
        "initial_data": {
            "v0_W12": norm(v0, "W12"),
            "v1_W12": norm(v1, "W12"),
            "v1_half": gagliardo_half_norm(v1),
        },
        "assembly_seconds": time.perf_counter() - started,
    }
    return Run(initial, params, op, kernel, forcing, manifest)
