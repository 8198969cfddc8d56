"""JSON configuration, serialization helpers and run manifests.

Config schema::

    {"epsilons": [...], "field": {"bx": .., "by": .., "bz": ..},
     "solver": {...}, "gap_tol": ..}

Floats are written with Python's shortest round-trip ``repr`` in JSON and
with ``%.17g`` in CSV, so numbers read back bit-identical.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .bethe import SolverOptions
from .errors import ConfigError
from .model import GAP_TOL, SpinSystem, build_system

VERSION = "0.1.0"

DEMO_CONFIG = {
    "epsilons": [0.0, 1.0, 2.3, 3.1],
    "field": {"bx": 0.3, "by": 0.4, "bz": 0.5},
}


@dataclass(frozen=True)
class RunConfig:
    system: SpinSystem
    solver: SolverOptions
    source: str | None = None


def config_from_dict(data: Mapping[str, Any], source: str | None = None) -> RunConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - {"epsilons", "field", "solver", "gap_tol"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "epsilons" not in data:
        raise ConfigError("config needs an 'epsilons' list")
    eps = data["epsilons"]
    if not isinstance(eps, list) or not all(isinstance(e, (int, float)) and not isinstance(e, bool) for e in eps):
        raise ConfigError("'epsilons' must be a list of numbers")
    fd = data.get("field", {})
    if not isinstance(fd, Mapping) or set(fd) - {"bx", "by", "bz"}:
        raise ConfigError("'field' must be an object with keys among bx, by, bz")
    try:
        b = tuple(float(fd.get(k, 0.0)) for k in ("bx", "by", "bz"))
        gap_tol = float(data.get("gap_tol", GAP_TOL))
    except (TypeError, ValueError):
        raise ConfigError("field components and gap_tol must be numbers") from None
    if not gap_tol > 0:
        raise ConfigError("gap_tol must be positive")
    solver = data.get("solver", {})
    if not isinstance(solver, Mapping):
        raise ConfigError("'solver' must be an object")
    try:
        opts = SolverOptions.from_dict(solver)
    except TypeError as exc:
        raise ConfigError(f"bad solver options: {exc}") from None
    return RunConfig(build_system(eps, b, gap_tol), opts, source)


def load_config(path: str | os.PathLike | None) -> RunConfig:
    """Read a JSON config; ``None`` gives the built-in four-spin demo."""
    if path is None:
        return config_from_dict(DEMO_CONFIG, None)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_dict(data, str(path))


def config_to_dict(cfg: RunConfig) -> dict:
    bx, by, bz = cfg.system.field
    return {
        "epsilons": list(cfg.system.epsilons),
        "field": {"bx": bx, "by": by, "bz": bz},
        "solver": cfg.solver.to_dict(),
        "gap_tol": cfg.system.gap_tol,
    }


def parse_floats(text: str, n: int | None = None, what: str = "values") -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{what} must be a comma-separated list of numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"expected {n} {what}, got {len(vals)}")
    return vals


def plain(obj: Any) -> Any:
    """Convert numpy scalars/arrays and complex numbers to JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return [plain(obj.real), plain(obj.imag)]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(plain(obj), indent=2, allow_nan=False) + "\n"


def csv_series(t: Sequence[float], values: Sequence[float]) -> str:
    lines = ["t,value"]
    lines += [f"{float(a):.17g},{float(b):.17g}" for a, b in zip(t, values)]
    return "\n".join(lines) + "\n"


def log_value(phase: complex, log_abs: float) -> dict:
    """``value = (value_re + i value_im) * exp(log_scale)`` with a unit-modulus mantissa."""
    if phase == 0 or not math.isfinite(log_abs):
        return {"value_re": 0.0, "value_im": 0.0, "log_scale": 0.0}
    return {"value_re": float(phase.real), "value_im": float(phase.imag), "log_scale": float(log_abs)}


@dataclass
class RunManifest:
    command: str
    config_path: str | None
    options: dict
    tool_version: str = VERSION
    wall_time: float = 0.0
    outputs: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    _start: float = field(default_factory=time.perf_counter, repr=False)

    def finish(self) -> dict:
        self.wall_time = time.perf_counter() - self._start
        d = asdict(self)
        d.pop("_start")
        return d
