"""Run configuration: schema, validation and built-in presets.

Config files are TOML.  Scalars or arrays are accepted for every grid field;
optional sub-tables group fit, threshold, spectral and drift settings::

    mode = "transport"
    N = 16
    M = 0
    J = [0.395, 1.374]
    Jz = 3.141592653589793
    n_trajectories = 100
    t_max = 1000
    master_seed = 1

    [fit]
    sigma_window = [4, 40]
"""

from __future__ import annotations

import copy
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MODES = ("transport", "spectral", "drift", "sweep", "prethermal")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class FitConfig:
    sigma_window: tuple[float, float] = (4.0, 40.0)
    p_window: tuple[float, float] = (4.0, 40.0)
    n_fits: int = 25


@dataclass
class ThresholdConfig:
    # None selects N/30 + 1.25 and 2.6/N
    sigma: float | None = None
    pmax: float | None = None


@dataclass
class SpectralConfig:
    n_eigs: int | None = None
    filter_order: int | None = None
    phi_target: float = 0.0
    entropy_cut: int | None = None


@dataclass
class DriftConfig:
    samples: list[int] = field(default_factory=lambda: [1_000_000])


@dataclass
class PrethermalConfig:
    J_prime: list[float] = field(default_factory=lambda: list(np.geomspace(0.05, 0.6, 8)))
    t_start: int = 200
    t_cap: int = 200_000


@dataclass
class RunConfig:
    mode: str = "transport"
    N: list[int] = field(default_factory=lambda: [16])
    M: list[float] = field(default_factory=lambda: [0.0])
    J: list[float] = field(default_factory=lambda: [1.374])
    Jz: list[float] = field(default_factory=lambda: [math.pi])
    n_trajectories: int = 100
    t_max: int = 1000
    master_seed: int = 0
    output_dir: str = "runs/out"
    state_kind: str = "gaussian"
    save_trajectories: bool = False
    fit: FitConfig = field(default_factory=FitConfig)
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    drift: DriftConfig = field(default_factory=DriftConfig)
    prethermal: PrethermalConfig = field(default_factory=PrethermalConfig)

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def grid(self) -> list[dict]:
        """Cartesian product of the grid fields, in a fixed order."""
        if self.mode == "drift":
            return [{"N": n, "samples": s} for n, s in zip(self.N, _broadcast(self.drift.samples, len(self.N)))]
        if self.mode == "prethermal":
            return [
                {"N": n, "M": m, "J_prime": jp, "J": math.pi - jp, "Jz": jz}
                for n in self.N for m in self.M for jz in self.Jz for jp in self.prethermal.J_prime
            ]
        return [
            {"N": n, "M": m, "J": j, "Jz": jz}
            for n in self.N for m in self.M for jz in self.Jz for j in self.J
        ]


def _broadcast(values, n):
    if len(values) == 1:
        return list(values) * n
    return list(values)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# parsing


_SECTIONS = {
    "fit": FitConfig,
    "thresholds": ThresholdConfig,
    "spectral": SpectralConfig,
    "drift": DriftConfig,
    "prethermal": PrethermalConfig,
}
_GRID_FIELDS = {"N": int, "M": float, "J": float, "Jz": float}


def _as_list(value, kind, path):
    items = value if isinstance(value, (list, tuple)) else [value]
    if len(items) == 0:
        raise ConfigError(path, "grid must be non-empty")
    out = []
    for i, v in enumerate(items):
        out.append(_as_scalar(v, kind, f"{path}[{i}]"))
    return out


def _as_scalar(value, kind, path):
    if isinstance(value, bool) and kind is not bool:
        raise ConfigError(path, f"expected {kind.__name__}, got a boolean")
    if kind is int:
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, (int, np.integer)):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return int(value)
    if kind is float:
        if not isinstance(value, (int, float, np.integer, np.floating)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(path, "must be finite")
        return float(value)
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true or false, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    raise TypeError(kind)


def _window(value, path):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(path, "expected [start, stop]")
    lo, hi = (_as_scalar(v, float, f"{path}[{i}]") for i, v in enumerate(value))
    if not 0 < lo < hi:
        raise ConfigError(path, "need 0 < start < stop")
    return (lo, hi)


def _section(name, raw):
    cls = _SECTIONS[name]
    if not isinstance(raw, dict):
        raise ConfigError(name, "expected a table")
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{name}.{key}", f"unknown field (expected one of {sorted(known)})")
    obj = cls()
    for key, value in raw.items():
        path = f"{name}.{key}"
        if name == "fit" and key.endswith("_window"):
            value = _window(value, path)
        elif name == "fit" and key == "n_fits":
            value = _as_scalar(value, int, path)
        elif name == "thresholds":
            value = None if value is None else _as_scalar(value, float, path)
        elif name == "spectral":
            kind = float if key == "phi_target" else int
            value = None if value is None else _as_scalar(value, kind, path)
        elif name == "drift":
            value = _as_list(value, int, path)
        elif name == "prethermal":
            value = _as_list(value, float, path) if key == "J_prime" else _as_scalar(value, int, path)
        setattr(obj, key, value)
    return obj


def from_dict(raw: dict, base: RunConfig | None = None) -> RunConfig:
    """Build and validate a config; keys missing from `raw` keep the values of `base`."""
    cfg = copy.deepcopy(base) if base is not None else RunConfig()
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a table")
    known = {f.name for f in fields(RunConfig)}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(key, f"unknown field (expected one of {sorted(known)})")
        if key in _SECTIONS:
            merged = asdict(getattr(cfg, key))
            sect = _section(key, value)
            for k in value:
                merged[k] = getattr(sect, k)
            setattr(cfg, key, _SECTIONS[key](**merged))
        elif key in _GRID_FIELDS:
            setattr(cfg, key, _as_list(value, _GRID_FIELDS[key], key))
        elif key in ("n_trajectories", "t_max", "master_seed"):
            setattr(cfg, key, _as_scalar(value, int, key))
        elif key in ("mode", "output_dir", "state_kind"):
            setattr(cfg, key, _as_scalar(value, str, key))
        elif key == "save_trajectories":
            setattr(cfg, key, _as_scalar(value, bool, key))
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.mode not in MODES:
        raise ConfigError("mode", f"unknown mode {cfg.mode!r} (expected one of {list(MODES)})")
    for name in ("N", "M", "J", "Jz"):
        if not getattr(cfg, name):
            raise ConfigError(name, "grid must be non-empty")
    for i, n in enumerate(cfg.N):
        if not 2 <= n <= 28 and cfg.mode != "drift":
            raise ConfigError(f"N[{i}]", f"{n} outside [2, 28]")
        if n < 2 or (cfg.mode == "drift" and n < 3):
            raise ConfigError(f"N[{i}]", "need at least two sites (three for drift)")
        if cfg.mode != "drift":
            for j, m in enumerate(cfg.M):
                n_up = n / 2 + m
                if n_up != int(n_up) or not 0 <= n_up <= n:
                    raise ConfigError(f"M[{j}]", f"M={m} is not a sector of N={n}")
                if cfg.mode in ("transport", "sweep", "prethermal") and n_up < 1:
                    raise ConfigError(f"M[{j}]", "the all-down sector has no excitation to track")
    if cfg.n_trajectories < 1:
        raise ConfigError("n_trajectories", "must be positive")
    if cfg.mode in ("transport", "sweep") and cfg.n_trajectories < 2:
        raise ConfigError("n_trajectories", "ensemble averages need at least two trajectories")
    if cfg.t_max < 1:
        raise ConfigError("t_max", "must be at least 1")
    if cfg.master_seed < 0:
        raise ConfigError("master_seed", "must be non-negative")
    if cfg.state_kind not in ("gaussian", "phase"):
        raise ConfigError("state_kind", "expected 'gaussian' or 'phase'")
    if not cfg.output_dir:
        raise ConfigError("output_dir", "must not be empty")
    if cfg.mode == "drift":
        if not cfg.drift.samples:
            raise ConfigError("drift.samples", "grid must be non-empty")
        if len(cfg.drift.samples) not in (1, len(cfg.N)):
            raise ConfigError("drift.samples", "give one count or one per N")
        if any(s < 1 for s in cfg.drift.samples):
            raise ConfigError("drift.samples", "counts must be positive")
    if cfg.mode == "prethermal":
        if not cfg.prethermal.J_prime:
            raise ConfigError("prethermal.J_prime", "grid must be non-empty")
        if any(not 0 < jp < math.pi for jp in cfg.prethermal.J_prime):
            raise ConfigError("prethermal.J_prime", "detunings must lie in (0, pi)")
        if not 1 <= cfg.prethermal.t_start <= cfg.prethermal.t_cap:
            raise ConfigError("prethermal.t_start", "need 1 <= t_start <= t_cap")
        if cfg.n_trajectories < 2:
            raise ConfigError("n_trajectories", "ensemble averages need at least two trajectories")
    if cfg.spectral.n_eigs is not None and cfg.spectral.n_eigs < 1:
        raise ConfigError("spectral.n_eigs", "must be positive")
    if cfg.spectral.filter_order is not None and cfg.spectral.filter_order < 0:
        raise ConfigError("spectral.filter_order", "must be non-negative")
    if cfg.fit.n_fits < 1:
        raise ConfigError("fit.n_fits", "must be positive")
    return cfg


def load(path) -> RunConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"not valid TOML ({exc})") from None
    except OSError as exc:
        raise ConfigError(str(path), exc.strerror or str(exc)) from None
    return from_dict(raw)


def parse_override(text: str) -> dict:
    """Turn ``a.b=value`` (value in TOML syntax) into a nested dict."""
    if "=" not in text:
        raise ConfigError(text, "override must look like key=value")
    key, value = text.split("=", 1)
    key = key.strip()
    try:
        parsed = tomllib.loads(f"v = {value.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        parsed = value.strip()
    out: dict = {}
    node = out
    parts = key.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = parsed
    return out


# ---------------------------------------------------------------------------
# presets

REGIME_POINTS = {"localized": 0.395, "ergodic": 1.374, "swappy": 2.551, "near_swap": 3.138}


def presets() -> dict[str, RunConfig]:
    """Built-in configurations keyed by name."""
    pi = math.pi
    return {
        "regime-points": RunConfig(
            mode="transport", N=[16], J=list(REGIME_POINTS.values()), Jz=[pi],
            n_trajectories=100, t_max=1000, master_seed=1, output_dir="runs/regime-points",
        ),
        "fig4-line": RunConfig(
            mode="sweep", N=[16], J=list(np.linspace(0.0, pi, 32)), Jz=[pi],
            n_trajectories=50, t_max=1000, master_seed=2, output_dir="runs/fig4-line",
        ),
        "phase-diagram": RunConfig(
            mode="sweep", N=[14], J=list(np.linspace(0.0, pi, 12)), Jz=list(np.linspace(0.0, pi, 12)),
            n_trajectories=20, t_max=100, master_seed=3, output_dir="runs/phase-diagram",
        ),
        "prethermal-sweep": RunConfig(
            mode="prethermal", N=[16], Jz=[pi], n_trajectories=50, master_seed=4,
            output_dir="runs/prethermal-sweep",
            prethermal=PrethermalConfig(J_prime=list(np.geomspace(0.05, 0.6, 8))),
        ),
        "drift-curve": RunConfig(
            mode="drift", N=list(range(8, 29, 2)), master_seed=5, output_dir="runs/drift-curve",
            drift=DriftConfig(samples=[10**6 if n <= 20 else 10**6 // 3 for n in range(8, 29, 2)]),
        ),
        "level-statistics": RunConfig(
            mode="spectral", N=[14], J=[REGIME_POINTS["localized"], REGIME_POINTS["ergodic"]], Jz=[pi],
            n_trajectories=20, master_seed=6, output_dir="runs/level-statistics",
        ),
    }


def get_preset(name: str) -> RunConfig:
    table = presets()
    if name not in table:
        raise ConfigError("preset", f"unknown preset {name!r}; available: {', '.join(sorted(table))}")
    return table[name]
