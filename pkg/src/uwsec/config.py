"""System configuration: loading, validation and dotted-path overrides."""
from __future__ import annotations

import copy
import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .acoustic import AcousticLinkParams, MarkovGainChain
from .energy import BatteryParams, HarvestModel, energy_units
from .optical import OpticalLinkParams

MODES = ("discounted", "lifetime")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


@dataclass(frozen=True, eq=False)
class SystemConfig:
    optical: OpticalLinkParams = field(default_factory=OpticalLinkParams)
    acoustic_d: AcousticLinkParams = field(default_factory=lambda: AcousticLinkParams(distance_km=5.0))
    acoustic_e: AcousticLinkParams = field(default_factory=lambda: AcousticLinkParams(distance_km=6.0))
    gain_chain_rd: MarkovGainChain = None
    gain_chain_re: MarkovGainChain = None
    battery: BatteryParams = field(default_factory=BatteryParams)
    harvest: HarvestModel = field(default_factory=HarvestModel)
    power_levels: tuple[float, ...] = (0.0, 1.0, 2.0, 3.0)
    gamma: float = 0.9
    r_th: float = 0.0
    # None entries mean "highest gain level" / "full battery"
    initial_state: tuple[int | None, int | None, int | None] = (None, None, None)
    epsilon: float = 1e-6
    episodes: int = 100_000
    master_seed: int = 20240601
    mode: str = "discounted"
    exact: bool = False

    def __post_init__(self):
        if self.gain_chain_rd is None or self.gain_chain_re is None:
            raise ConfigError("gain_chain_rd/gain_chain_re: both chains are required")
        if self.acoustic_d.bandwidth_khz != self.acoustic_e.bandwidth_khz:
            raise ConfigError("acoustic_e.bandwidth_khz: both acoustic links must share one band")
        if self.acoustic_d.f_min_khz != self.acoustic_e.f_min_khz:
            raise ConfigError("acoustic_e.f_min_khz: both acoustic links must share one band")
        pl = tuple(float(p) for p in self.power_levels)
        object.__setattr__(self, "power_levels", pl)
        if not pl or pl[0] != 0.0:
            raise ConfigError("power_levels: must start with 0")
        if any(b <= a for a, b in zip(pl, pl[1:])):
            raise ConfigError("power_levels: must be strictly increasing")
        for i, p in enumerate(pl):
            try:
                energy_units(p, self.battery)
            except ValueError as exc:
                raise ConfigError(f"power_levels[{i}]: {exc}") from None
        if not (0 <= self.gamma < 1):
            raise ConfigError(f"gamma: must be in [0, 1), got {self.gamma!r}")
        if not (self.r_th >= 0 and math.isfinite(self.r_th)):
            raise ConfigError(f"r_th: must be finite and >= 0, got {self.r_th!r}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon: must be > 0, got {self.epsilon!r}")
        if int(self.episodes) != self.episodes or self.episodes < 1:
            raise ConfigError(f"episodes: must be an integer >= 1, got {self.episodes!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode: must be one of {MODES}, got {self.mode!r}")
        if len(self.initial_state) != 3:
            raise ConfigError("initial_state: expected (gain_rd, gain_re, battery)")
        bounds = (self.gain_chain_rd.size - 1, self.gain_chain_re.size - 1, self.battery.capacity_units)
        for name, v, hi in zip(("gain_rd", "gain_re", "battery"), self.initial_state, bounds):
            if v is not None and not (int(v) == v and 0 <= v <= hi):
                raise ConfigError(f"initial_state.{name}: {v!r} outside [0, {hi}]")

    @property
    def bandwidth_hz(self) -> float:
        return self.acoustic_d.bandwidth_hz

    @property
    def start_state(self) -> tuple[int, int, int]:
        """Resolved initial state (gain index RD, gain index RE, battery level)."""
        d, e, b = self.initial_state
        return (self.gain_chain_rd.size - 1 if d is None else int(d),
                self.gain_chain_re.size - 1 if e is None else int(e),
                self.battery.capacity_units if b is None else int(b))

    @property
    def action_units(self) -> tuple[int, ...]:
        return tuple(energy_units(p, self.battery) for p in self.power_levels)

    def to_dict(self) -> dict[str, Any]:
        return _to_dict(self)

    def replace(self, **overrides) -> "SystemConfig":
        """Copy with dotted-path overrides, e.g. ``{"optical.obstacle_density": 3e-3}``."""
        return with_overrides(self, overrides)


_SECTIONS = {
    "optical": OpticalLinkParams,
    "acoustic_d": AcousticLinkParams,
    "acoustic_e": AcousticLinkParams,
    "battery": BatteryParams,
    "harvest": HarvestModel,
}
_CHAINS = ("gain_chain_rd", "gain_chain_re")
_SCALARS = {
    "power_levels": None, "gamma": float, "r_th": float, "initial_state": None,
    "epsilon": float, "episodes": int, "master_seed": int, "mode": str, "exact": bool,
}


def _to_dict(cfg: SystemConfig) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for name in _SECTIONS:
        out[name] = dataclasses.asdict(getattr(cfg, name))
    for name in _CHAINS:
        ch = getattr(cfg, name)
        out[name] = {"levels": list(ch.levels), "transition": ch.transition.tolist()}
    for name in _SCALARS:
        v = getattr(cfg, name)
        out[name] = list(v) if isinstance(v, tuple) else v
    out["initial_state"] = [
        ("max" if i == 2 else "top") if v is None else v for i, v in enumerate(cfg.initial_state)]
    return out


def _parse_initial(raw) -> tuple:
    if not isinstance(raw, (list, tuple)) or len(raw) != 3:
        raise ConfigError("initial_state: expected a list of three entries")
    out = []
    for name, v in zip(("gain_rd", "gain_re", "battery"), raw):
        if isinstance(v, str):
            if v.lower() not in {"top", "max"}:
                raise ConfigError(f"initial_state.{name}: unknown token {v!r}")
            out.append(None)
        elif isinstance(v, (int, np.integer)) and not isinstance(v, bool):
            out.append(int(v))
        else:
            raise ConfigError(f"initial_state.{name}: expected an integer index or 'top'/'max', got {v!r}")
    return tuple(out)


def _build_section(name: str, cls, raw) -> Any:
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{name}.{key}: unknown field")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in raw:
            continue
        v = raw[f.name]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{name}.{f.name}: expected a number, got {v!r}")
        if f.type in ("int", int):
            if int(v) != v:
                raise ConfigError(f"{name}.{f.name}: expected an integer, got {v!r}")
            v = int(v)
        kwargs[f.name] = v
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _build_chain(name: str, raw) -> MarkovGainChain:
    if not isinstance(raw, dict) or set(raw) != {"levels", "transition"}:
        raise ConfigError(f"{name}: expected a mapping with 'levels' and 'transition'")
    try:
        return MarkovGainChain(tuple(raw["levels"]), np.asarray(raw["transition"], dtype=float))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def from_dict(raw: dict[str, Any]) -> SystemConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>: expected a mapping")
    allowed = set(_SECTIONS) | set(_CHAINS) | set(_SCALARS)
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"{key}: unknown field")
    kwargs: dict[str, Any] = {}
    for name, cls in _SECTIONS.items():
        if name in raw:
            kwargs[name] = _build_section(name, cls, raw[name])
    for name in _CHAINS:
        if name in raw:
            kwargs[name] = _build_chain(name, raw[name])
    for name, typ in _SCALARS.items():
        if name not in raw:
            continue
        v = raw[name]
        if name == "initial_state":
            v = _parse_initial(v)
        elif name == "power_levels":
            if not isinstance(v, (list, tuple)) or not all(
                    isinstance(p, (int, float)) and not isinstance(p, bool) for p in v):
                raise ConfigError("power_levels: expected a list of numbers")
            v = tuple(float(p) for p in v)
        elif typ is bool:
            if not isinstance(v, bool):
                raise ConfigError(f"{name}: expected true/false, got {v!r}")
        elif typ is int:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
                raise ConfigError(f"{name}: expected an integer, got {v!r}")
            v = int(v)
        elif typ is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{name}: expected a number, got {v!r}")
            v = float(v)
        elif typ is str and not isinstance(v, str):
            raise ConfigError(f"{name}: expected a string, got {v!r}")
        kwargs[name] = v
    try:
        return SystemConfig(**kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in _CHAINS:
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def default_dict() -> dict[str, Any]:
    text = resources.files("uwsec").joinpath("data/default.yaml").read_text()
    return yaml.safe_load(text)


def default_config() -> SystemConfig:
    return from_dict(default_dict())


def load_config(path: str | Path | None = None) -> SystemConfig:
    """Load a YAML config. Keys absent from the file fall back to the bundled defaults."""
    base = default_dict()
    if path is None:
        return from_dict(base)
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"<root>: cannot parse {path}: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("<root>: expected a mapping")
    return from_dict(_merge(base, raw))


def with_overrides(cfg: SystemConfig, overrides: dict[str, Any]) -> SystemConfig:
    raw = cfg.to_dict()
    for path, value in overrides.items():
        node = raw
        parts = path.split(".")
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise ConfigError(f"{path}: unknown parameter path")
            node = node[p]
        if parts[-1] not in node:
            raise ConfigError(f"{path}: unknown parameter path")
        node[parts[-1]] = value
    return from_dict(raw)
