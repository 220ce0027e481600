"""Relay battery and Bernoulli energy harvesting, in integer energy units."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InfeasibleActionError(ValueError):
    """A transmit power exceeds the energy stored in the battery."""


@dataclass(frozen=True)
class BatteryParams:
    capacity_units: int = 5
    slot_seconds: float = 1.0

    def __post_init__(self):
        if int(self.capacity_units) != self.capacity_units or self.capacity_units < 1:
            raise ValueError(f"capacity_units must be an integer >= 1, got {self.capacity_units!r}")
        if not self.slot_seconds > 0:
            raise ValueError(f"slot_seconds must be > 0, got {self.slot_seconds!r}")
        object.__setattr__(self, "capacity_units", int(self.capacity_units))

    @property
    def levels(self) -> int:
        return self.capacity_units + 1


@dataclass(frozen=True)
class HarvestModel:
    probability: float = 0.6
    quantum_units: int = 2

    def __post_init__(self):
        if not 0 <= self.probability <= 1:
            raise ValueError(f"probability must be in [0, 1], got {self.probability!r}")
        if int(self.quantum_units) != self.quantum_units or self.quantum_units < 1:
            raise ValueError(f"quantum_units must be an integer >= 1, got {self.quantum_units!r}")
        object.__setattr__(self, "quantum_units", int(self.quantum_units))


@dataclass(frozen=True)
class BatteryState:
    level_units: int
    capacity_units: int

    def __post_init__(self):
        if not 0 <= self.level_units <= self.capacity_units:
            raise ValueError(f"battery level {self.level_units} outside [0, {self.capacity_units}]")


def energy_units(power_w: float, params: BatteryParams, tol: float = 1e-9) -> int:
    """Energy drawn in one slot, P * T_s, which must be an integer number of units."""
    e = power_w * params.slot_seconds
    n = round(e)
    if abs(e - n) > tol or n < 0:
        raise ValueError(f"P*T_s = {e!r} is not a non-negative integer number of energy units")
    return int(n)


def harvest_sample(model: HarvestModel, rng: np.random.Generator, size=None):
    u = rng.random(size)
    if size is None:
        return model.quantum_units if u < model.probability else 0
    return np.where(u < model.probability, model.quantum_units, 0)


def next_level(level: int, spent: int, harvested: int, capacity: int) -> int:
    if spent > level:
        raise InfeasibleActionError(f"cannot spend {spent} units from a battery holding {level}")
    if harvested:
        return min(level - spent + harvested, capacity)
    return level - spent


def battery_update(state: BatteryState, spent_units: int, harvested: int, params: BatteryParams) -> BatteryState:
    lvl = next_level(state.level_units, spent_units, harvested, params.capacity_units)
    return BatteryState(lvl, params.capacity_units)


def feasible_actions(state: BatteryState | int, power_levels, params: BatteryParams) -> list[float]:
    level = state.level_units if isinstance(state, BatteryState) else int(state)
    return [p for p in power_levels if energy_units(p, params) <= level]
