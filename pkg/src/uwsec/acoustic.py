"""Relay-to-destination and relay-to-eavesdropper acoustic links.

Frequencies are in kHz for the empirical absorption and noise formulas,
distances in km. Band integrals are taken over frequency in Hz, so the
broadband SNR is dimensionless.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.sparse.csgraph import connected_components


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class AcousticLinkParams:
    f_min_khz: float = 9.5
    bandwidth_khz: float = 5.0
    distance_km: float = 5.0
    spreading_factor: float = 2.0
    shipping_factor: float = 0.5
    wind_speed: float = 0.0              # m/s
    water_density: float = 1000.0        # kg/m^3
    sound_speed: float = 1500.0          # m/s
    receiver_aperture: float = 0.01      # m^2

    def __post_init__(self):
        for name in ("f_min_khz", "bandwidth_khz", "distance_km",
                     "water_density", "sound_speed", "receiver_aperture"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
        if not self.spreading_factor >= 1:
            raise ValueError(f"spreading_factor must be >= 1, got {self.spreading_factor!r}")
        if not 0 <= self.shipping_factor <= 1:
            raise ValueError(f"shipping_factor must be in [0, 1], got {self.shipping_factor!r}")
        if not self.wind_speed >= 0:
            raise ValueError(f"wind_speed must be >= 0, got {self.wind_speed!r}")

    @property
    def band_hz(self) -> tuple[float, float]:
        lo = khz_to_hz(self.f_min_khz)
        return lo, lo + khz_to_hz(self.bandwidth_khz)

    @property
    def bandwidth_hz(self) -> float:
        return khz_to_hz(self.bandwidth_khz)


def khz_to_hz(f):
    return f * 1e3


def hz_to_khz(f):
    return f * 1e-3


def _check_freq(f_khz):
    f = np.asarray(f_khz, dtype=float)
    if np.any(~(f > 0)):
        raise ValueError("frequency must be > 0 kHz")
    return f


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def thorp_absorption_db_per_km(f_khz):
    """Thorp absorption, 10 log10 a(f) in dB/km with f in kHz."""
    f = _check_freq(f_khz)
    f2 = f * f
    return _scalar(0.11 * f2 / (1 + f2) + 44 * f2 / (4100 + f2) + 2.75e-4 * f2 + 0.003)


def absorption_linear(f_khz):
    return _scalar(10.0 ** (np.asarray(thorp_absorption_db_per_km(f_khz)) / 10.0))


def attenuation(distance_km: float, f_khz, spreading_factor: float):
    """Path loss l^k * a(f)^l as a linear power ratio (l in km)."""
    if not distance_km > 0:
        raise ValueError("distance must be > 0")
    db = np.asarray(thorp_absorption_db_per_km(f_khz))
    return _scalar(distance_km ** spreading_factor * 10.0 ** (db * distance_km / 10.0))


def ambient_noise_db(f_khz, shipping_factor: float, wind_speed: float):
    """Turbulence + shipping + wind + thermal noise PSD, dB re uPa per Hz."""
    f = _check_freq(f_khz)
    lg = np.log10
    turb = 17 - 30 * lg(f)
    ship = 40 + 20 * (shipping_factor - 0.5) + 26 * lg(f) - 60 * lg(f + 0.03)
    wind = 50 + 7.5 * math.sqrt(wind_speed) + 20 * lg(f) - 40 * lg(f + 0.4)
    thermal = -15 + 20 * lg(f)
    total = sum(10.0 ** (c / 10.0) for c in (turb, ship, wind, thermal))
    return _scalar(10 * lg(total))


def electrical_noise_psd_w_per_hz(f_khz, params: AcousticLinkParams):
    n_db = np.asarray(ambient_noise_db(f_khz, params.shipping_factor, params.wind_speed))
    rho_c = params.water_density * params.sound_speed
    return _scalar(10.0 ** ((n_db - 120 - 10 * math.log10(rho_c)) / 10.0) * params.receiver_aperture)


def simpson(fn, a: float, b: float, panels: int = 1024, rtol: float = 1e-8, max_panels: int = 1 << 22) -> float:
    """Composite Simpson rule, doubling panels until the relative change is below rtol."""
    prev = None
    n = panels
    while n <= max_panels:
        x = np.linspace(a, b, n + 1)
        y = fn(x)
        h = (b - a) / n
        val = h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return float(val)
        prev = val
        n *= 2
    raise IntegrationError(f"Simpson rule did not reach rtol={rtol} with {max_panels} panels")


@lru_cache(maxsize=256)
def band_integrals(params: AcousticLinkParams) -> tuple[float, float]:
    """(int A^-1 df, int N_W df) over the band, df in Hz. Cached per link."""
    lo, hi = params.band_hz
    inv_loss = simpson(
        lambda f: 1.0 / attenuation(params.distance_km, hz_to_khz(f), params.spreading_factor), lo, hi)
    noise = simpson(lambda f: electrical_noise_psd_w_per_hz(hz_to_khz(f), params), lo, hi)
    return inv_loss, noise


def snr_per_unit(params: AcousticLinkParams) -> float:
    """Broadband SNR for unit power and unit small-scale gain."""
    inv_loss, noise = band_integrals(params)
    return inv_loss / (params.bandwidth_hz * noise)


def broadband_snr(power_w, gain, params: AcousticLinkParams):
    if np.any(np.asarray(power_w) < 0):
        raise ValueError("power must be >= 0")
    return power_w * gain * snr_per_unit(params)


@dataclass(frozen=True, eq=False)
class MarkovGainChain:
    """Quantized small-scale gain levels with a row-stochastic transition matrix."""

    levels: tuple[float, ...]
    transition: np.ndarray

    def __post_init__(self):
        levels = tuple(float(g) for g in self.levels)
        P = np.array(self.transition, dtype=float)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "transition", P)
        L = len(levels)
        if L == 0 or any(not (g > 0) for g in levels):
            raise ValueError("gain levels must be a non-empty list of positive values")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("gain levels must be strictly increasing")
        if P.shape != (L, L):
            raise ValueError(f"transition matrix must be {L}x{L}, got {P.shape}")
        if np.any((P < 0) | (P > 1)) or not np.all(np.isfinite(P)):
            raise ValueError("transition entries must lie in [0, 1]")
        sums = P.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-12)
        if bad.size:
            i = int(bad[0])
            raise ValueError(f"transition row {i} sums to {sums[i]!r}, expected 1")
        P.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.levels)

    def cumulative(self) -> np.ndarray:
        """Row-wise CDF with the last column pinned to exactly 1."""
        c = np.cumsum(self.transition, axis=1)
        c[:, -1] = 1.0
        return c


def step_chain(chain: MarkovGainChain, current_level_index: int, rng: np.random.Generator) -> int:
    if not 0 <= current_level_index < chain.size:
        raise IndexError(f"level index {current_level_index} out of range")
    u = rng.random()
    row = chain.cumulative()[current_level_index]
    return int(np.searchsorted(row, u, side="right"))


def stationary_distribution(chain: MarkovGainChain) -> np.ndarray:
    P = chain.transition
    n_comp, _ = connected_components(P > 0, directed=True, connection="strong")
    if n_comp != 1:
        raise ValueError("transition matrix is reducible; stationary distribution is not unique")
    L = chain.size
    # pi (P - I) = 0 with sum(pi) = 1 replacing one redundant equation
    A = (P - np.eye(L)).T
    A[-1, :] = 1.0
    b = np.zeros(L)
    b[-1] = 1.0
    return np.linalg.solve(A, b)
