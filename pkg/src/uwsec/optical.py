"""Source-to-relay underwater optical link.

Composite gain is the squared product of four factors: Beer-Lambert
attenuation, Gamma-Gamma turbulence, pointing error and a binary
blockage indicator. All samplers take an explicit ``numpy.random.Generator``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special


@dataclass(frozen=True)
class OpticalLinkParams:
    """Parameters of the optical hop.

    ``jitter_sigma`` is taken in metres, so with the default beam radius
    the pointing exponent ``rho = beam_radius_eq**2 / jitter_sigma**2`` is 100.
    ``responsivity`` and ``noise_variance`` have no published values; they
    only matter for exact-capacity evaluation.
    """

    wavelength_nm: float = 520.0
    attenuation_coeff: float = 0.15      # c(lambda), 1/m
    alpha: float = 5.54
    beta: float = 3.92
    beam_radius_eq: float = 0.1          # m
    jitter_sigma: float = 0.01           # m
    aperture_a0: float = 0.05
    responsivity: float = 0.8            # A/W
    noise_variance: float = 1e-14
    source_power_w: float = 10.0
    link_distance_m: float = 120.0
    obstacle_density: float = 1e-4       # 1/m

    def __post_init__(self):
        for name in ("wavelength_nm", "attenuation_coeff", "alpha", "beta",
                     "beam_radius_eq", "jitter_sigma", "aperture_a0",
                     "responsivity", "noise_variance", "source_power_w",
                     "link_distance_m"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
        if not self.obstacle_density >= 0:
            raise ValueError(f"obstacle_density must be >= 0, got {self.obstacle_density!r}")
        rho = self.rho
        if not (math.isfinite(rho) and rho > 0):
            raise ValueError(f"pointing exponent rho must be finite and > 0, got {rho!r}")

    @property
    def rho(self) -> float:
        return self.beam_radius_eq ** 2 / self.jitter_sigma ** 2

    @property
    def h_a(self) -> float:
        return beer_lambert(self.attenuation_coeff, self.link_distance_m)

    @property
    def unblocked_probability(self) -> float:
        return blockage_probability(self.obstacle_density, self.link_distance_m)


@dataclass(frozen=True)
class OpticalSample:
    h_a: float
    h_t: float
    h_p: float
    h_b: int
    gain: float
    snr: float


def beer_lambert(attenuation_coeff: float, distance: float) -> float:
    """exp(-c * l); ``distance`` may be 0 (identity)."""
    if not (math.isfinite(attenuation_coeff) and math.isfinite(distance)):
        raise ValueError("attenuation_coeff and distance must be finite")
    if attenuation_coeff < 0 or distance < 0:
        raise ValueError("attenuation_coeff and distance must be non-negative")
    return math.exp(-attenuation_coeff * distance)


def turbulence_pdf(x, alpha: float, beta: float):
    """Gamma-Gamma density, evaluated in log space for stability.

    Accepts scalars or arrays; every ``x`` must be strictly positive.
    """
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("turbulence_pdf requires x > 0")
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be > 0")
    ab = alpha * beta
    z = 2.0 * np.sqrt(ab * x)
    # kve(v, z) = kv(v, z) * exp(z)
    log_f = (math.log(2.0) + 0.5 * (alpha + beta) * math.log(ab)
             - special.gammaln(alpha) - special.gammaln(beta)
             + (0.5 * (alpha + beta) - 1.0) * np.log(x)
             + np.log(special.kve(alpha - beta, z)) - z)
    out = np.exp(log_f)
    return float(out) if out.ndim == 0 else out


def sample_turbulence(alpha: float, beta: float, rng: np.random.Generator, size=None):
    """Product of two unit-mean Gamma variates."""
    x = rng.gamma(alpha, 1.0 / alpha, size)
    y = rng.gamma(beta, 1.0 / beta, size)
    return x * y


def sample_pointing(rho: float, a0: float, rng: np.random.Generator, size=None):
    """Inverse-CDF draw from f(x) = rho x^(rho-1) / a0^rho on [0, a0]."""
    if not (rho > 0 and a0 > 0):
        raise ValueError("rho and a0 must be > 0")
    u = rng.random(size)
    if math.isinf(rho):
        return np.full_like(u, a0) if size is not None else a0
    return a0 * u ** (1.0 / rho)


def blockage_probability(obstacle_density: float, distance: float) -> float:
    """Probability that the link is clear, exp(-T_o * l)."""
    if obstacle_density < 0 or distance < 0:
        raise ValueError("obstacle_density and distance must be non-negative")
    return math.exp(-obstacle_density * distance)


def sample_blockage(obstacle_density: float, distance: float, rng: np.random.Generator, size=None):
    """1 when the link is clear, 0 when blocked."""
    p = blockage_probability(obstacle_density, distance)
    u = rng.random(size)
    return (u < p).astype(np.int64) if size is not None else int(u < p)


def optical_snr(params: OpticalLinkParams, sample) -> float:
    """Electrical SNR at the relay for a composite gain (or an OpticalSample)."""
    gain = sample.gain if isinstance(sample, OpticalSample) else float(sample)
    return params.responsivity ** 2 * params.source_power_w * gain / params.noise_variance


def sample_link(params: OpticalLinkParams, rng: np.random.Generator) -> OpticalSample:
    h_a = params.h_a
    h_t = float(sample_turbulence(params.alpha, params.beta, rng))
    h_p = float(sample_pointing(params.rho, params.aperture_a0, rng))
    h_b = sample_blockage(params.obstacle_density, params.link_distance_m, rng)
    gain = (h_a * h_t * h_p * h_b) ** 2
    return OpticalSample(h_a, h_t, h_p, h_b, gain, optical_snr(params, gain))


def snr_scale(params: OpticalLinkParams) -> float:
    """SNR per unit (h_t * h_p)^2 for an unblocked link."""
    return optical_snr(params, params.h_a ** 2)
