"""Transmission-phase Monte Carlo evaluation of a power-allocation scheme."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _accel, kernels
from .config import SystemConfig
from .energy import InfeasibleActionError
from .mdp import MdpModel, build_model, snr_tables
from .optical import snr_scale
from .policies import Scheme

TRUNCATION = 1e-9
MODE_LABELS = {"discounted": "discounted-infinite", "lifetime": "geometric-lifetime",
               "fixed": "fixed-horizon"}
_MODE_CODES = {"discounted": kernels.DISCOUNTED, "lifetime": kernels.LIFETIME,
               "fixed": kernels.FIXED}
_KIND_CODES = {"opa": kernels.TABLE, "ga": kernels.GREEDY, "na": kernels.NAIVE}


@dataclass
class SlotRecord:
    slot: int
    state: tuple[int, int, int]
    action: int
    power_w: float
    harvested: bool
    blockage: int
    secrecy_bps: float
    contribution: float


@dataclass
class EpisodeTrace:
    records: list[SlotRecord]
    slots: int
    total: float
    reward_evals: int

    def cumulative(self) -> np.ndarray:
        return np.cumsum([r.contribution for r in self.records])

    def dump(self, path: str | Path) -> None:
        """One JSON object per slot."""
        with open(path, "w") as fh:
            for r in self.records:
                fh.write(json.dumps(asdict(r)) + "\n")


@dataclass
class EvalResult:
    mean: float
    ci_halfwidth_95: float
    episodes: int
    mode: str
    std: float = 0.0
    mean_slots: float = 0.0
    reward_evals: int = 0
    extra: dict = field(default_factory=dict)


def truncation_horizon(gamma: float, r_max: float, tol: float = TRUNCATION) -> int:
    """Smallest K >= 1 with gamma**K * r_max < tol; the tail bound is r_max gamma^K / (1 - gamma)."""
    if r_max <= 0 or gamma == 0:
        return 1
    return max(1, math.floor(math.log(tol / r_max) / math.log(gamma)) + 1)


def sample_lifetime(gamma: float, rng: np.random.Generator, size=None):
    """Network lifetime K >= 1 with P[K = k] = gamma^(k-1) (1 - gamma)."""
    if not 0 <= gamma < 1:
        raise ValueError("gamma must be in [0, 1)")
    if gamma == 0:
        return 1 if size is None else np.ones(size, dtype=np.int64)
    return rng.geometric(1.0 - gamma, size)


def _kernel_args(scheme: Scheme, cfg: SystemConfig, model: MdpModel, mode: str,
                 horizon: int | None, seed: int, first: int, n: int):
    scheme.check(model)
    if mode not in _MODE_CODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "fixed" and not horizon:
        raise ValueError("fixed-horizon mode needs a horizon")
    if mode == "discounted":
        horizon = truncation_horizon(model.discount, model.r_max)
    opt = cfg.optical
    if cfg.exact:
        snr_d, snr_e = snr_tables(cfg)
    else:
        snr_d = snr_e = np.zeros((1, 1))
    policy = scheme.table if scheme.table is not None else np.zeros(model.n_states, dtype=np.int64)
    i0, j0, b0 = cfg.start_state
    out = (np.zeros(n), np.zeros(n, dtype=np.int64), np.zeros(n, dtype=np.int64),
           np.zeros(n, dtype=np.int64))
    args = (_KIND_CODES[scheme.kind], policy, model.reward, model.feasible,
            model.action_units, cfg.gain_chain_rd.cumulative(), cfg.gain_chain_re.cumulative(),
            model.shape[1], model.shape[2], float(cfg.harvest.probability),
            int(cfg.harvest.quantum_units), i0, j0, b0, opt.unblocked_probability,
            bool(cfg.exact), snr_d, snr_e, snr_scale(opt), float(opt.alpha), float(opt.beta),
            float(opt.rho), float(opt.aperture_a0), cfg.bandwidth_hz, float(cfg.r_th),
            float(model.discount), _MODE_CODES[mode], int(horizon or 0), int(seed), int(first))
    return args, out


def _check_errors(errors: np.ndarray, scheme: Scheme, first: int) -> None:
    bad = np.flatnonzero(errors)
    if bad.size:
        raise InfeasibleActionError(
            f"scheme {scheme.kind} chose an infeasible action in episode {first + int(bad[0])}")


def episode_totals(scheme: Scheme, cfg: SystemConfig, episodes: int, seed: int, mode: str,
                   model: MdpModel | None = None, horizon: int | None = None,
                   backend: str | None = None, chunk: int = 1 << 16):
    """Per-episode totals, slot counts and reward-evaluation counts."""
    model = model if model is not None else build_model(cfg)
    use = backend or _accel.backend()
    step = episodes if use == "numba" else chunk
    parts = []
    for first in range(0, episodes, step):
        n = min(step, episodes - first)
        args, out = _kernel_args(scheme, cfg, model, mode, horizon, seed, first, n)
        kernels.rollout(*args, *out, backend=use)
        _check_errors(out[3], scheme, first)
        parts.append(out[:3])
    return tuple(np.concatenate([p[k] for p in parts]) for k in range(3))


def evaluate(scheme: Scheme, cfg: SystemConfig, episodes: int | None = None,
             seed: int | None = None, mode: str | None = None, model: MdpModel | None = None,
             horizon: int | None = None, backend: str | None = None) -> EvalResult:
    """Mean total secure throughput over independent episodes with a 95% normal CI."""
    episodes = cfg.episodes if episodes is None else int(episodes)
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    seed = cfg.master_seed if seed is None else int(seed)
    mode = cfg.mode if mode is None else mode
    totals, slots, evals = episode_totals(scheme, cfg, episodes, seed, mode, model, horizon, backend)
    mean = float(np.sum(totals) / episodes)
    # identical totals: report an exact zero rather than round-off from the mean
    std = float(np.std(totals, ddof=1)) if episodes > 1 and np.ptp(totals) > 0 else 0.0
    ci = 1.959963984540054 * std / math.sqrt(episodes)
    return EvalResult(mean, ci, episodes, MODE_LABELS[mode], std,
                      float(np.mean(slots)), int(np.sum(evals)))


def run_episode(scheme: Scheme, cfg: SystemConfig, seed: int | None = None,
                mode: str | None = None, episode: int = 0, model: MdpModel | None = None,
                horizon: int | None = None) -> EpisodeTrace:
    """Roll out one episode with per-slot records (numpy path, same draws as ``evaluate``)."""
    model = model if model is not None else build_model(cfg)
    seed = cfg.master_seed if seed is None else int(seed)
    mode = cfg.mode if mode is None else mode
    args, out = _kernel_args(scheme, cfg, model, mode, horizon, seed, episode, 1)
    raw: list = []
    kernels.rollout(*args, *out, trace=raw)
    _check_errors(out[3], scheme, episode)
    records = []
    for k, i, j, b, a, harvested, hb, cs in raw:
        w = model.discount ** k if mode == "discounted" else 1.0
        records.append(SlotRecord(k, (i, j, b), a, float(model.actions[a]), harvested, hb, cs, w * cs))
    return EpisodeTrace(records, int(out[1][0]), float(out[0][0]), int(out[2][0]))
