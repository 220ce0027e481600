"""Monte Carlo rollout kernels.

Two implementations of the same rollout: ``_rollout_numba`` loops over
episodes and slots under ``@njit(parallel=True)``; ``_rollout_numpy``
vectorizes over episodes and loops over slots. Randomness comes from a
counter-based generator: every uniform is a hash of
(master seed, episode, slot, stream), so an episode's draws do not depend
on which worker runs it or in what order, and both backends consume
exactly the same numbers.
"""
from __future__ import annotations

import math

import numpy as np

from . import _accel
from ._accel import njit, prange

# scheme codes
TABLE, GREEDY, NAIVE = 0, 1, 2
# horizon modes
DISCOUNTED, LIFETIME, FIXED = 0, 1, 2

# stream ids within a slot
S_SURVIVE, S_HARVEST, S_BLOCK, S_CHAIN_D, S_CHAIN_E, S_POINT = 0, 1, 2, 3, 4, 5
S_BOOST_A, S_BOOST_B = 6, 7
S_GAMMA_A, S_GAMMA_B = 8, 56
GAMMA_TRIES = 16
N_STREAMS = 128

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_SH30, _SH27, _SH31, _SH11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0
TWO_PI = 2.0 * math.pi
LN2 = math.log(2.0)

ERR_NONE, ERR_INFEASIBLE = 0, 1


# --- counter-based uniforms ----------------------------------------------------

@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> _SH30)) * _M1
    z = (z ^ (z >> _SH27)) * _M2
    return z ^ (z >> _SH31)


@njit(cache=True, inline="always")
def _episode_key(seed, episode):
    return _mix64(seed ^ _mix64(episode * _GOLDEN + _GOLDEN))


@njit(cache=True, inline="always")
def _uniform(key, slot, stream):
    c = np.uint64(slot) * np.uint64(N_STREAMS) + np.uint64(stream) + np.uint64(1)
    z = _mix64(key + c * _GOLDEN)
    return (np.float64(z >> _SH11) + 0.5) * _INV53


def episode_keys(seed: int, episodes: np.ndarray) -> np.ndarray:
    ep = np.asarray(episodes, dtype=np.uint64)
    s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        return _mix64_np(s ^ _mix64_np(ep * _GOLDEN + _GOLDEN))


def _mix64_np(z):
    z = (z ^ (z >> _SH30)) * _M1
    z = (z ^ (z >> _SH27)) * _M2
    return z ^ (z >> _SH31)


def uniforms(keys: np.ndarray, slot: int, stream: int) -> np.ndarray:
    """Vector of uniforms in (0, 1) for one (slot, stream) across episodes."""
    c = np.uint64(slot * N_STREAMS + stream + 1)
    with np.errstate(over="ignore"):
        z = _mix64_np(keys + c * _GOLDEN)
    return ((z >> _SH11).astype(np.float64) + 0.5) * _INV53


# --- unit-mean gamma from counter uniforms -----------------------------------

@njit(cache=True)
def _gamma_unit(key, slot, shape, base, boost):
    """Gamma(shape, 1/shape) by Marsaglia-Tsang on counter uniforms."""
    a = shape if shape >= 1.0 else shape + 1.0
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    g = d
    for t in range(GAMMA_TRIES):
        u1 = _uniform(key, slot, base + 3 * t)
        u2 = _uniform(key, slot, base + 3 * t + 1)
        x = math.sqrt(-2.0 * math.log(u1)) * math.cos(TWO_PI * u2)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = _uniform(key, slot, base + 3 * t + 2)
        if math.log(u) < 0.5 * x * x + d - d * v + d * math.log(v):
            g = d * v
            break
    if shape < 1.0:
        g = g * _uniform(key, slot, boost) ** (1.0 / shape)
    return g / shape


def gamma_unit_np(keys: np.ndarray, slot: int, shape: float, base: int, boost: int) -> np.ndarray:
    a = shape if shape >= 1.0 else shape + 1.0
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    g = np.full(keys.shape[0], d)
    todo = np.arange(keys.shape[0])
    for t in range(GAMMA_TRIES):
        if todo.size == 0:
            break
        k = keys[todo]
        u1 = uniforms(k, slot, base + 3 * t)
        u2 = uniforms(k, slot, base + 3 * t + 1)
        x = np.sqrt(-2.0 * np.log(u1)) * np.cos(TWO_PI * u2)
        v = 1.0 + c * x
        pos = v > 0.0
        v3 = np.where(pos, v * v * v, 1.0)
        u = uniforms(k, slot, base + 3 * t + 2)
        acc = pos & (np.log(u) < 0.5 * x * x + d - d * v3 + d * np.log(v3))
        g[todo[acc]] = d * v3[acc]
        todo = todo[~acc]
    if shape < 1.0:
        g = g * uniforms(keys, slot, boost) ** (1.0 / shape)
    return g / shape


# --- numba rollout -----------------------------------------------------------

@njit(cache=True, inline="always")
def _next_index(cdf_row, u):
    n = cdf_row.shape[0]
    for idx in range(n - 1):
        if u < cdf_row[idx]:
            return idx
    return n - 1


@njit(cache=True, parallel=True)
def _rollout_numba(kind, policy, reward, feasible, units, cdf_d, cdf_e, n_e, n_b,
                   harvest_p, harvest_e, start_d, start_e, start_b,
                   p_clear, exact, snr_d, snr_e, opt_scale, alpha, beta, rho, a0,
                   bandwidth, r_th, gamma, mode, horizon, seed, first_episode,
                   totals, slots, evals, errors):
    n_ep = totals.shape[0]
    n_act = units.shape[0]
    cap = n_b - 1
    for e in prange(n_ep):
        key = _episode_key(np.uint64(seed), np.uint64(first_episode + e))
        i = start_d
        j = start_e
        b = start_b
        total = 0.0
        disc = 1.0
        n_eval = 0
        k = 0
        while True:
            s = (i * n_e + j) * n_b + b
            if kind == TABLE:
                a = policy[s]
                n_eval += 1
            elif kind == GREEDY:
                a = -1
                best = -1.0
                for m in range(n_act):
                    n_eval += 1
                    if feasible[s, m] and reward[s, m] > best:
                        best = reward[s, m]
                        a = m
            else:
                a = 0
                for m in range(n_act):
                    if units[m] <= b:
                        a = m
                n_eval += 1
            if a < 0 or not feasible[s, a]:
                errors[e] = ERR_INFEASIBLE
                break
            hb = _uniform(key, k, S_BLOCK) < p_clear
            cs = 0.0
            if hb:
                if exact:
                    ht = _gamma_unit(key, k, alpha, S_GAMMA_A, S_BOOST_A) * \
                        _gamma_unit(key, k, beta, S_GAMMA_B, S_BOOST_B)
                    hp = a0 * _uniform(key, k, S_POINT) ** (1.0 / rho)
                    g_r = opt_scale * (ht * hp) * (ht * hp)
                    g_d = min(snr_d[i, a], g_r)
                    g_e = min(snr_e[j, a], g_r)
                    cs = bandwidth * max((math.log1p(g_d) - math.log1p(g_e)) / LN2, 0.0)
                    if cs < r_th:
                        cs = 0.0
                else:
                    cs = reward[s, a]
            if mode == DISCOUNTED:
                total += disc * cs
                disc *= gamma
            else:
                total += cs
            spent = units[a]
            if _uniform(key, k, S_HARVEST) < harvest_p:
                b = min(b - spent + harvest_e, cap)
            else:
                b = b - spent
            i = _next_index(cdf_d[i], _uniform(key, k, S_CHAIN_D))
            j = _next_index(cdf_e[j], _uniform(key, k, S_CHAIN_E))
            k += 1
            if mode == LIFETIME:
                if not (_uniform(key, k, S_SURVIVE) < gamma):
                    break
            elif k >= horizon:
                break
        totals[e] = total
        slots[e] = k
        evals[e] = n_eval


# --- numpy rollout -----------------------------------------------------------

def _rollout_numpy(kind, policy, reward, feasible, units, cdf_d, cdf_e, n_e, n_b,
                   harvest_p, harvest_e, start_d, start_e, start_b,
                   p_clear, exact, snr_d, snr_e, opt_scale, alpha, beta, rho, a0,
                   bandwidth, r_th, gamma, mode, horizon, seed, first_episode,
                   totals, slots, evals, errors, trace=None):
    n_ep = totals.shape[0]
    n_act = units.shape[0]
    cap = n_b - 1
    keys = episode_keys(seed, np.arange(first_episode, first_episode + n_ep, dtype=np.uint64))
    i = np.full(n_ep, start_d, dtype=np.int64)
    j = np.full(n_ep, start_e, dtype=np.int64)
    b = np.full(n_ep, start_b, dtype=np.int64)
    total = np.zeros(n_ep)
    n_eval = np.zeros(n_ep, dtype=np.int64)
    alive = np.ones(n_ep, dtype=bool)
    count = np.zeros(n_ep, dtype=np.int64)
    masked_reward = np.where(feasible, reward, -1.0)
    disc = 1.0
    k = 0
    while alive.any():
        idx = np.flatnonzero(alive)
        ki = keys[idx]
        ii, jj, bb = i[idx], j[idx], b[idx]
        s = (ii * n_e + jj) * n_b + bb
        if kind == TABLE:
            a = policy[s]
            n_eval[idx] += 1
        elif kind == GREEDY:
            a = np.argmax(masked_reward[s], axis=1)
            n_eval[idx] += n_act
        else:
            a = np.searchsorted(units, bb, side="right") - 1
            n_eval[idx] += 1
        ok = feasible[s, a]
        if not ok.all():
            errors[idx[~ok]] = ERR_INFEASIBLE
            alive[idx[~ok]] = False
            return
        hb = uniforms(ki, k, S_BLOCK) < p_clear
        if exact:
            ht = gamma_unit_np(ki, k, alpha, S_GAMMA_A, S_BOOST_A) * \
                gamma_unit_np(ki, k, beta, S_GAMMA_B, S_BOOST_B)
            hp = a0 * uniforms(ki, k, S_POINT) ** (1.0 / rho)
            g_r = opt_scale * (ht * hp) * (ht * hp)
            g_d = np.minimum(snr_d[ii, a], g_r)
            g_e = np.minimum(snr_e[jj, a], g_r)
            cs = bandwidth * np.maximum((np.log1p(g_d) - np.log1p(g_e)) / LN2, 0.0)
            cs = np.where(hb & (cs >= r_th), cs, 0.0)
        else:
            cs = np.where(hb, reward[s, a], 0.0)
        if mode == DISCOUNTED:
            total[idx] += disc * cs
            disc *= gamma
        else:
            total[idx] += cs
        spent = units[a]
        harvested = uniforms(ki, k, S_HARVEST) < harvest_p
        nb = np.where(harvested, np.minimum(bb - spent + harvest_e, cap), bb - spent)
        ni = _next_index_np(cdf_d, ii, uniforms(ki, k, S_CHAIN_D))
        nj = _next_index_np(cdf_e, jj, uniforms(ki, k, S_CHAIN_E))
        if trace is not None:
            trace.append((k, int(ii[0]), int(jj[0]), int(bb[0]), int(a[0]),
                          bool(harvested[0]), int(hb[0]), float(cs[0])))
        i[idx], j[idx], b[idx] = ni, nj, nb
        k += 1
        count[idx] = k
        if mode == LIFETIME:
            alive[idx] = uniforms(ki, k, S_SURVIVE) < gamma
        elif k >= horizon:
            alive[:] = False
    totals[:] = total
    slots[:] = count
    evals[:] = n_eval


def _next_index_np(cdf, rows, u):
    # first column whose cumulative probability exceeds u
    return (u[:, None] >= cdf[rows, :-1]).sum(axis=1)


def rollout(*args, backend: str | None = None, trace=None):
    """Dispatch to the numba kernel or the numpy fallback."""
    use = backend or _accel.backend()
    if trace is not None or use == "numpy":
        return _rollout_numpy(*args, trace=trace)
    if not _accel.HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is unavailable")
    return _rollout_numba(*args)
