"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``. Monte Carlo checks use
1e5 episodes and the bundled default configuration.
"""
import itertools
import math
import os
import subprocess
import sys
import time
from functools import lru_cache

import numpy as np
import pytest
from scipy import integrate

from uwsec.acoustic import AcousticLinkParams, broadband_snr, thorp_absorption_db_per_km
from uwsec.config import default_config
from uwsec.mdp import (MdpModel, build_model, exact_policy_value, policy_iteration, q_values,
                       value_iteration)
from uwsec.optical import sample_pointing, turbulence_pdf
from uwsec.policies import Scheme
from uwsec.simulate import evaluate

pytestmark = pytest.mark.slow

EPISODES = 100_000
ORDER = ("opa", "ga", "na")


@lru_cache(maxsize=None)
def _solved(overrides: tuple):
    cfg = default_config().replace(**dict(overrides)) if overrides else default_config()
    model = build_model(cfg)
    return cfg, model, policy_iteration(model, cfg.epsilon)


@lru_cache(maxsize=None)
def run(overrides: tuple = (), kind: str = "opa", mode: str = "discounted"):
    cfg, model, res = _solved(overrides)
    scheme = Scheme.opa(res.policy) if kind == "opa" else Scheme(kind)
    return evaluate(scheme, cfg, EPISODES, mode=mode, model=model)


def _fmt(results):
    return ", ".join(f"{k}={r.mean:.1f}±{r.ci_halfwidth_95:.1f}" for k, r in results.items())


def test_c1_scheme_ordering(report):
    t0 = time.perf_counter()
    res = {k: run((("gamma", 0.9),), k) for k in ORDER}
    wall = time.perf_counter() - t0
    o, g, n = (res[k] for k in ORDER)
    ok = (o.mean - g.mean > o.ci_halfwidth_95 + g.ci_halfwidth_95
          and g.mean - n.mean > g.ci_halfwidth_95 + n.ci_halfwidth_95 and wall < 60)
    assert report(ok, "1 scheme ordering OPA > GA > NA", f"{_fmt(res)}; {wall:.1f} s for 3x1e5 episodes")


def test_c2_discount_and_obstacle_trends(report):
    lines, ok = [], True
    for k in ORDER:
        means = [run((("gamma", g),), k).mean for g in (0.5, 0.7, 0.9)]
        ok &= bool(np.all(np.diff(means) > 0))
        lo = run((("gamma", 0.9), ("optical.obstacle_density", 1e-4)), k)
        hi = run((("gamma", 0.9), ("optical.obstacle_density", 3e-3)), k)
        ok &= hi.mean + hi.ci_halfwidth_95 < lo.mean - lo.ci_halfwidth_95
        lines.append(f"{k}: gamma {[round(m) for m in means]}, T_o 1e-4 -> 3e-3 {lo.mean:.0f} -> {hi.mean:.0f}")
    assert report(ok, "2 increasing in gamma, decreasing in obstacle density", "; ".join(lines))


def test_c3_harvest_trends(report):
    lines, ok = [], True
    for k in ORDER:
        mp = [run((("harvest.probability", p),), k).mean for p in (0.2, 0.4, 0.6, 0.8)]
        me = [run((("harvest.quantum_units", e),), k).mean for e in (2, 3, 4)]
        ok &= bool(np.all(np.diff(mp) > 0) and np.all(np.diff(me) > 0))
        lines.append(f"{k}: p {[round(m) for m in mp]}, E_R {[round(m) for m in me]}")
    gap = {p: run((("harvest.probability", p),), "opa").mean - run((("harvest.probability", p),), "na").mean
           for p in (0.3, 0.9)}
    ok &= gap[0.9] < gap[0.3]
    lines.append(f"OPA-NA gap p=0.3 {gap[0.3]:.0f}, p=0.9 {gap[0.9]:.0f}")
    assert report(ok, "3 increasing in p and E_R, gap shrinks at high p", "; ".join(lines))


def test_c4_battery_and_distance_trends(report):
    lines, ok = [], True
    for k in ORDER:
        mb = [run((("battery.capacity_units", b),), k).mean for b in (3, 4, 5, 6)]
        near = run((("acoustic_e.distance_km", 5.0),), k).mean
        far = run((("acoustic_e.distance_km", 6.0),), k).mean
        ok &= bool(np.all(np.diff(mb) >= 0)) and near < far
        lines.append(f"{k}: Bmax {[round(m) for m in mb]}, l_RE 6 -> 5 km {far:.0f} -> {near:.0f}")
    assert report(ok, "4 non-decreasing in Bmax, decreasing as l_RE shrinks", "; ".join(lines))


def _brute_force(m: MdpModel):
    values = {}
    for combo in itertools.product(range(m.n_actions), repeat=m.n_states):
        values[combo] = exact_policy_value(m, np.array(combo))
    best = [c for c, v in values.items() if all(np.all(v >= w - 1e-12) for w in values.values())]
    return np.array(best[0]), values[best[0]]


def test_c5_solver_oracles(report):
    cfg, model, pi = _solved(())
    vi = value_iteration(model, cfg.epsilon)
    tol = 2 * cfg.epsilon * cfg.gamma / (1 - cfg.gamma)
    gap = float(np.max(np.abs(pi.value - vi.value)))
    diff = np.flatnonzero(pi.policy != vi.policy)
    q = q_values(model, vi.value)
    ties = all(abs(q[s, pi.policy[s]] - q[s, vi.policy[s]]) <= tol for s in diff)
    P = [[[0.9, 0.1], [0.2, 0.8]], [[0.3, 0.7], [0.6, 0.4]]]
    R = [[1.0, 1.5], [0.0, 2.0]]
    small = MdpModel.from_dense(P, R, 0.9)
    bf_pol, bf_val = _brute_force(small)
    sp = policy_iteration(small, 1e-12)
    bf_ok = np.array_equal(sp.policy, bf_pol) and np.allclose(sp.value, bf_val, atol=1e-9)
    ok = gap <= tol and ties and bf_ok
    assert report(ok, "5 PI vs VI and brute force",
                  f"sup|V_PI - V_VI| = {gap:.2e} (tol {tol:.1e}), {diff.size} tie states, "
                  f"brute-force policy {bf_pol.tolist()} vs PI {sp.policy.tolist()}")


def test_c6_monte_carlo_matches_bellman(report):
    cfg, model, pi = _solved((("gamma", 0.9),))
    r = run((("gamma", 0.9),), "opa")
    target = cfg.optical.unblocked_probability * pi.value[model.index(*cfg.start_state)]
    ok = abs(r.mean - target) <= r.ci_halfwidth_95
    assert report(ok, "6 Monte Carlo vs clear-link factor x V*(s0)",
                  f"MC {r.mean:.1f}±{r.ci_halfwidth_95:.1f}, Bellman {target:.1f}")


def test_c7_lifetime_identity(report):
    lines, ok = [], True
    for g, k in itertools.product((0.5, 0.9), ORDER):
        d = run((("gamma", g),), k, "discounted")
        l = run((("gamma", g),), k, "lifetime")
        ok &= abs(d.mean - l.mean) <= d.ci_halfwidth_95 + l.ci_halfwidth_95
        lines.append(f"G={g} {k}: {d.mean:.0f}±{d.ci_halfwidth_95:.0f} vs {l.mean:.0f}±{l.ci_halfwidth_95:.0f}")
    assert report(ok, "7 lifetime vs discounted", "; ".join(lines))


def test_c8_physics(report):
    cfg = default_config()
    opt = cfg.optical
    a, b = opt.alpha, opt.beta
    norm = integrate.quad(lambda x: turbulence_pdf(x, a, b), 0, np.inf, limit=500)[0]
    mean = integrate.quad(lambda x: x * turbulence_pdf(x, a, b), 0, np.inf, limit=500)[0]
    x = sample_pointing(opt.rho, opt.aperture_a0, np.random.default_rng(8), 2_000_000)
    p_target = opt.rho * opt.aperture_a0 / (opt.rho + 1)
    f2 = 10.0 ** 2
    thorp_ref = math.fsum([0.11 * f2 / (1 + f2), 44 * f2 / (4100 + f2), 2.75e-4 * f2, 0.003])
    thorp = thorp_absorption_db_per_km(10.0)
    link = AcousticLinkParams()
    base = broadband_snr(1.0, 1.0, link)
    lin = all(broadband_snr(p, g, link) == pytest.approx(p * g * base, rel=1e-14)
              for p in (0.5, 1.0, 3.0) for g in (0.1, 0.5, 2.0))
    rows = max(float(np.max(np.abs(c.transition.sum(axis=1) - 1)))
               for c in (cfg.gain_chain_rd, cfg.gain_chain_re))
    ok = (abs(norm - 1) <= 1e-6 and abs(mean - 1) <= 1e-6 and abs(x.mean() - p_target) <= 1e-4
          and abs(thorp - thorp_ref) <= 1e-3 and abs(thorp - 1.187) <= 1e-3 and lin and rows <= 1e-12)
    assert report(ok, "8 physics", f"GG norm {norm:.9f}, mean {mean:.9f}; pointing {x.mean():.6f} vs "
                  f"{p_target:.6f}; Thorp(10 kHz) {thorp:.5f} vs {thorp_ref:.5f}; SNR linear {lin}; "
                  f"row-sum error {rows:.1e}")


def test_c9_complexity_counters(report):
    cfg, model, pi = _solved(())
    K, n = 40, 500
    ga = evaluate(Scheme("ga"), cfg, n, mode="fixed", model=model, horizon=K)
    na = evaluate(Scheme("na"), cfg, n, mode="fixed", model=model, horizon=K)
    opa = evaluate(Scheme.opa(pi.policy), cfg, n, mode="fixed", model=model, horizon=K)
    ok = (ga.reward_evals == n * K * model.n_actions and na.reward_evals == n * K
          and opa.reward_evals == n * K and ga.mean_slots == K)
    assert report(ok, "9 operation counters on fixed K",
                  f"K={K}, N_A={model.n_actions}: GA {ga.reward_evals // n}/episode, "
                  f"NA {na.reward_evals // n}/episode, OPA {opa.reward_evals // n}/episode")


def test_c10_sweep_determinism(report, tmp_path):
    env = dict(os.environ, NUMBA_NUM_THREADS="4")
    outs = []
    for i, workers in enumerate((1, 4, 4)):
        path = tmp_path / f"s{i}.csv"
        subprocess.run([sys.executable, "-m", "uwsec", "sweep", "--figure", "2", "--episodes", "5000",
                        "--workers", str(workers), "--out", str(path)], env=env, check=True)
        outs.append(path.read_bytes())
    ok = outs[0] == outs[1] == outs[2] and outs[0].count(b"\n") == 31
    assert report(ok, "10 sweep CSV byte-identical", f"3 runs (workers 1, 4, 4), {len(outs[0])} bytes each")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
