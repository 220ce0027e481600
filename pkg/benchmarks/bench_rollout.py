"""Compare the numba and numpy rollout backends on the default configuration.

    python3 benchmarks/bench_rollout.py --episodes 100000

Reports wall time per backend (numba after a warm-up call, so compile time
is shown separately) and checks that both produce identical totals.
"""
import argparse
import time

import numpy as np

from uwsec import _accel
from uwsec.config import default_config
from uwsec.mdp import build_model, policy_iteration
from uwsec.policies import Scheme
from uwsec.simulate import episode_totals


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--episodes", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--mode", choices=["discounted", "lifetime"], default="discounted")
    args = ap.parse_args()

    cfg = default_config()
    model = build_model(cfg)
    schemes = {"opa": Scheme.opa(policy_iteration(model, cfg.epsilon).policy),
               "ga": Scheme("ga"), "na": Scheme("na")}
    backends = ["numpy"] + (["numba"] if _accel.HAS_NUMBA else [])
    if _accel.HAS_NUMBA:
        _, compile_s = timed(lambda: episode_totals(schemes["ga"], cfg, 10, 0, args.mode, model,
                                                    backend="numba"))
        print(f"numba warm-up (compile or cache load): {compile_s:.2f} s, {_accel.workers()} thread(s)")
    print(f"{'scheme':<6} {'backend':<7} {'seconds':>8} {'episodes/s':>12}")
    for name, sc in schemes.items():
        totals = {}
        for b in backends:
            (tot, _, _), sec = timed(lambda: episode_totals(sc, cfg, args.episodes, args.seed,
                                                            args.mode, model, backend=b))
            totals[b] = tot
            print(f"{name:<6} {b:<7} {sec:8.2f} {args.episodes / sec:12.0f}")
        if len(totals) == 2:
            same = np.array_equal(totals["numpy"], totals["numba"])
            print(f"{name:<6} identical totals across backends: {same}")


if __name__ == "__main__":
    main()
