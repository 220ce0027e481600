"""Parameter sweeps and lookup-table export."""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from . import _accel
from .config import ConfigError, SystemConfig, with_overrides
from .mdp import build_model, policy_iteration, write_policy_table
from .policies import SCHEMES, Scheme
from .simulate import MODE_LABELS, evaluate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepSpec:
    """A primary parameter swept over ``values`` for every combination of ``variants``."""

    param: str
    values: tuple[Any, ...]
    variants: tuple[tuple[str, tuple[Any, ...]], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.values:
            raise ValueError("sweep needs at least one value")
        names = [self.param] + [p for p, _ in self.variants]
        if len(set(names)) != len(names):
            raise ValueError("swept and variant parameters must be distinct")
        for p, vals in self.variants:
            if not vals:
                raise ValueError(f"variant {p} has no values")

    @property
    def columns(self) -> list[str]:
        return [self.param] + [p for p, _ in self.variants]

    def points(self) -> Iterable[dict[str, Any]]:
        var_names = [p for p, _ in self.variants]
        for combo in itertools.product(*(v for _, v in self.variants)):
            for x in self.values:
                point = {self.param: x}
                point.update(zip(var_names, combo))
                yield point


FIGURES = {
    "2": SweepSpec("gamma", (0.5, 0.6, 0.7, 0.8, 0.9),
                   (("optical.obstacle_density", (3e-3, 1e-4)),)),
    "3": SweepSpec("harvest.probability", (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
                   (("harvest.quantum_units", (2, 3, 4)),)),
    "4": SweepSpec("battery.capacity_units", (3, 4, 5, 6, 7, 8),
                   (("acoustic_e.distance_km", (5.0, 6.0)),)),
}


def _fmt(v: Any) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def run_sweep(cfg: SystemConfig, sweep: SweepSpec, schemes: Iterable[str] = SCHEMES,
              episodes: int | None = None, seed: int | None = None, mode: str | None = None,
              backend: str | None = None) -> tuple[str, list[str]]:
    """Evaluate every (point, scheme); returns (CSV text, per-point failure messages).

    Each grid point rebuilds the model and re-solves OPA. Failed points are
    logged and skipped.
    """
    schemes = list(schemes)
    for s in schemes:
        if s not in SCHEMES:
            raise ValueError(f"unknown scheme {s!r}")
    seed = cfg.master_seed if seed is None else int(seed)
    episodes = cfg.episodes if episodes is None else int(episodes)
    mode = cfg.mode if mode is None else mode
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scheme", *sweep.columns, "mean", "ci95", "episodes", "seed", "mode"])
    failures: list[str] = []
    for point in sweep.points():
        label = ", ".join(f"{k}={_fmt(v)}" for k, v in point.items())
        try:
            pcfg = with_overrides(cfg, point)
            model = build_model(pcfg)
            rows = []
            for kind in schemes:
                if kind == "opa":
                    scheme = Scheme.opa(policy_iteration(model, pcfg.epsilon).policy)
                else:
                    scheme = Scheme(kind)
                r = evaluate(scheme, pcfg, episodes, seed, mode, model=model, backend=backend)
                rows.append([kind, *(_fmt(point[c]) for c in sweep.columns),
                             repr(r.mean), repr(r.ci_halfwidth_95), r.episodes, seed, MODE_LABELS[mode]])
        except (ConfigError, ValueError, RuntimeError) as exc:
            log.error("sweep point %s failed: %s", label, exc)
            failures.append(f"{label}: {exc}")
            continue
        log.info("sweep point %s done", label)
        w.writerows(rows)
    return buf.getvalue(), failures


def solve_and_export(cfg: SystemConfig, out_path: str | Path) -> dict[str, Any]:
    """Solve by policy iteration and write the lookup table.

    The table itself is deterministic; wall time goes to ``<out>.meta.json``.
    """
    t0 = time.perf_counter()
    model = build_model(cfg)
    res = policy_iteration(model, cfg.epsilon)
    wall = time.perf_counter() - t0
    meta = {
        "iterations": res.iterations,
        "epsilon": cfg.epsilon,
        "gamma": cfg.gamma,
        "n_states": model.n_states,
        "n_actions": model.n_actions,
        **res.counter.as_dict(),
    }
    write_policy_table(out_path, model, res.policy, res.value, meta)
    full = dict(meta, wall_time_s=wall, backend=_accel.backend())
    Path(str(out_path) + ".meta.json").write_text(json.dumps(full, indent=2, sort_keys=True) + "\n")
    return full
