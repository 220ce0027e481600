"""Command-line entry point: ``uwsec {solve,eval,sweep,validate}``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import yaml

from . import _accel
from .config import ConfigError, load_config, with_overrides
from .experiments import FIGURES, SweepSpec, run_sweep, solve_and_export
from .mdp import build_model, policy_iteration, read_policy_table
from .policies import SCHEMES, Scheme
from .simulate import MODE_LABELS, evaluate, run_episode

log = logging.getLogger("uwsec")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _parse_value(text: str):
    v = yaml.safe_load(text)
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return v
    raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def _values(text: str) -> tuple:
    return tuple(_parse_value(t) for t in text.split(",") if t.strip())


def _variant(text: str) -> tuple[str, tuple]:
    path, sep, vals = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("variant must look like PATH=v1,v2")
    return path.strip(), _values(vals)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config; missing keys fall back to the bundled defaults")
    p.add_argument("--set", action="append", default=[], metavar="PATH=VALUE",
                   help="override one config value, e.g. --set harvest.probability=0.8")


def _run_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--scheme", choices=[*SCHEMES, "all"], default="all")
    p.add_argument("--mode", choices=["discounted", "lifetime"])
    p.add_argument("--exact", action="store_true", help="per-slot end-to-end capacity incl. optical SNR")
    p.add_argument("--workers", type=int, help="numba threads for episode evaluation")
    p.add_argument("--out", help="output CSV (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uwsec", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a config file")
    _common(p)

    p = sub.add_parser("solve", help="planning phase: solve the MDP and write the lookup table")
    _common(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="transmission phase: Monte Carlo evaluation")
    _common(p)
    _run_opts(p)
    p.add_argument("--policy", help="OPA lookup table from `solve` (default: solve in-process)")
    p.add_argument("--trace", help="write episode 0 of each scheme as JSON lines to PATH.<scheme>.jsonl")

    p = sub.add_parser("sweep", help="parameter sweep over all schemes")
    _common(p)
    _run_opts(p)
    p.add_argument("--figure", choices=sorted(FIGURES), help="preset sweep")
    p.add_argument("--param", help="swept parameter path, e.g. gamma")
    p.add_argument("--values", type=_values)
    p.add_argument("--variant", type=_variant, action="append", default=[],
                   metavar="PATH=v1,v2", help="secondary parameter, repeatable")
    return ap


def _load(args):
    cfg = load_config(args.config)
    overrides = {}
    for item in args.set:
        path, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"{item}: expected PATH=VALUE")
        overrides[path.strip()] = yaml.safe_load(val)
    if getattr(args, "exact", False):
        overrides["exact"] = True
    return with_overrides(cfg, overrides) if overrides else cfg


def _schemes(args) -> list[str]:
    return list(SCHEMES) if args.scheme == "all" else [args.scheme]


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_validate(args) -> int:
    cfg = _load(args)
    model = build_model(cfg)
    print(f"ok: {model.n_states} states, {model.n_actions} actions, "
          f"battery levels {cfg.battery.levels}, start {cfg.start_state}")
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _load(args)
    meta = solve_and_export(cfg, args.out)
    log.info("solved in %d iterations (%.3f s)", meta["iterations"], meta["wall_time_s"])
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load(args)
    _accel.set_workers(args.workers)
    model = build_model(cfg)
    mode = args.mode or cfg.mode
    seed = cfg.master_seed if args.seed is None else args.seed
    rows = [["scheme", "mean", "ci95", "episodes", "seed", "mode"]]
    for kind in _schemes(args):
        if kind == "opa":
            if args.policy:
                table, _, _ = read_policy_table(args.policy, model)
            else:
                table = policy_iteration(model, cfg.epsilon).policy
            scheme = Scheme.opa(table)
        else:
            scheme = Scheme(kind)
        r = evaluate(scheme, cfg, args.episodes, seed, mode, model=model)
        rows.append([kind, repr(r.mean), repr(r.ci_halfwidth_95), r.episodes, seed, MODE_LABELS[mode]])
        if args.trace:
            run_episode(scheme, cfg, seed, mode, model=model).dump(f"{args.trace}.{kind}.jsonl")
    out = _csv(rows)
    _emit(out, args.out)
    return EXIT_OK


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def cmd_sweep(args) -> int:
    cfg = _load(args)
    _accel.set_workers(args.workers)
    if args.figure:
        spec = FIGURES[args.figure]
    elif args.param and args.values:
        spec = SweepSpec(args.param, args.values, tuple(args.variant))
    else:
        raise ConfigError("sweep: give --figure or both --param and --values")
    text, failures = run_sweep(cfg, spec, _schemes(args), args.episodes, args.seed, args.mode)
    _emit(text, args.out)
    if failures:
        for f in failures:
            log.error("failed point: %s", f)
        return EXIT_RUNTIME
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "eval": cmd_eval, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
