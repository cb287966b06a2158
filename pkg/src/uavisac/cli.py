"""Command-line entry point: ``uavisac {train,sweep,eval,summarize,selftest}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness


def _load(args, **extra) -> harness.ExperimentSpec:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ValueError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as e:
            raise ValueError(f"{args.config}: invalid JSON ({e})") from None
        if not isinstance(doc, dict):
            raise ValueError(f"{args.config}: config must be a JSON object")
    over = dict(out_dir=args.out, **extra)
    if args.paper_scale:
        over["paper_scale"] = True
    return harness.ExperimentSpec.from_dict(doc, **over)


def cmd_train(args) -> int:
    spec = _load(args, seeds=[args.seed] if args.seed is not None else None)
    if spec.sweep_axis != "none":
        raise ValueError("train runs a single configuration; use `sweep` for sweep configs")
    for p in harness.run_experiment(spec):
        print(p)
    return 0


def cmd_sweep(args) -> int:
    spec = _load(args, seeds=[args.seed] if args.seed is not None else None, workers=args.workers)
    for p in harness.run_experiment(spec):
        print(p)
    return 0


def cmd_eval(args) -> int:
    for p in harness.evaluate_checkpoint(args.checkpoint, args.out, args.episodes, args.seed or 0):
        print(p)
    return 0


def cmd_summarize(args) -> int:
    for p in harness.summarize(args.results, args.out):
        print(p)
    return 0


def cmd_selftest(args) -> int:
    """Fast physics spot checks plus a two-episode training smoke run."""
    import tempfile

    from .agents import AgentConfig, train
    from .env import desk_scenario
    from .uav import EnergyParams, propulsion_energy

    checks = {
        "hover energy": abs(propulsion_energy(0.0, EnergyParams()) - 168.48) < 1e-9,
        "energy at 10 m/s": abs(propulsion_energy(10.0, EnergyParams()) - 126.0) < 0.05,
    }
    sc = desk_scenario(T=4)
    rep, _ = train(sc, AgentConfig(episodes=2, batch=4, hidden=(16, 16), G=2), seed=0)
    checks["training smoke run"] = len(rep.episodes) == 2 and rep.n_updates > 0
    with tempfile.TemporaryDirectory() as d:
        spec = harness.ExperimentSpec(out_dir=d, scenario={"T": 3},
                                      agent={"episodes": 1, "batch": 2, "hidden": [8], "eval_episodes": 1})
        checks["result files"] = len(harness.run_experiment(spec)) == 3
    ok = True
    for name, passed in checks.items():
        print(f"{'PASS' if passed else 'FAIL'}  {name}")
        ok &= passed
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uavisac", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, need_out=True):
        sp.add_argument("--config", help="experiment JSON")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", required=need_out, help="output directory")
        sp.add_argument("--paper-scale", action="store_true", help="full-size scenario and agent")

    sp = sub.add_parser("train", help="train one configuration")
    common(sp)
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("sweep", help="run a sweep over one scenario axis")
    common(sp)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("eval", help="evaluate a saved checkpoint")
    sp.add_argument("checkpoint")
    sp.add_argument("--out", required=True)
    sp.add_argument("--episodes", type=int, default=10)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("summarize", help="aggregate a result directory")
    sp.add_argument("results")
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_summarize)

    sp = sub.add_parser("selftest", help="quick installation check")
    sp.set_defaults(fn=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ValueError, KeyError, TypeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
