"""Run the algorithm comparison and the scenario sweeps, then summarize.

Each config in scripts/configs is run once per method (the four agent kinds
plus the two single-objective variants) and written under OUT/<config>/.

    python scripts/run_experiments.py --out results            # desk scale, all configs
    python scripts/run_experiments.py --out results power start --workers 4
    python scripts/run_experiments.py --out results --paper-scale --episodes 4500
"""

from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path

from uavisac import harness

CONFIG_DIR = Path(__file__).parent / "configs"
METHODS = {
    "gdmddpg": {"kind": "gdmddpg"},
    "ddpg": {"kind": "ddpg"},
    "td3": {"kind": "td3"},
    "random": {"kind": "random"},
    "comm_only": {"ablation": "comm_only"},
    "sense_only": {"ablation": "sense_only"},
}


def main(argv=None) -> None:
    configs = sorted(p.stem for p in CONFIG_DIR.glob("*.json"))
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("configs", nargs="*", help=f"subset of {configs} (default: all)")
    ap.add_argument("--out", required=True)
    ap.add_argument("--methods", nargs="+", choices=list(METHODS), default=list(METHODS))
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--episodes", type=int, help="override the training episode count")
    ap.add_argument("--seeds", type=int, nargs="+", help="override the seed list")
    ap.add_argument("--paper-scale", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    unknown = set(args.configs) - set(configs)
    if unknown:
        ap.error(f"unknown configs: {sorted(unknown)}")

    for name in args.configs or configs:
        doc = json.loads((CONFIG_DIR / f"{name}.json").read_text())
        out = Path(args.out) / name
        for method in args.methods:
            agent = {**doc.get("agent", {}), **METHODS[method]}
            if args.episodes:
                agent["episodes"] = args.episodes
            spec = harness.ExperimentSpec.from_dict(
                {**doc, "name": f"{name}-{method}", "agent": agent},
                out_dir=str(out), workers=args.workers, seeds=args.seeds,
                paper_scale=args.paper_scale or None)
            logging.info("running %s (%d cells)", spec.name, len(spec.cells()))
            harness.run_experiment(spec)
        for p in harness.summarize(out):
            print(p)


if __name__ == "__main__":
    main()
