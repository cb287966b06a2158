"""Print summary tables from a results directory written by run_experiments.py.

    python scripts/show_results.py results/power

Rows are methods, columns are sweep values, cells are the tail-mean metric
averaged over seeds. Uses only the summary.csv produced by `uavisac summarize`.
"""

from __future__ import annotations

import argparse
import csv
from collections import defaultdict
from pathlib import Path


def table(rows: list[dict], metric: str) -> str:
    grid: dict[str, dict[str, str]] = defaultdict(dict)
    cols: list[str] = []
    for r in rows:
        name, _, cell = r["config"].partition("__")
        method = name.split("-", 1)[-1]
        col = cell.split("=", 1)[-1] if cell else "-"
        if col not in cols:
            cols.append(col)
        grid[method][col] = f"{float(r[metric + '_mean']):.4g}"
    width = max(10, *(len(c) + 2 for c in cols))
    lines = [f"{metric}", "method".ljust(12) + "".join(c.rjust(width) for c in cols)]
    for method, vals in grid.items():
        lines.append(method.ljust(12) + "".join(vals.get(c, "").rjust(width) for c in cols))
    return "\n".join(lines)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("results")
    ap.add_argument("--metrics", nargs="+", default=["f1_per_slot", "f2_per_slot", "f3_per_slot", "reward"])
    args = ap.parse_args(argv)
    with open(Path(args.results) / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    for m in args.metrics:
        print(table(rows, m), end="\n\n")


if __name__ == "__main__":
    main()
