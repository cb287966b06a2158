"""Experiment runner: config resolution, sweeps, CSV emission and summaries.

Result files per (config, seed) cell, all comma-delimited UTF-8 with a header row:

``{config}__seed{K}__metrics.csv``
    episode, slots, reward, train_reward, f1, f2, f3, violation_rate,
    critic_loss, actor_loss, sigma  (one row per training episode)
``{config}__seed{K}__eval.csv``
    episode, reward, f1, f2, f3, violation_rate  (noise-free rollouts of the final policy)
``{config}__seed{K}__trajectory.csv``
    t, x, y, z  (UAV path of the first evaluation episode, t = 0 is the start)

Checkpoints go to ``checkpoints/{config}__seed{K}.json`` below the output directory.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import re
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import agents, nn
from .env import Scenario, dbm_to_watts, desk_scenario, paper_scenario

log = logging.getLogger(__name__)

SWEEP_AXES = ("none", "p_max_dbm", "z_r", "M", "uav_start")
METRIC_FIELDS = ["episode", "slots", "reward", "train_reward", "f1", "f2", "f3", "violation_rate",
                 "critic_loss", "actor_loss", "sigma"]
EVAL_FIELDS = ["episode", "reward", "f1", "f2", "f3", "violation_rate"]
TRAJ_FIELDS = ["t", "x", "y", "z"]
FILE_RE = re.compile(r"^(?P<config>.+)__seed(?P<seed>-?\d+)__(?P<kind>metrics|eval|trajectory)\.csv$")

# Desk-profile overrides on top of AgentConfig defaults; see README for the rationale.
DESK_AGENT = dict(hidden=(128, 128), c2=2.0)


class NoResultsError(ValueError):
    pass


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def build_scenario(overrides: dict | None = None, paper_scale: bool = False) -> Scenario:
    """Profile scenario with JSON-style overrides applied on top."""
    overrides = dict(overrides or {})
    base = (paper_scenario() if paper_scale else desk_scenario()).to_dict()
    if "n_users" in overrides or "layout_seed" in overrides:
        # regenerate the cluster unless positions are given explicitly
        base.pop("users")
        base.pop("target")
        overrides.setdefault("n_users", 3 if paper_scale else 2)
    base.update(overrides)
    return Scenario.from_dict(base)


def build_agent(overrides: dict | None = None, paper_scale: bool = False) -> agents.AgentConfig:
    overrides = dict(overrides or {})
    if paper_scale:
        base = agents.paper_agent().to_dict()
    else:
        base = agents.desk_agent(**DESK_AGENT).to_dict()
    base.update(overrides)
    return agents.AgentConfig.from_dict(base)


def apply_sweep(sc: Scenario, axis: str, value) -> Scenario:
    if axis == "none":
        return sc
    d = sc.to_dict()
    if axis == "p_max_dbm":
        d["P_max"] = dbm_to_watts(float(value))
    elif axis == "z_r":
        d["z_r"] = float(value)
    elif axis == "M":
        if int(value) != value:
            raise ValueError(f"M must be an integer, got {value!r}")
        d["M"] = int(value)
    elif axis == "uav_start":
        d["uav_start"] = list(value)
    else:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    return Scenario.from_dict(d)


def _fmt_value(v) -> str:
    if isinstance(v, (list, tuple)):
        return "_".join(_fmt_value(x) for x in v)
    if isinstance(v, float) and v.is_integer():
        v = int(v)
    return str(v).replace("-", "m")


@dataclass
class ExperimentSpec:
    out_dir: str
    name: str = "run"
    scenario: dict = field(default_factory=dict)
    agent: dict = field(default_factory=dict)
    sweep_axis: str = "none"
    sweep_values: list = field(default_factory=list)
    seeds: list = field(default_factory=lambda: [0])
    paper_scale: bool = False
    workers: int = 1
    checkpoints: bool = True

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        self.seeds = [int(s) for s in self.seeds]
        if self.sweep_axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {self.sweep_axis!r}; choose from {SWEEP_AXES}")
        if self.sweep_axis == "none":
            if self.sweep_values:
                raise ValueError("sweep values given without a sweep axis")
        elif not self.sweep_values:
            raise ValueError(f"sweep axis {self.sweep_axis!r} needs at least one value")
        if not re.fullmatch(r"[A-Za-z0-9_.=-]+", self.name) or "__" in self.name:
            raise ValueError(f"invalid experiment name {self.name!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @classmethod
    def from_dict(cls, d: dict, **overrides) -> "ExperimentSpec":
        d = {**d, **{k: v for k, v in overrides.items() if v is not None}}
        sweep = d.pop("sweep", None)
        if sweep is not None:
            d["sweep_axis"] = sweep.get("axis", "none")
            d["sweep_values"] = list(sweep.get("values", []))
        if "out" in d:
            d.setdefault("out_dir", d.pop("out"))
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
        if "out_dir" not in d:
            raise ValueError("no output directory given")
        return cls(**d)

    def cells(self) -> list[tuple[str, Scenario, agents.AgentConfig, int]]:
        """All (config name, scenario, agent config, seed) cells; validates every value up front."""
        base = build_scenario(self.scenario, self.paper_scale)
        cfg = build_agent(self.agent, self.paper_scale)
        values = self.sweep_values if self.sweep_axis != "none" else [None]
        out = []
        for v in values:
            sc = apply_sweep(base, self.sweep_axis, v)
            label = self.name if v is None else f"{self.name}__{self.sweep_axis}={_fmt_value(v)}"
            out.extend((label, sc, cfg, seed) for seed in self.seeds)
        return out


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------

def _write_csv(path: Path, fields: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})


def run_cell(label: str, sc: Scenario, cfg: agents.AgentConfig, seed: int, out_dir, checkpoints: bool = True) -> list[Path]:
    """Train, evaluate and write the three CSVs for one (config, seed) cell."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{label}__seed{seed}"
    log.info("training %s", stem)
    report, trainer = agents.train(sc, cfg, seed)
    rows = [{**r, "slots": sc.T} for r in report.episodes]
    eval_rows, traj = agents.evaluate(trainer, cfg.eval_episodes, seed)
    paths = [out / f"{stem}__metrics.csv", out / f"{stem}__eval.csv", out / f"{stem}__trajectory.csv"]
    _write_csv(paths[0], METRIC_FIELDS, rows)
    _write_csv(paths[1], EVAL_FIELDS, eval_rows)
    _write_csv(paths[2], TRAJ_FIELDS, traj)
    if checkpoints and report.actor_spec is not None:
        ck = out / "checkpoints"
        ck.mkdir(exist_ok=True)
        report.save_checkpoint(ck / f"{stem}.json")
    return paths


def _run_cell_args(args):
    return run_cell(*args)


def run_experiment(spec: ExperimentSpec) -> list[Path]:
    cells = spec.cells()
    jobs = [(label, sc, cfg, seed, spec.out_dir, spec.checkpoints) for label, sc, cfg, seed in cells]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_cell_args, jobs))
    else:
        results = [_run_cell_args(j) for j in jobs]
    return [p for ps in results for p in ps]


def evaluate_checkpoint(path, out_dir, episodes: int = 10, seed: int = 0, label: str | None = None) -> list[Path]:
    """Re-run the noise-free evaluation of a saved policy and write eval/trajectory CSVs."""
    nets, meta = nn.load_checkpoint(path)
    if "agent" not in meta or "scenario" not in meta:
        raise ValueError(f"{path}: checkpoint lacks agent/scenario metadata")
    sc = Scenario.from_dict(meta["scenario"])
    cfg = agents.AgentConfig.from_dict(meta["agent"])
    trainer = agents.Trainer(sc, cfg, int(meta.get("seed", seed)))
    spec, params = nets["actor"]
    if spec != trainer.actor.spec:
        raise ValueError(f"{path}: actor shape does not match its recorded config")
    trainer.actor.params = params
    rows, traj = agents.evaluate(trainer, episodes, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{label or Path(path).stem}__seed{seed}"
    paths = [out / f"{stem}__eval.csv", out / f"{stem}__trajectory.csv"]
    _write_csv(paths[0], EVAL_FIELDS, rows)
    _write_csv(paths[1], TRAJ_FIELDS, traj)
    return paths


# --------------------------------------------------------------------------
# summaries
# --------------------------------------------------------------------------

def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def tail_means(rows: list[dict], frac: float = 0.1) -> dict:
    """Per-run means over the last ``frac`` of episodes (at least one)."""
    n = max(1, math.ceil(frac * len(rows)))
    tail = rows[-n:]
    T = tail[0]["slots"]
    return {
        "reward": float(np.mean([r["reward"] for r in tail])),
        "f1_per_slot": float(np.mean([r["f1"] for r in tail])) / T,
        "f2_per_slot": float(np.mean([r["f2"] for r in tail])) / T,
        "f3_per_slot": float(np.mean([r["f3"] for r in tail])) / T,
        "violation_rate": float(np.mean([r["violation_rate"] for r in tail])),
    }


SUMMARY_METRICS = ["reward", "f1_per_slot", "f2_per_slot", "f3_per_slot", "violation_rate",
                   "eval_reward", "eval_violation_rate"]


def collect(result_dir) -> dict[str, dict[int, dict[str, Path]]]:
    found: dict[str, dict[int, dict[str, Path]]] = defaultdict(lambda: defaultdict(dict))
    for p in sorted(Path(result_dir).glob("*.csv")):
        m = FILE_RE.match(p.name)
        if m:
            found[m["config"]][int(m["seed"])][m["kind"]] = p
    return found


def summarize(result_dir, out_dir=None) -> tuple[Path, Path]:
    """Write ``summary.csv`` (one row per config) and long-format ``curves.csv``."""
    found = collect(result_dir)
    found = {c: s for c, s in found.items() if any("metrics" in k for k in s.values())}
    if not found:
        raise NoResultsError(f"no results in {result_dir}")
    out = Path(out_dir or result_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary, curves = [], []
    for config in sorted(found):
        per_seed = []
        for seed in sorted(found[config]):
            files = found[config][seed]
            if "metrics" not in files:
                continue
            rows = _read_csv(files["metrics"])
            vals = tail_means(rows)
            if "eval" in files:
                ev = _read_csv(files["eval"])
                vals["eval_reward"] = float(np.mean([r["reward"] for r in ev]))
                vals["eval_violation_rate"] = float(np.mean([r["violation_rate"] for r in ev]))
            else:
                vals["eval_reward"] = vals["eval_violation_rate"] = float("nan")
            per_seed.append(vals)
            for r in rows:
                for k in ("reward", "f1", "f2", "f3", "violation_rate"):
                    curves.append({"config": config, "seed": seed, "episode": int(r["episode"]),
                                   "metric": k, "value": r[k]})
        row = {"config": config, "n_seeds": len(per_seed)}
        for k in SUMMARY_METRICS:
            xs = np.array([v[k] for v in per_seed])
            row[f"{k}_mean"] = float(xs.mean())
            row[f"{k}_std"] = float(xs.std())  # population std over seeds
        summary.append(row)
    fields = ["config", "n_seeds"] + [f"{k}_{s}" for k in SUMMARY_METRICS for s in ("mean", "std")]
    s_path, c_path = out / "summary.csv", out / "curves.csv"
    _write_csv(s_path, fields, summary)
    _write_csv(c_path, ["config", "seed", "episode", "metric", "value"], curves)
    return s_path, c_path


def load_experiment(path, **overrides) -> ExperimentSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return ExperimentSpec.from_dict(doc, **overrides)
