"""Experiment grids: (problem x strategy x seed) cells persisted as CSV files.

Each cell is written atomically to ``<out>/cells/<problem>__<name>__seed<k>.csv``
with one row per evaluation. A cell file that exists and parses completely
counts as done; a damaged one is moved to ``<out>/quarantine`` and the cell
is run again. ``summary.json`` is rebuilt from the cell files after every
run, so reruns with the same configuration produce identical bytes.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import os
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .loop import BOConfig, run
from .problems import PROBLEMS, get_problem, make_blackbox

log = logging.getLogger(__name__)

COLUMNS = ["run_id", "problem", "strategy", "seed", "iteration", "x", "z_y", "z_c", "best_feasible"]
_BO_FIELDS = {f.name for f in dataclasses.fields(BOConfig)}


class ConfigError(ValueError):
    """Invalid or unreadable suite configuration."""


@dataclass(frozen=True)
class StrategySpec:
    name: str
    config: BOConfig


@dataclass(frozen=True)
class SuiteConfig:
    problems: tuple
    strategies: tuple
    seeds: tuple
    budget: int = 50
    n_init: int = 5
    feedback: str = "binary_unobserved"

    def cells(self):
        for problem in self.problems:
            for spec in self.strategies:
                for seed in self.seeds:
                    yield problem, spec, seed


def parse_config(doc: dict) -> SuiteConfig:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(doc) - {"problems", "strategies", "seeds", "budget", "n_init", "feedback"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    problems = tuple(doc.get("problems") or ())
    for p in problems:
        if p not in PROBLEMS:
            raise ConfigError(f"unknown problem {p!r}; choose from {sorted(PROBLEMS)}")
    seeds = doc.get("seeds", ())
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        seeds = tuple(range(seeds))
    try:
        seeds = tuple(int(s) for s in (seeds or ()))
    except (TypeError, ValueError):
        raise ConfigError("seeds must be a count or a list of integers") from None
    budget, n_init = doc.get("budget", 50), doc.get("n_init", 5)
    if not (isinstance(budget, int) and isinstance(n_init, int) and 0 <= n_init <= budget and budget >= 1):
        raise ConfigError("need integers 0 <= n_init <= budget and budget >= 1")
    feedback = doc.get("feedback", "binary_unobserved")
    specs, names = [], set()
    for i, entry in enumerate(doc.get("strategies") or ()):
        if isinstance(entry, str):
            entry = {"strategy": entry}
        if not isinstance(entry, dict) or "strategy" not in entry:
            raise ConfigError(f"strategy entry {i} needs a 'strategy' field")
        entry = dict(entry)
        name = str(entry.pop("name", entry["strategy"]))
        if name in names or "__" in name or "/" in name:
            raise ConfigError(f"strategy name {name!r} is duplicated or contains '__' or '/'")
        names.add(name)
        bad = set(entry) - _BO_FIELDS
        if bad:
            raise ConfigError(f"unknown parameters for {name!r}: {sorted(bad)}")
        entry.setdefault("feedback", feedback)
        try:
            specs.append(StrategySpec(name, BOConfig(**entry)))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"strategy {name!r}: {e}") from None
    return SuiteConfig(problems, tuple(specs), seeds, budget, n_init, feedback)


def load_config(path) -> SuiteConfig:
    try:
        with open(path) as f:
            doc = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"config is not valid YAML: {e}") from None
    return parse_config(doc)


def _fmt(v):
    return "" if v is None else repr(float(v))


def cell_path(out_dir, problem, name, seed) -> Path:
    return Path(out_dir) / "cells" / f"{problem}__{name}__seed{seed}.csv"


def _cell_rows(problem, name, seed, traj):
    run_id = f"{problem}/{name}/{seed}"
    for o, best in zip(traj.observations, traj.best_feasible):
        x = json.dumps([v if isinstance(v, str) else (int(v) if isinstance(v, int) else float(v))
                        for v in o.x])
        yield [run_id, problem, name, seed, o.iteration, x, _fmt(o.z_y), _fmt(o.z_c), _fmt(best)]


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_cell(path, budget: int | None = None) -> list:
    """Parse a cell file; raises ValueError if it is incomplete or malformed."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != COLUMNS:
        raise ValueError("missing or wrong header")
    out = []
    for i, r in enumerate(rows[1:]):
        if len(r) != len(COLUMNS):
            raise ValueError(f"row {i} has {len(r)} fields")
        rec = dict(zip(COLUMNS, r))
        if int(rec["iteration"]) != i:
            raise ValueError("iterations out of order")
        rec["seed"] = int(rec["seed"])
        rec["iteration"] = i
        rec["x"] = json.loads(rec["x"])
        for k in ("z_y", "best_feasible"):
            rec[k] = None if rec[k] == "" else float(rec[k])
        rec["z_c"] = float(rec["z_c"])
        out.append(rec)
    if budget is not None and len(out) != budget:
        raise ValueError(f"expected {budget} rows, found {len(out)}")
    return out


def run_cell(problem: str, spec: StrategySpec, seed: int, budget: int, n_init: int, out_dir) -> int:
    """Run one cell and commit its file; returns the number of evaluations."""
    prob = get_problem(problem)
    calls = 0
    bb = make_blackbox(prob, spec.config.feedback)

    def counted(x):
        nonlocal calls
        calls += 1
        return bb(x)

    traj = run(counted, prob.space, spec.config, budget, n_init=n_init, seed=seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    w.writerows(_cell_rows(problem, spec.name, seed, traj))
    _atomic_write(cell_path(out_dir, problem, spec.name, seed), buf.getvalue())
    return calls


def _run_job(args):
    return run_cell(*args)


@dataclass
class SuiteResult:
    evaluations: int = 0
    executed: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    quarantined: list = field(default_factory=list)


def _quarantine(path: Path, out_dir: Path, reason: str) -> Path:
    qdir = Path(out_dir) / "quarantine"
    qdir.mkdir(parents=True, exist_ok=True)
    target = qdir / path.name
    k = 1
    while target.exists():
        target = qdir / f"{path.stem}.{k}{path.suffix}"
        k += 1
    shutil.move(str(path), target)
    log.warning("quarantined damaged results file %s (%s)", path, reason)
    return target


def run_suite(config: SuiteConfig, out_dir, workers: int = 1, resume: bool = True) -> SuiteResult:
    """Execute every cell of the grid not already completed in ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = SuiteResult()
    jobs = []
    for problem, spec, seed in config.cells():
        path = cell_path(out_dir, problem, spec.name, seed)
        if path.exists():
            try:
                read_cell(path, config.budget)
                if resume:
                    result.skipped.append(path.name)
                    continue
            except (ValueError, json.JSONDecodeError, csv.Error) as e:
                result.quarantined.append(str(_quarantine(path, out_dir, str(e))))
        jobs.append((problem, spec, seed, config.budget, config.n_init, out_dir))

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(_run_job, jobs))
    else:
        counts = [_run_job(j) for j in jobs]
    result.evaluations = sum(counts)
    result.executed = [cell_path(out_dir, j[0], j[1].name, j[2]).name for j in jobs]
    write_summary(config, out_dir)
    return result


def _config_dict(config: SuiteConfig) -> dict:
    return {
        "problems": list(config.problems), "seeds": list(config.seeds), "budget": config.budget,
        "n_init": config.n_init, "feedback": config.feedback,
        "strategies": [{"name": s.name, **dataclasses.asdict(s.config)} for s in config.strategies],
    }


def write_summary(config: SuiteConfig, out_dir):
    cells = []
    for problem, spec, seed in config.cells():
        rows = read_cell(cell_path(out_dir, problem, spec.name, seed), config.budget)
        cells.append({
            "run_id": f"{problem}/{spec.name}/{seed}", "problem": problem, "strategy": spec.name,
            "seed": seed, "evaluations": len(rows),
            "feasible": sum(1 for r in rows if _is_feasible(r, spec.config)),
            "final_best": rows[-1]["best_feasible"] if rows else None,
        })
    doc = {"config": _config_dict(config), "cells": cells}
    _atomic_write(Path(out_dir) / "summary.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _is_feasible(row, cfg: BOConfig) -> bool:
    return row["z_c"] == -1 if cfg.binary else row["z_c"] <= cfg.delta


def load_results(out_dir) -> dict:
    """``{problem: {strategy: {seed: best_feasible curve}}}`` from the cell files."""
    out = {}
    cdir = Path(out_dir) / "cells"
    if not cdir.is_dir():
        raise FileNotFoundError(f"no cells directory under {out_dir}")
    for path in sorted(cdir.glob("*.csv")):
        rows = read_cell(path)
        if not rows:
            continue
        r0 = rows[0]
        out.setdefault(r0["problem"], {}).setdefault(r0["strategy"], {})[r0["seed"]] = \
            [r["best_feasible"] for r in rows]
    return out
