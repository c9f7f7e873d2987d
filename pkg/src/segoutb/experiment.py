"""Experiment matrices: configuration, cell execution and metric aggregation."""
from __future__ import annotations

import dataclasses
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import metrics
from . import problems as pb
from .feasibility import Schedule
from .gp import GpConfig
from .history import HistoryWriter, RunHistory
from .optimizer import SolverConfig, run
from .subsolver import SubSolveConfig

log = logging.getLogger(__name__)

OUT_ENV = "SEGOUTB_OUT"
MANIFEST = "manifest.json"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolverSpec:
    """A named solver template; the seed is filled in per cell."""
    name: str
    mode: str = "SEGO-UTB"
    schedule: str = "Cst"
    tau_max: float = 3.0
    kappa: float | None = None
    overrides: dict = field(default_factory=dict)

    def build(self, seed: int, eps_c: float) -> SolverConfig:
        ov = dict(self.overrides)
        gp_cfg = ov.pop("gp", {}) or {}
        sub_cfg = ov.pop("subsolver", {}) or {}
        if "theta_bounds" in gp_cfg:
            gp_cfg = {**gp_cfg, "theta_bounds": tuple(float(v) for v in gp_cfg["theta_bounds"])}
        unknown = set(ov) - {"budget", "n_start"}
        if unknown:
            raise ConfigError(f"solver {self.name}: unknown overrides {sorted(unknown)}")
        try:
            return SolverConfig(mode=self.mode,
                                schedule=Schedule(self.schedule, tau_max=self.tau_max, kappa=self.kappa),
                                budget=ov.get("budget"), n_start=ov.get("n_start"), eps_c=eps_c,
                                gp=GpConfig(**gp_cfg), subsolver=SubSolveConfig(**sub_cfg), seed=seed)
        except TypeError as exc:
            raise ConfigError(f"solver {self.name}: {exc}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    problems: list
    solvers: list            # of SolverSpec
    seeds: list
    eps_c: list = field(default_factory=lambda: [1e-2, 1e-4])
    output: str = "runs"
    workers: int | None = None

    def __post_init__(self):
        if not self.problems or not self.solvers or not self.seeds:
            raise ConfigError("problems, solvers and seeds must be non-empty")
        names = [s.name for s in self.solvers]
        if len(set(names)) != len(names):
            raise ConfigError("solver names must be unique")
        for s in names:
            if "__" in s or "/" in s:
                raise ConfigError(f"solver name {s!r} may not contain '__' or '/'")
        for p in self.problems:
            prob = pb.get_problem(p)
            if not prob.executable:
                raise ConfigError(f"problem {p} has no executable definition")
        if any(e <= 0 for e in self.eps_c):
            raise ConfigError("eps_c values must be positive")

    @property
    def run_eps_c(self) -> float:
        # the loop's incumbent uses the loosest tolerance
        return max(self.eps_c)

    def cells(self):
        for p in self.problems:
            for s in self.solvers:
                for seed in self.seeds:
                    yield p, s, seed


def _float(v):
    # yaml 1.1 reads "1e-2" as a string
    return float(v)


def parse_config(data: dict, seed_offset: int = 0) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    solvers = []
    for k, entry in enumerate(data.get("solvers") or []):
        entry = dict(entry)
        mode = entry.pop("mode", "SEGO-UTB")
        schedule = str(entry.pop("schedule", "Cst"))
        name = entry.pop("name", None) or (mode if mode == "SEGO" else f"{mode}-{schedule}")
        tau_max = _float(entry.pop("tau_max", 3.0))
        kappa = entry.pop("kappa", None)
        overrides = entry.pop("overrides", {}) or {}
        if entry:
            raise ConfigError(f"solver {name}: unknown keys {sorted(entry)}")
        try:
            spec = SolverSpec(name=str(name), mode=mode, schedule=schedule, tau_max=tau_max,
                              kappa=None if kappa is None else _float(kappa), overrides=overrides)
            spec.build(0, 1e-2)  # validate early
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        solvers.append(spec)
    seeds = data.get("seeds", 1)
    seeds = list(range(int(seeds))) if isinstance(seeds, int) else [int(s) for s in seeds]
    seeds = [s + seed_offset for s in seeds]
    eps_c = [_float(e) for e in data.get("eps_c", [1e-2, 1e-4])]
    try:
        return ExperimentConfig(problems=[str(p) for p in data.get("problems") or []],
                                solvers=solvers, seeds=seeds, eps_c=eps_c,
                                output=str(data.get("output", "runs")),
                                workers=data.get("workers"))
    except pb.UnknownProblem as exc:
        raise ConfigError(f"unknown problem {exc}") from None


def load_config(path, seed_offset: int = 0) -> ExperimentConfig:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
    return parse_config(data, seed_offset)


def output_dir(cfg: ExperimentConfig, override=None) -> Path:
    return Path(override or os.environ.get(OUT_ENV) or cfg.output)


def cell_filename(problem: str, solver: str, seed: int) -> str:
    return f"{problem}__{solver}__seed{seed}.jsonl"


def _run_cell(args):
    problem, spec, seed, eps_c, path = args
    cfg = spec.build(seed, eps_c)
    path = Path(path)
    hist0 = RunHistory(problem=problem, seed=seed, config=cfg.resolved(pb.get_problem(problem).dim).snapshot(),
                       solver=spec.name)
    writer = HistoryWriter(path, hist0)
    try:
        history = run(problem, cfg, on_record=writer.append, solver=spec.name)
    except Exception as exc:
        writer._fh.close()
        return {"status": "error", "error": f"{type(exc).__name__}: {exc}", "n_evals": None}
    writer.close(history)
    return {"status": history.status, "error": history.message or None, "n_evals": len(history)}


def run_experiment(cfg: ExperimentConfig, out: Path, force: bool = False, workers: int | None = None):
    """Execute every cell; returns the manifest dict."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    workers = workers or cfg.workers or os.cpu_count() or 1
    cells, todo = [], []
    for problem, spec, seed in cfg.cells():
        fname = cell_filename(problem, spec.name, seed)
        cell = {"problem": problem, "solver": spec.name, "seed": seed, "file": fname}
        path = out / fname
        if path.exists() and not force:
            hist = RunHistory.load(path)
            cell.update(status=hist.status, error=hist.message or None, n_evals=len(hist))
        else:
            todo.append((len(cells), (problem, spec, seed, cfg.run_eps_c, str(path))))
        cells.append(cell)

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, [a for _, a in todo]))
    else:
        results = [_run_cell(a) for _, a in todo]
    for (k, _), res in zip(todo, results):
        cells[k].update(res)
        log.info("%s %s seed %s: %s", cells[k]["problem"], cells[k]["solver"], cells[k]["seed"],
                 res["status"])

    manifest = {"problems": cfg.problems, "solvers": [dataclasses.asdict(s) for s in cfg.solvers],
                "seeds": cfg.seeds, "eps_c": cfg.eps_c, "cells": cells}
    (out / MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest


# --- aggregation -----------------------------------------------------------

def load_histories(directory) -> list:
    """Every history in ``directory``; in-progress ``.part`` files are ignored."""
    return [RunHistory.load(p) for p in sorted(Path(directory).glob("*.jsonl"))]


def convergence_table(histories, problem: str, eps_c: float) -> dict:
    """solver -> (mean, std) of best-valid traces for one problem."""
    by_solver = {}
    for h in histories:
        if h.problem == problem:
            by_solver.setdefault(h.solver, []).append(h)
    if not by_solver:
        raise ValueError(f"no histories for problem {problem}")
    lengths = {len(h) for runs in by_solver.values() for h in runs}
    if len(lengths) != 1:
        raise metrics.LengthMismatch(f"mixed budgets for {problem}: {sorted(lengths)}")
    prob = pb.get_problem(problem)
    return {s: metrics.convergence_aggregate([metrics.best_valid_trace(h, prob, eps_c) for h in runs])
            for s, runs in sorted(by_solver.items())}


def profile_inputs(histories, eps: float, eps_c: float, f_opt: dict | None = None,
                   f_opt_eps_c: float | None = None):
    """Build the t table for (problem, seed) instances against every solver.

    ``f_opt`` defaults to the table at ``f_opt_eps_c`` (itself defaulting to ``eps_c``);
    instances whose problem has no f_opt are dropped.
    """
    bad = [h for h in histories if not h.complete]
    if bad:
        names = ", ".join(f"{h.problem}/{h.solver}/seed{h.seed}" for h in bad)
        raise metrics.LengthMismatch(f"truncated or aborted histories: {names}")
    by_problem = {}
    for h in histories:
        by_problem.setdefault(h.problem, []).append(h)
    if f_opt is None:
        f_opt = metrics.f_opt_table(by_problem, eps_c if f_opt_eps_c is None else f_opt_eps_c)
    solvers = sorted({h.solver for h in histories})
    cells = {(h.problem, h.seed, h.solver): h for h in histories}
    instances = sorted({(h.problem, h.seed) for h in histories if h.problem in f_opt})
    t = np.full((len(instances), len(solvers)), np.inf)
    dims = np.zeros(len(instances))
    for i, (p, seed) in enumerate(instances):
        dims[i] = pb.get_problem(p).dim
        for k, s in enumerate(solvers):
            h = cells.get((p, seed, s))
            if h is None:
                raise ValueError(f"missing cell {p}/{s}/seed{seed}")
            t[i, k] = metrics.evaluations_to_solve(h, f_opt[p], eps, eps_c)
    labels = [f"{p}/seed{seed}" for p, seed in instances]
    excluded = sorted(set(by_problem) - set(f_opt))
    return t, dims, solvers, labels, excluded


def profile(histories, eps: float, eps_c: float, f_opt: dict | None = None,
            f_opt_eps_c: float | None = None, kappa=metrics.KAPPA_GRID):
    t, dims, solvers, labels, excluded = profile_inputs(histories, eps, eps_c, f_opt, f_opt_eps_c)
    res = metrics.data_profile(t, dims, kappa, solvers=solvers, instances=labels)
    return res, excluded
