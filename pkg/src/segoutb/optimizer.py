"""SEGO and SEGO-UTB outer loops."""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import problems as pb
from .acquisition import compute_scale, wb2s_from_moments
from .feasibility import Schedule, TrustRegionSpec, schedule_value
from .gp import GpConfig, SingularCorrelation, fit
from .history import EvalRecord, RunHistory
from .subsolver import SubSolveConfig, maximize

log = logging.getLogger(__name__)

MODES = ("SEGO", "SEGO-UTB")
DUPLICATE_RADIUS = 1e-9
PERTURB_RADIUS = 1e-6

# stream identifiers for seed derivation
_DOE, _GP, _SCALE, _SUB, _PERTURB = range(5)


def n_start_for(d: int) -> int:
    return max(d + 1, 5)


@dataclass(frozen=True)
class SolverConfig:
    mode: str = "SEGO-UTB"
    schedule: Schedule = field(default_factory=Schedule)
    budget: int | None = None             # default 40 d
    n_start: int | None = None            # default max(d + 1, 5)
    eps_c: float = 1e-2
    gp: GpConfig = field(default_factory=GpConfig)
    subsolver: SubSolveConfig = field(default_factory=SubSolveConfig)
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.eps_c <= 0:
            raise ValueError("eps_c must be positive")
        if self.budget is not None and self.n_start is not None and self.budget <= self.n_start:
            raise ValueError("budget must exceed n_start")

    def resolved(self, d: int) -> "SolverConfig":
        budget = self.budget if self.budget is not None else 40 * d
        n_start = self.n_start if self.n_start is not None else n_start_for(d)
        if budget <= n_start:
            raise ValueError("budget must exceed n_start")
        return dataclasses.replace(self, budget=budget, n_start=n_start)

    def snapshot(self) -> dict:
        return {
            "mode": self.mode,
            "schedule": dataclasses.asdict(self.schedule),
            "budget": self.budget,
            "n_start": self.n_start,
            "eps_c": self.eps_c,
            "gp": {**dataclasses.asdict(self.gp), "theta_bounds": list(self.gp.theta_bounds)},
            "subsolver": dataclasses.asdict(self.subsolver),
            "seed": self.seed,
        }

    @classmethod
    def from_snapshot(cls, snap: dict) -> "SolverConfig":
        gp_cfg = dict(snap.get("gp", {}))
        if "theta_bounds" in gp_cfg:
            gp_cfg["theta_bounds"] = tuple(gp_cfg["theta_bounds"])
        return cls(mode=snap["mode"], schedule=Schedule(**snap["schedule"]),
                   budget=snap.get("budget"), n_start=snap.get("n_start"),
                   eps_c=snap.get("eps_c", 1e-2), gp=GpConfig(**gp_cfg),
                   subsolver=SubSolveConfig(**snap.get("subsolver", {})), seed=snap.get("seed", 0))


@dataclass(frozen=True)
class Report:
    index: int
    x: np.ndarray
    f: float
    violation: float
    feasible: bool


def _rng(seed, *stream):
    return np.random.default_rng(np.random.SeedSequence([seed, *stream]))


def initial_doe(bounds: pb.Bounds, n: int, rng) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    u = qmc.LatinHypercube(d=bounds.dim, seed=np.random.default_rng(rng)).random(n)
    return bounds.from_unit(u)


def incumbent_value(f, violations, eps_c) -> float:
    """Best feasible objective, or the objective of the least violating point."""
    f = np.asarray(f)
    violations = np.asarray(violations)
    ok = violations <= eps_c
    if np.any(ok):
        return float(np.min(f[ok]))
    return float(f[int(np.argmin(violations))])


def learning_rates(cfg: SolverConfig, l: int, L: int, m: int, p: int):
    if cfg.mode == "SEGO":
        return np.zeros(m), np.zeros(p)
    tau = schedule_value(cfg.schedule, l, L)
    return np.full(m, tau), np.full(p, tau)


def _record(index, ev, **extra):
    return EvalRecord(index=index, x=tuple(float(v) for v in ev.x), f=float(ev.f),
                      g=tuple(float(v) for v in ev.g), h=tuple(float(v) for v in ev.h), **extra)


def _deduplicate(x, X, bounds, rng):
    U = bounds.to_unit(X)
    u = bounds.to_unit(x)
    if np.min(np.linalg.norm(U - u, axis=1)) > DUPLICATE_RADIUS:
        return x
    step = rng.uniform(-PERTURB_RADIUS, PERTURB_RADIUS, size=u.size)
    return bounds.from_unit(np.clip(u + step, 0.0, 1.0))


def run(problem, cfg: SolverConfig, on_record=None, solver: str = "") -> RunHistory:
    """Run one optimization; ``on_record`` receives each evaluation as it happens."""
    problem = pb.get_problem(problem) if isinstance(problem, str) else problem
    bounds = problem.bounds
    cfg = cfg.resolved(problem.dim)
    max_it = cfg.budget - cfg.n_start
    history = RunHistory(problem=problem.name, seed=cfg.seed, config=cfg.snapshot(), solver=solver)

    def push(rec):
        history.records.append(rec)
        if on_record is not None:
            on_record(rec)

    for x in initial_doe(bounds, cfg.n_start, _rng(cfg.seed, _DOE)):
        push(_record(len(history.records), pb.evaluate(problem, x)))

    for l in range(max_it):
        X = history.X
        F = history.f
        G = np.array([r.g for r in history.records], dtype=float).reshape(len(X), problem.m)
        H = np.array([r.h for r in history.records], dtype=float).reshape(len(X), problem.p)
        try:
            gp_f = fit(X, F, cfg.gp, _rng(cfg.seed, _GP, l, 0), bounds=bounds)
            gp_g = [fit(X, G[:, i], cfg.gp, _rng(cfg.seed, _GP, l, 1 + i), bounds=bounds)
                    for i in range(problem.m)]
            gp_h = [fit(X, H[:, j], cfg.gp, _rng(cfg.seed, _GP, l, 1 + problem.m + j), bounds=bounds)
                    for j in range(problem.p)]
        except SingularCorrelation as exc:
            history.status = "aborted"
            history.message = f"iteration {l}: {exc}"
            log.warning("%s seed %d aborted: %s", problem.name, cfg.seed, exc)
            return history

        tau_g, tau_h = learning_rates(cfg, l, max_it, problem.m, problem.p)
        spec = TrustRegionSpec(gp_g, gp_h, tau_g, tau_h)
        f_min = incumbent_value(F, history.violations, cfg.eps_c)
        scale = compute_scale(gp_f, bounds, f_min, _rng(cfg.seed, _SCALE, l))

        def acq(Xq, gp_f=gp_f, f_min=f_min, scale=scale):
            mean, std = gp_f.predict(np.atleast_2d(Xq))
            return wb2s_from_moments(mean, std, f_min, scale)

        cand = maximize(acq, spec, bounds, cfg.subsolver, _rng(cfg.seed, _SUB, l))
        x_new = _deduplicate(np.clip(cand.x, bounds.lower, bounds.upper), X, bounds,
                             _rng(cfg.seed, _PERTURB, l))
        ev = pb.evaluate(problem, x_new)
        push(_record(len(history.records), ev, iteration=l,
                     trust_feasible=bool(cand.trust_violation <= cfg.subsolver.feas_tol),
                     tau_g=tuple(tau_g.tolist()), tau_h=tuple(tau_h.tolist()),
                     scale=float(scale), acq=float(cand.acq),
                     trust_violation=float(cand.trust_violation)))

    history.status = "complete"
    return history


def best_point(history: RunHistory, eps_c: float) -> Report:
    if not history.records:
        raise ValueError("empty history")
    f = history.f
    viol = history.violations
    ok = np.flatnonzero(viol <= eps_c)
    if ok.size:
        k = int(ok[np.argmin(f[ok])])   # argmin returns the earliest on ties
    else:
        k = int(np.argmin(viol))
    return Report(index=k, x=np.array(history.records[k].x), f=float(f[k]),
                  violation=float(viol[k]), feasible=bool(viol[k] <= eps_c))
