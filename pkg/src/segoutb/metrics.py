"""Convergence traces and constraint-aware data profiles."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .history import RunHistory
from .problems import get_problem

PROFILE_EPS = 1e-3
KAPPA_GRID = np.arange(0.0, 40.0 + 0.25, 0.5)


class LengthMismatch(ValueError):
    pass


def best_valid_trace(history: RunHistory, problem, eps_c: float, penalty: float | None = None) -> np.ndarray:
    """Running best feasible objective, or the problem's penalty before the first feasible point."""
    if penalty is None:
        problem = get_problem(problem) if isinstance(problem, str) else problem
        penalty = problem.penalty
    f = history.f
    ok = history.violations <= eps_c
    vals = np.where(ok, f, np.inf)
    trace = np.minimum.accumulate(vals) if vals.size else vals
    return np.where(np.isfinite(trace), trace, penalty)


def convergence_aggregate(traces):
    traces = [np.asarray(t, dtype=float) for t in traces]
    if not traces:
        raise LengthMismatch("no traces to aggregate")
    if len({t.size for t in traces}) != 1:
        raise LengthMismatch("traces have different lengths")
    arr = np.vstack(traces)
    return arr.mean(axis=0), arr.std(axis=0)


def convergence_test(f_tilde: float, f_opt: float, eps: float) -> bool:
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    if not np.isfinite(f_tilde):
        return False
    return bool(f_tilde - f_opt <= eps * (abs(f_opt) + 1.0))


def evaluations_to_solve(history: RunHistory, f_opt: float, eps: float, eps_c: float) -> float:
    """1-based index of the first evaluation passing the convergence test, inf if none."""
    f = history.f
    ok = history.violations <= eps_c
    f_tilde = np.where(ok, f, np.inf)
    passed = np.flatnonzero(np.isfinite(f_tilde) & (f_tilde - f_opt <= eps * (abs(f_opt) + 1.0)))
    return float(passed[0] + 1) if passed.size else np.inf


def f_opt_table(histories_by_problem: dict, eps_c: float) -> dict:
    """Best feasible objective per problem over every run; problems never solved feasibly are omitted."""
    table = {}
    for name, runs in histories_by_problem.items():
        best = np.inf
        for h in runs:
            ok = h.violations <= eps_c
            if np.any(ok):
                best = min(best, float(np.min(h.f[ok])))
        if np.isfinite(best):
            table[name] = best
    return table


@dataclass
class DataProfileResult:
    kappa: np.ndarray
    curves: dict            # solver -> fraction solved per kappa
    t: np.ndarray           # (instances, solvers)
    dims: np.ndarray        # (instances,)
    solvers: list
    instances: list


def data_profile(t, dims, kappa=KAPPA_GRID, solvers=None, instances=None) -> DataProfileResult:
    t = np.asarray(t, dtype=float)
    dims = np.asarray(dims, dtype=float).reshape(-1)
    if t.ndim != 2 or t.shape[0] != dims.size:
        raise ValueError("t must be (instances, solvers) aligned with dims")
    kappa = np.asarray(kappa, dtype=float)
    ratio = t / dims[:, None]
    n_inst = max(t.shape[0], 1)
    frac = (ratio[None, :, :] <= kappa[:, None, None]).sum(axis=1) / n_inst
    solvers = list(solvers) if solvers is not None else [f"s{k}" for k in range(t.shape[1])]
    curves = {s: frac[:, k] for k, s in enumerate(solvers)}
    return DataProfileResult(kappa=kappa, curves=curves, t=t, dims=dims, solvers=solvers,
                             instances=list(instances) if instances is not None else [])


# --- CSV emitters ----------------------------------------------------------

def _fmt(v):
    return repr(float(v))


def convergence_csv(stats: dict) -> str:
    """``stats`` maps solver -> (mean, std)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    solvers = list(stats)
    w.writerow(["eval_index"] + [c for s in solvers for c in (f"{s}_mean", f"{s}_std")])
    n = len(next(iter(stats.values()))[0]) if stats else 0
    for i in range(n):
        row = [i + 1]
        for s in solvers:
            mean, std = stats[s]
            row += [_fmt(mean[i]), _fmt(std[i])]
        w.writerow(row)
    return buf.getvalue()


def parse_convergence_csv(text: str) -> dict:
    rows = list(csv.reader(io.StringIO(text)))
    head = rows[0]
    solvers = [c[:-5] for c in head[1::2]]
    out = {}
    for k, s in enumerate(solvers):
        mean = np.array([float(r[1 + 2 * k]) for r in rows[1:]])
        std = np.array([float(r[2 + 2 * k]) for r in rows[1:]])
        out[s] = (mean, std)
    return out


def profile_csv(result: DataProfileResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kappa"] + result.solvers)
    for i, k in enumerate(result.kappa):
        w.writerow([_fmt(k)] + [_fmt(result.curves[s][i]) for s in result.solvers])
    return buf.getvalue()


def parse_profile_csv(text: str):
    rows = list(csv.reader(io.StringIO(text)))
    solvers = rows[0][1:]
    kappa = np.array([float(r[0]) for r in rows[1:]])
    curves = {s: np.array([float(r[1 + k]) for r in rows[1:]]) for k, s in enumerate(solvers)}
    return kappa, curves


def t_table_csv(result: DataProfileResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["instance", "d"] + result.solvers)
    for i, inst in enumerate(result.instances):
        w.writerow([inst, int(result.dims[i])] + [_fmt(v) for v in result.t[i]])
    return buf.getvalue()


def parse_t_table_csv(text: str):
    rows = list(csv.reader(io.StringIO(text)))
    solvers = rows[0][2:]
    instances = [r[0] for r in rows[1:]]
    dims = np.array([int(r[1]) for r in rows[1:]], dtype=float)
    t = np.array([[float(v) for v in r[2:]] for r in rows[1:]], dtype=float).reshape(len(rows) - 1, len(solvers))
    return instances, dims, solvers, t
