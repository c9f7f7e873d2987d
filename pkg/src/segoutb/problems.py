"""Benchmark problems with the internal convention g(x) >= 0, h(x) = 0.

Five problems are executable (MB, LSQ, GBSP, LAH, MBE). The remaining
entries of the 29-problem benchmark carry metadata only.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

PI = np.pi


class UnknownProblem(KeyError):
    pass


class OutOfBounds(ValueError):
    pass


@dataclass(frozen=True)
class Bounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        up = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.size == 0 or lo.shape != up.shape:
            raise ValueError("bounds need matching non-empty lower/upper vectors")
        if not np.all(lo < up):
            raise ValueError("lower must be strictly below upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def to_unit(self, x):
        return (np.asarray(x, dtype=float) - self.lower) / self.width

    def from_unit(self, u):
        return self.lower + np.asarray(u, dtype=float) * self.width

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


@dataclass(frozen=True)
class Evaluation:
    x: np.ndarray
    f: float
    g: np.ndarray
    h: np.ndarray


@dataclass(frozen=True)
class ProblemMeta:
    name: str
    d: int
    n_eq: int
    n_ineq: int
    klass: str
    ref_value: float


@dataclass(frozen=True)
class Problem:
    name: str
    bounds: Bounds
    objective: Callable[[np.ndarray], float] | None
    ineq: Callable[[np.ndarray], np.ndarray] | None
    eq: Callable[[np.ndarray], np.ndarray] | None
    m: int
    p: int
    ref_value: float
    klass: str
    penalty: float | None = None
    executable: bool = field(default=True)

    @property
    def dim(self) -> int:
        return self.bounds.dim

    @property
    def meta(self) -> ProblemMeta:
        return ProblemMeta(self.name, self.dim, self.p, self.m, self.klass, self.ref_value)


# --- objective functions -------------------------------------------------

def f_linear(x):
    return float(np.sum(x))


def f_goldstein_price_log(x):
    x1, x2 = x
    a = (75 - 56 * (x1 + x2) + 3 * (4 * x1 - 2) ** 2
         + 6 * (4 * x1 - 2) * (4 * x2 - 2) + 3 * (4 * x2 - 2) ** 2)
    b = (-14 - 128 * x1 + 12 * (4 * x1 - 2) ** 2 + 192 * x2
         - 36 * (4 * x1 - 2) * (4 * x2 - 2) + 27 * (4 * x2 - 2) ** 2)
    prod = (1 + a * (4 * x1 + 4 * x2 - 3) ** 2) * (30 + b * (8 * x1 - 12 * x2 + 2) ** 2)
    return float((np.log(prod) - 8.69) / 2.43)


def f_modified_branin(x):
    # Constant term is 10 (standard modified Branin); it places the
    # constrained optimum at 12.006, the tabulated reference.
    x1, x2 = x
    quad = (x2 - 5.1 * x1 ** 2 / (4 * PI ** 2) + 5 * x1 / PI - 6) ** 2
    return float(quad + 10 * (1 - 1 / (8 * PI)) * np.cos(x1) + 10 + (5 * x1 + 25) / 15)


# --- constraint functions (as written, before sign adaptation) -----------

def c_sinusoid(x):
    x1, x2 = x
    return 0.5 * np.sin(2 * PI * (x1 ** 2 - 2 * x2)) + x1 + 2 * x2 - 1.5


def c_quadratic(x):
    x1, x2 = x
    return -x1 ** 2 - x2 ** 2 + 1.5


def c_branin(x):
    x1, x2 = x
    u = 15 * x1 - 5
    return (15 - (15 * x2 - 5 / (4 * PI ** 2) * u ** 2 + 5 / PI * u - 6) ** 2
            - 10 * (1 - 1 / (8 * PI)) * np.cos(u))


def c_parr(x):
    x1, x2 = x
    u = 2 * x1 - 1
    v = 2 * x2 - 1
    return (4 - (4 - 2.1 * u ** 2 + u ** 4 / 3) * u ** 2 - u * v
            - 16 * (x2 ** 2 - x2) * v ** 2
            - 3 * np.sin(12 * (1 - x1)) - 3 * np.sin(12 * (1 - x2)))


def c_ackley(x):
    z = 3 * np.asarray(x) - 1
    return (20 * np.exp(-0.2 * np.sqrt(np.mean(z ** 2)))
            + np.exp(np.mean(np.cos(2 * PI * z))) - 17 - np.e)


# Rows index the input dimension, columns the four Hartman terms.
HARTMAN_A = np.array([
    [10.00, 0.05, 3.00, 17.00],
    [3.00, 10.00, 3.50, 8.00],
    [17.00, 17.00, 1.70, 0.05],
    [3.50, 0.10, 10.00, 10.00],
])
HARTMAN_P = np.array([
    [0.131, 0.232, 0.234, 0.404],
    [0.169, 0.413, 0.145, 0.882],
    [0.556, 0.830, 0.352, 0.873],
    [0.012, 0.373, 0.288, 0.574],
])
HARTMAN_C = np.array([1.0, 1.2, 3.0, 3.2])


def c_hartman(x):
    x = np.asarray(x, dtype=float)
    inner = np.sum(HARTMAN_A * (x[:, None] - HARTMAN_P) ** 2, axis=0)
    return (-1.1 + np.sum(HARTMAN_C * np.exp(-inner))) / 0.8387


def c_branin_disjoint(x):
    xb1 = (x[0] - 2.5) / 7.5
    xb2 = (x[1] - 7.5) / 7.5
    return (6 - (4 - 2.1 * xb1 ** 2 + xb1 ** 4 / 3) * xb1 ** 2 - xb1 * xb2
            - (4 * xb2 ** 2 - 4) * xb2 ** 2
            - 3 * np.sin(6 * (1 - xb1)) - 3 * np.sin(6 * (1 - xb2)))


def _vec(*fns, sign=1.0):
    def evaluate(x):
        return np.array([sign * float(fn(x)) for fn in fns])
    return evaluate


UNIT2 = Bounds(np.zeros(2), np.ones(2))
UNIT4 = Bounds(np.zeros(4), np.ones(4))
BRANIN_BOX = Bounds(np.array([-5.0, 0.0]), np.array([10.0, 15.0]))

_EXECUTABLE = {
    "MB": Problem("MB", BRANIN_BOX, f_modified_branin, _vec(c_branin_disjoint, sign=-1.0), None,
                  m=1, p=0, ref_value=12.00, klass="HNLC", penalty=150.0),
    "LSQ": Problem("LSQ", UNIT2, f_linear, _vec(c_sinusoid, c_quadratic), None,
                   m=2, p=0, ref_value=0.600, klass="HNLC", penalty=2.0),
    "GBSP": Problem("GBSP", UNIT2, f_goldstein_price_log, _vec(c_sinusoid), _vec(c_branin, c_parr),
                    m=1, p=2, ref_value=-0.5252, klass="HNLC", penalty=3.0),
    "LAH": Problem("LAH", UNIT4, f_linear, _vec(c_ackley, sign=-1.0), _vec(c_hartman),
                   m=1, p=1, ref_value=5.176e-2, klass="HNLC", penalty=3.0),
    "MBE": Problem("MBE", BRANIN_BOX, f_modified_branin, None, _vec(c_branin_disjoint),
                   m=0, p=1, ref_value=12.00, klass="HNLC", penalty=150.0),
}

# name, d, #eq, #ineq, class, reference value
_METADATA_ONLY = [
    ("G03", 10, 1, 0, "WNLC", -1.000),
    ("G04", 5, 0, 6, "WNLC", -3.067e4),
    ("G05", 4, 3, 2, "HNLC", 5126.0),
    ("G06", 2, 0, 2, "WNLC", -6962.0),
    ("G07", 10, 0, 8, "WNLC", 24.23),
    ("G08", 2, 0, 2, "WNLC", -9.583e-2),
    ("G09", 7, 0, 4, "WNLC", 680.6),
    ("G10", 8, 0, 6, "WNLC", 7049.0),
    ("G11", 2, 1, 0, "WNLC", 0.750),
    ("G12", 3, 0, 1, "WNLC", -1.000),
    ("G13", 5, 3, 0, "HNLC", 2.201e-3),
    ("G14", 10, 3, 0, "WNLC", -47.71),
    ("G15", 3, 2, 0, "WNLC", 961.7),
    ("G16", 5, 0, 38, "HNLC", -1.918),
    ("G17", 6, 4, 0, "WNLC", 8864.0),
    ("G18", 9, 0, 13, "WNLC", -0.8661),
    ("G21", 7, 5, 1, "WNLC", 193.8),
    ("G23", 9, 4, 2, "WNLC", -400.1),
    ("G24", 2, 0, 2, "HNLC", -6.031),
    ("WB4", 4, 0, 6, "HNLC", 0.4734),
    ("GTCD", 4, 0, 1, "HNLC", 2.965e6),
    ("Hesse", 6, 0, 6, "WNLC", -310.0),
    ("SR7", 7, 0, 11, "HNLC", 2994.0),
    ("PVD4", 4, 0, 3, "HNLC", 5809.0),
]


def _metadata_problem(name, d, n_eq, n_ineq, klass, ref):
    unit = Bounds(np.zeros(d), np.ones(d))
    return Problem(name, unit, None, None, None, m=n_ineq, p=n_eq, ref_value=ref,
                   klass=klass, penalty=None, executable=False)


_PROBLEMS: dict[str, Problem] = dict(_EXECUTABLE)
for _row in _METADATA_ONLY:
    _PROBLEMS[_row[0]] = _metadata_problem(*_row)
_PROBLEMS = dict(sorted(_PROBLEMS.items(), key=lambda kv: kv[0].lower()))


def get_problem(name: str) -> Problem:
    try:
        return _PROBLEMS[name]
    except KeyError:
        raise UnknownProblem(name) from None


def executable_names() -> list[str]:
    return list(_EXECUTABLE)


def registry() -> list[ProblemMeta]:
    return [p.meta for p in _PROBLEMS.values()]


def registry_csv() -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["name", "d", "eq", "ineq", "class", "ref"])
    for meta in registry():
        writer.writerow([meta.name, meta.d, meta.n_eq, meta.n_ineq, meta.klass, repr(meta.ref_value)])
    return buf.getvalue()


def evaluate(problem: Problem | str, x) -> Evaluation:
    if isinstance(problem, str):
        problem = get_problem(problem)
    if not problem.executable:
        raise NotImplementedError(f"{problem.name} is registered as metadata only")
    x = np.array(x, dtype=float).reshape(-1)
    if x.shape != (problem.dim,):
        raise ValueError(f"{problem.name} expects a point of dimension {problem.dim}")
    if not problem.bounds.contains(x):
        raise OutOfBounds(f"{x} lies outside the bounds of {problem.name}")
    x.setflags(write=False)
    g = problem.ineq(x) if problem.m else np.zeros(0)
    h = problem.eq(x) if problem.p else np.zeros(0)
    return Evaluation(x=x, f=float(problem.objective(x)), g=g, h=h)


def violation_of(g, h) -> float:
    """Largest constraint violation; zero when all constraints hold."""
    worst = 0.0
    if len(g):
        worst = max(worst, float(np.max(-np.asarray(g))))
    if len(h):
        worst = max(worst, float(np.max(np.abs(h))))
    return worst


def true_violation(problem: Problem | str, x, eps_c: float = 1e-2) -> float:
    if eps_c <= 0:
        raise ValueError("eps_c must be positive")
    ev = evaluate(problem, x)
    return violation_of(ev.g, ev.h)


def is_feasible(problem: Problem | str, x, eps_c: float) -> bool:
    return true_violation(problem, x, eps_c) <= eps_c
