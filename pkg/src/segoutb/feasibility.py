"""Upper-trust-bound feasibility margins and learning-rate schedules."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_TAU = 3.0

# label -> (profile, kappa)
_SHAPES = {
    "Lin": ("lin", None),
    "Arc": ("arc", 10.0),
    "Log-1": ("log", 10.0),
    "Log-2": ("log", 100.0),
    "Exp-1": ("exp", 5.0),
    "Exp-2": ("exp", 10.0),
}

SCHEDULE_LABELS = ["Cst"] + [f"{p}-{s}" for p in ("D", "I") for s in _SHAPES]


def _decreasing_fraction(profile, kappa, u):
    """Fraction of tau_max left at progress u in [0, 1]; 1 at u=0, 0 at u=1."""
    if profile == "lin":
        return 1.0 - u
    if profile == "arc":
        return 1.0 - np.arctan(kappa * u) / np.arctan(kappa)
    if profile == "log":
        return 1.0 - np.log1p(kappa * u) / np.log1p(kappa)
    if profile == "exp":
        return (np.exp(-kappa * u) - np.exp(-kappa)) / (1.0 - np.exp(-kappa))
    raise ValueError(profile)


@dataclass(frozen=True)
class Schedule:
    kind: str = "Cst"
    tau_max: float = DEFAULT_TAU
    kappa: float | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_LABELS:
            raise ValueError(f"unknown schedule {self.kind!r}; expected one of {SCHEDULE_LABELS}")
        if self.tau_max < 0:
            raise ValueError("tau_max must be non-negative")
        if self.kappa is not None and self.kappa <= 0:
            raise ValueError("kappa must be positive")

    @property
    def direction(self) -> str:
        if self.kind == "Cst":
            return "constant"
        return "decreasing" if self.kind.startswith("D-") else "increasing"

    def value(self, l: int, L: int) -> float:
        return schedule_value(self, l, L)


def schedule_value(s: Schedule, l: int, L: int) -> float:
    if L < 1 or not 0 <= l <= L:
        raise ValueError(f"need 0 <= l <= L and L >= 1 (got l={l}, L={L})")
    if s.kind == "Cst":
        return float(s.tau_max)
    profile, kappa = _SHAPES[s.kind[2:]]
    if s.kappa is not None:
        kappa = s.kappa
    u = l / L
    if l == 0:
        frac = 1.0
    elif l == L:
        frac = 0.0
    else:
        frac = float(np.clip(_decreasing_fraction(profile, kappa, u), 0.0, 1.0))
    if s.kind.startswith("I-"):
        frac = 1.0 - frac
    return float(s.tau_max * frac)


@dataclass(frozen=True)
class TrustRegionSpec:
    gp_g: list = field(default_factory=list)
    gp_h: list = field(default_factory=list)
    tau_g: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tau_h: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        tg = np.asarray(self.tau_g, dtype=float).reshape(-1)
        th = np.asarray(self.tau_h, dtype=float).reshape(-1)
        if tg.size != len(self.gp_g) or th.size != len(self.gp_h):
            raise ValueError("tau vectors must match the number of constraint models")
        if np.any(tg < 0) or np.any(th < 0):
            raise ValueError("learning rates must be non-negative")
        object.__setattr__(self, "tau_g", tg)
        object.__setattr__(self, "tau_h", th)

    @property
    def m(self) -> int:
        return len(self.gp_g)

    @property
    def p(self) -> int:
        return len(self.gp_h)

    def margins(self, X):
        """Inequality and equality margins for a batch of points, shapes (q, m), (q, p)."""
        X = np.atleast_2d(X)
        ineq = np.empty((X.shape[0], self.m))
        for i, model in enumerate(self.gp_g):
            mu, sd = model.predict(X)
            ineq[:, i] = mu + self.tau_g[i] * sd
        eq = np.empty((X.shape[0], self.p))
        for j, model in enumerate(self.gp_h):
            mu, sd = model.predict(X)
            eq[:, j] = self.tau_h[j] * sd - np.abs(mu)
        return ineq, eq

    def violation(self, X):
        """Vectorized trust violation for a batch of points."""
        ineq, eq = self.margins(X)
        return np.sum(np.maximum(0.0, -ineq), axis=1) + np.sum(np.maximum(0.0, -eq), axis=1)


def ineq_margin(spec: TrustRegionSpec, x) -> np.ndarray:
    return spec.margins(np.atleast_2d(x))[0][0]


def eq_margin(spec: TrustRegionSpec, x) -> np.ndarray:
    return spec.margins(np.atleast_2d(x))[1][0]


def violation_from_margins(ineq, eq) -> float:
    return float(np.sum(np.maximum(0.0, -np.asarray(ineq))) + np.sum(np.maximum(0.0, -np.asarray(eq))))


def trust_violation(spec: TrustRegionSpec, x) -> float:
    return float(spec.violation(np.atleast_2d(x))[0])
