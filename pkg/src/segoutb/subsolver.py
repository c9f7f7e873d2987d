"""Two-stage maximization of an acquisition over the trust-feasible region.

Stage 1 is a stochastic-ranking evolution strategy with differential
variation; stage 2 polishes the stage-1 incumbent with SLSQP on the
constrained problem. Every point visited by either stage is a candidate.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from numba import njit
from scipy.stats import qmc

from .feasibility import TrustRegionSpec

SWAP_PROBABILITY = 0.45


@dataclass(frozen=True)
class SubSolveConfig:
    population: int | None = None      # default 40 + 20 d
    generations: int = 50
    local_iterations: int = 100
    local_tol: float = 1e-8
    feas_tol: float = 1e-6

    def __post_init__(self):
        for name in ("generations", "local_iterations"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.population is not None and self.population < 2:
            raise ValueError("population must be at least 2")
        if self.local_tol <= 0 or self.feas_tol < 0:
            raise ValueError("local_tol must be positive and feas_tol non-negative")

    def population_size(self, d: int) -> int:
        return self.population if self.population is not None else 40 + 20 * d


@dataclass(frozen=True)
class Candidate:
    x: np.ndarray
    acq: float
    trust_violation: float


class _Tracker:
    """Keeps the best trust-feasible point by acquisition and the least violating point."""

    def __init__(self, feas_tol):
        self.feas_tol = feas_tol
        self.best_feasible = None
        self.least_violating = None

    def offer(self, U, acq, viol):
        acq = np.asarray(acq, dtype=float)
        viol = np.asarray(viol, dtype=float)
        feasible = viol <= self.feas_tol
        if np.any(feasible):
            idx = np.flatnonzero(feasible)
            k = idx[np.argmax(acq[idx])]
            if self.best_feasible is None or acq[k] > self.best_feasible[1]:
                self.best_feasible = (U[k].copy(), float(acq[k]), float(viol[k]))
        k = int(np.argmin(viol))
        lv = self.least_violating
        if lv is None or viol[k] < lv[2] or (viol[k] == lv[2] and acq[k] > lv[1]):
            self.least_violating = (U[k].copy(), float(acq[k]), float(viol[k]))

    @property
    def incumbent(self):
        return self.best_feasible if self.best_feasible is not None else self.least_violating


@njit(cache=True)
def _bubble_rank(objective, violation, draws, pf, feas_tol):
    n = objective.size
    order = np.arange(n)
    for sweep in range(n):
        swapped = False
        for j in range(n - 1):
            a = order[j]
            b = order[j + 1]
            both_ok = violation[a] <= feas_tol and violation[b] <= feas_tol
            if both_ok or draws[sweep, j] < pf:
                worse = objective[a] > objective[b]
            else:
                worse = violation[a] > violation[b]
            if worse:
                order[j] = b
                order[j + 1] = a
                swapped = True
        if not swapped:
            break
    return order


def stochastic_rank(objective, violation, rng, pf=SWAP_PROBABILITY, feas_tol=0.0):
    """Stochastic bubble-sort ranking; objective is minimized. Returns an index order.

    Adjacent pairs are compared by objective when both are feasible or with
    probability ``pf``, otherwise by violation.
    """
    objective = np.ascontiguousarray(objective, dtype=np.float64)
    violation = np.ascontiguousarray(violation, dtype=np.float64)
    n = objective.size
    draws = rng.random((n, max(n - 1, 1)))
    return _bubble_rank(objective, violation, draws, float(pf), float(feas_tol))


class _Problem:
    """Acquisition and trust margins over the unit cube."""

    def __init__(self, acq, spec, bounds):
        self.acq = acq
        self.spec = spec
        self.bounds = bounds

    def evaluate(self, U):
        X = self.bounds.from_unit(U)
        acq = np.asarray(self.acq(X), dtype=float).reshape(-1)
        if self.spec is None:
            return acq, np.zeros(len(U))
        return acq, self.spec.violation(X)


def _evolve(prob, d, cfg, rng, tracker):
    lam = cfg.population_size(d)
    mu = max(2, lam // 7)
    tau = 1.0 / np.sqrt(2.0 * np.sqrt(d))
    tau_prime = 1.0 / np.sqrt(2.0 * d)
    gamma = 0.85
    alpha = 0.2

    pop = qmc.LatinHypercube(d=d, seed=rng).random(lam)
    sig = np.full((lam, d), 1.0 / np.sqrt(d))
    for _ in range(cfg.generations):
        acq, viol = prob.evaluate(pop)
        tracker.offer(pop, acq, viol)
        order = stochastic_rank(-acq, viol, rng, feas_tol=cfg.feas_tol)
        parents = pop[order[:mu]]
        psig = sig[order[:mu]]

        child = np.empty_like(pop)
        csig = np.empty_like(sig)
        # differential variation on the best parents
        n_dv = mu - 1
        child[:n_dv] = parents[:n_dv] + gamma * (parents[0] - parents[1:mu])
        csig[:n_dv] = psig[:n_dv]
        # self-adaptive mutation for the rest
        k = lam - n_dv
        src = np.arange(k) % mu
        base_sig = psig[src]
        new_sig = base_sig * np.exp(tau_prime * rng.standard_normal((k, 1))
                                    + tau * rng.standard_normal((k, d)))
        new_sig = np.minimum(new_sig, 1.0)
        cand = parents[src] + new_sig * rng.standard_normal((k, d))
        for _retry in range(10):
            bad = np.any((cand < 0) | (cand > 1), axis=1)
            if not np.any(bad):
                break
            cand[bad] = parents[src[bad]] + new_sig[bad] * rng.standard_normal((int(bad.sum()), d))
        child[n_dv:] = cand
        csig[n_dv:] = base_sig + alpha * (new_sig - base_sig)
        pop = np.clip(child, 0.0, 1.0)
        sig = csig
    acq, viol = prob.evaluate(pop)
    tracker.offer(pop, acq, viol)


def _polish(prob, spec, u0, cfg, tracker, objective="acq"):
    d = u0.size
    cache = {}

    def moments(u):
        key = u.tobytes()
        if key in cache:
            return cache[key]
        X = prob.bounds.from_unit(u[None, :])
        a = float(np.asarray(prob.acq(X)).reshape(-1)[0])
        ineq = np.zeros(0)
        eq_hi = np.zeros(0)
        eq_lo = np.zeros(0)
        if spec is not None:
            ineq = np.array([mu + t * sd for (mu, sd), t in
                             zip((mdl.predict(X[0]) for mdl in spec.gp_g), spec.tau_g)])
            hm = [mdl.predict(X[0]) for mdl in spec.gp_h]
            band = np.array([t * sd for (_, sd), t in zip(hm, spec.tau_h)])
            mus = np.array([mu for mu, _ in hm])
            # tau*sigma - |mu| >= 0 as two smooth inequalities
            eq_hi = band - mus
            eq_lo = band + mus
        if len(cache) > 4096:
            cache.clear()
        cache[key] = (a, ineq, eq_hi, eq_lo)
        return cache[key]

    a0 = moments(u0)[0]
    scale = max(1.0, abs(a0))
    constraints = []
    if objective == "acq" and spec is not None:
        if spec.m:
            constraints.append({"type": "ineq", "fun": lambda u: moments(u)[1]})
        if spec.p:
            constraints.append({"type": "ineq", "fun": lambda u: moments(u)[2]})
            constraints.append({"type": "ineq", "fun": lambda u: moments(u)[3]})

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = minimize(lambda u: -moments(u)[0] / scale, u0, method="SLSQP",
                       bounds=[(0.0, 1.0)] * d, constraints=constraints,
                       options={"maxiter": cfg.local_iterations, "ftol": cfg.local_tol})
    u = np.clip(np.asarray(res.x, dtype=float), 0.0, 1.0)
    if np.all(np.isfinite(u)):
        acq, viol = prob.evaluate(u[None, :])
        tracker.offer(u[None, :], acq, viol)


def _solve(acq, spec, bounds, cfg, rng, objective):
    cfg = cfg or SubSolveConfig()
    rng = np.random.default_rng(rng)
    d = bounds.dim
    if spec is not None and spec.m == 0 and spec.p == 0:
        spec = None
    if objective == "violation":
        prob = _Problem(lambda X: -spec.violation(X), spec, bounds)
    else:
        prob = _Problem(acq, spec, bounds)
    tracker = _Tracker(cfg.feas_tol)
    _evolve(prob, d, cfg, rng, tracker)
    u0 = tracker.incumbent[0]
    _polish(prob, spec, u0, cfg, tracker, objective="acq" if objective == "acq" else "violation")
    u, a, v = tracker.incumbent
    return Candidate(x=bounds.from_unit(u), acq=a, trust_violation=v)


def maximize(acq, spec: TrustRegionSpec | None, bounds, cfg: SubSolveConfig | None = None,
             rng=None) -> Candidate:
    """Maximize ``acq`` (batch evaluator X -> values) over the trust region of ``spec``."""
    return _solve(acq, spec, bounds, cfg, rng, "acq")


def min_violation_point(spec: TrustRegionSpec, bounds, cfg: SubSolveConfig | None = None,
                        rng=None) -> Candidate:
    cand = _solve(None, spec, bounds, cfg, rng, "violation")
    return Candidate(x=cand.x, acq=-cand.trust_violation, trust_violation=cand.trust_violation)
