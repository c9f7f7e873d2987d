import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from segoutb import subsolver as ss
from segoutb.feasibility import TrustRegionSpec
from segoutb.problems import Bounds

UNIT2 = Bounds(np.zeros(2), np.ones(2))
FAST = ss.SubSolveConfig(generations=30)


class Stub:
    def __init__(self, mean, std):
        self.mean, self.std = mean, std

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        m, s = np.asarray(self.mean(X), float), np.asarray(self.std(X), float)
        return (float(m[0]), float(s[0])) if single else (m, s)


def quad(X):
    return -np.sum((np.atleast_2d(X) - 0.3) ** 2, axis=1)


def test_unconstrained_quadratic():
    c = ss.maximize(quad, None, UNIT2, rng=0)
    assert np.linalg.norm(c.x - 0.3) < 1e-3
    assert c.trust_violation == 0.0


def test_empty_spec_is_unconstrained():
    spec = TrustRegionSpec([], [], [], [])
    c = ss.maximize(quad, spec, UNIT2, FAST, rng=1)
    assert np.linalg.norm(c.x - 0.3) < 1e-3


def test_deterministic():
    g = Stub(lambda X: X[:, 0] - 0.6, lambda X: 0.05 + 0 * X[:, 0])
    spec = TrustRegionSpec([g], [], [1.0], [])
    a = ss.maximize(quad, spec, UNIT2, FAST, rng=42)
    b = ss.maximize(quad, spec, UNIT2, FAST, rng=42)
    assert np.array_equal(a.x, b.x) and a.acq == b.acq and a.trust_violation == b.trust_violation


def test_active_inequality():
    # optimum of the quadratic lies outside x0 >= 0.6 - tau*sigma = 0.45
    g = Stub(lambda X: X[:, 0] - 0.6, lambda X: 0.05 + 0 * X[:, 0])
    spec = TrustRegionSpec([g], [], [3.0], [])
    c = ss.maximize(quad, spec, UNIT2, rng=0)
    assert c.trust_violation <= 1e-6
    assert c.x[0] == pytest.approx(0.45, abs=1e-4)
    assert c.x[1] == pytest.approx(0.3, abs=1e-3)


def test_min_violation_when_infeasible_everywhere():
    h = Stub(lambda X: 1 + (X[:, 0] - 0.6) ** 2 + (X[:, 1] - 0.2) ** 2, lambda X: 0.1 + 0 * X[:, 0])
    spec = TrustRegionSpec([], [h], [], [0.01])
    c = ss.maximize(lambda X: np.atleast_2d(X)[:, 0], spec, UNIT2, rng=3)
    g = np.linspace(0, 1, 401)
    G = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    assert c.trust_violation == pytest.approx(spec.violation(G).min(), abs=1e-3)


def test_one_dimensional_monotone_margin():
    g = Stub(lambda X: X[:, 0] - 2.0, lambda X: 0 * X[:, 0])
    spec = TrustRegionSpec([g], [], [0.0], [])
    b = Bounds(np.zeros(1), np.ones(1))
    c = ss.maximize(lambda X: -np.atleast_2d(X)[:, 0], spec, b, FAST, rng=0)
    assert c.x[0] == pytest.approx(1.0, abs=1e-6)
    assert c.trust_violation == pytest.approx(1.0, abs=1e-6)
    m = ss.min_violation_point(spec, b, FAST, rng=0)
    assert m.x[0] == pytest.approx(1.0, abs=1e-6)


def test_equality_band():
    # |x0 + x1 - 1| <= tau*sigma = 0.03
    h = Stub(lambda X: X[:, 0] + X[:, 1] - 1.0, lambda X: 0.01 + 0 * X[:, 0])
    spec = TrustRegionSpec([], [h], [], [3.0])
    c = ss.maximize(quad, spec, UNIT2, rng=5)
    assert c.trust_violation <= 1e-6
    assert np.allclose(c.x, 0.5 - 0.015, atol=2e-3)


def test_stochastic_rank():
    rng = np.random.default_rng(0)
    obj = rng.random(30)
    viol = rng.random(30) + 0.1
    order = ss.stochastic_rank(obj, viol, rng, pf=0.0)
    assert np.all(np.diff(viol[order]) >= 0)
    order = ss.stochastic_rank(obj, np.zeros(30), rng)
    assert np.all(np.diff(obj[order]) >= 0)


def test_config_validation():
    with pytest.raises(ValueError):
        ss.SubSolveConfig(generations=0)
    with pytest.raises(ValueError):
        ss.SubSolveConfig(population=1)
    assert ss.SubSolveConfig().population_size(2) == 80


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.5, 1.5), st.floats(0.0, 3.0), st.integers(0, 10 ** 6))
def test_candidate_in_box_and_feasible_when_possible(shift, tau, seed):
    g = Stub(lambda X: np.sin(5 * X[:, 0]) + X[:, 1] - shift, lambda X: 0.1 + 0.2 * X[:, 0])
    spec = TrustRegionSpec([g], [], [tau], [])
    b = Bounds(np.array([-1.0, 2.0]), np.array([1.0, 5.0]))
    cfg = ss.SubSolveConfig(generations=10, local_iterations=30)
    c = ss.maximize(lambda X: -np.sum(np.atleast_2d(X) ** 2, axis=1), spec, b, cfg, rng=seed)
    assert b.contains(c.x)
    G = b.from_unit(np.random.default_rng(seed).random((2000, 2)))
    if np.any(spec.violation(G) == 0):
        assert c.trust_violation <= 1e-6


def test_feasible_stage1_implies_feasible_result():
    calls = []

    class Spy(ss._Tracker):
        def offer(self, U, acq, viol):
            calls.append(np.any(np.asarray(viol) <= self.feas_tol))
            super().offer(U, acq, viol)

    g = Stub(lambda X: 0.05 - (X[:, 0] - 0.8) ** 2 - (X[:, 1] - 0.8) ** 2, lambda X: 0 * X[:, 0])
    spec = TrustRegionSpec([g], [], [0.0], [])
    orig = ss._Tracker
    ss._Tracker = Spy
    try:
        c = ss.maximize(quad, spec, UNIT2, FAST, rng=2)
    finally:
        ss._Tracker = orig
    assert any(calls)
    assert c.trust_violation <= 1e-6


def test_more_generations_do_not_hurt():
    g = Stub(lambda X: np.cos(7 * X[:, 0]) * np.sin(5 * X[:, 1]) + 0.2, lambda X: 0.05 + 0 * X[:, 0])
    spec = TrustRegionSpec([g], [], [1.0], [])

    def rastrigin(X):
        Z = 4 * (np.atleast_2d(X) - 0.37)
        return -np.sum(Z ** 2 - np.cos(2 * np.pi * Z), axis=1)

    short, long = [], []
    for seed in range(30):
        for gens, out in ((4, short), (8, long)):
            c = ss.maximize(rastrigin, spec, UNIT2, ss.SubSolveConfig(generations=gens, local_iterations=20),
                            rng=seed)
            out.append(c.acq if c.trust_violation <= 1e-6 else -np.inf)
    # equal up to the local polish tolerance counts as not worse
    assert np.median(long) >= np.median(short) - 1e-8 * (1 + abs(np.median(short)))
