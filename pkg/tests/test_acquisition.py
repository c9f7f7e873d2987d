import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from segoutb import acquisition as acq
from segoutb import gp
from segoutb.problems import Bounds

PHI0 = 0.3989422804014327   # standard normal density at 0


def test_ei_examples():
    assert acq.expected_improvement(1.0, 0.0, 1.0) == 0.0
    assert acq.expected_improvement(1.0, 1.0, 1.0) == pytest.approx(PHI0, abs=1e-12)
    assert acq.expected_improvement(0.0, 1e-14, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert acq.expected_improvement(0.0, 0.0, 1.0) == 1.0


def test_ei_rejects_negative_std():
    with pytest.raises(ValueError):
        acq.expected_improvement(0.0, -1.0, 0.0)


def test_ei_monte_carlo_spot():
    rng = np.random.default_rng(0)
    mean, std, f_min = 0.3, 0.8, 0.1
    z = np.maximum(0.0, f_min - (mean + std * rng.standard_normal(10 ** 6)))
    se = z.std() / np.sqrt(z.size)
    assert abs(acq.expected_improvement(mean, std, f_min) - z.mean()) <= 3 * se


@settings(max_examples=200, deadline=None)
@given(st.floats(-10, 10), st.floats(0, 10), st.floats(0, 10), st.floats(-10, 10))
def test_ei_nonnegative_and_monotone_in_std(mean, s1, s2, f_min):
    lo, hi = sorted((s1, s2))
    a = acq.expected_improvement(mean, lo, f_min)
    b = acq.expected_improvement(mean, hi, f_min)
    assert a >= 0 and b >= 0
    assert b >= a - 1e-12


def test_wb2s_arithmetic():
    assert acq.wb2s_from_moments(2.5, 0.0, 2.5, 1.0) == pytest.approx(-2.5)
    # s = 5000, EI = 0.05, mu = 2.5 -> 247.5
    assert 5000 * 0.05 - 2.5 == pytest.approx(247.5)


class _Model:
    """Stub surrogate with fixed moments everywhere."""

    def __init__(self, mean, std):
        self.mean, self.std = mean, std

    def predict(self, X):
        n = len(np.atleast_2d(X))
        return np.full(n, self.mean), np.full(n, self.std)


def test_scale_formula():
    # EI(mean=2.5, std, f_min) chosen so that EI = 0.05 would give 5000; check the formula generally
    model = _Model(2.5, 0.3)
    bounds = Bounds(np.zeros(2), np.ones(2))
    ei = acq.expected_improvement(2.5, 0.3, 2.4)
    s = acq.compute_scale(model, bounds, 2.4, rng=0)
    assert s == pytest.approx(100 * 2.5 / ei)


def test_scale_is_one_when_ei_vanishes():
    model = _Model(5.0, 0.0)
    assert acq.compute_scale(model, Bounds(np.zeros(2), np.ones(2)), 1.0, rng=0) == 1.0


def test_scale_deterministic_and_wb2s_at_data():
    rng = np.random.default_rng(3)
    X = rng.random((8, 2))
    y = np.sin(5 * X[:, 0]) + X[:, 1]
    model = gp.fit(X, y, rng=0)
    b = Bounds(np.zeros(2), np.ones(2))
    f_min = float(y.min())
    s1 = acq.compute_scale(model, b, f_min, rng=11)
    s2 = acq.compute_scale(model, b, f_min, rng=11)
    assert s1 == s2
    ctx = acq.AcquisitionContext(model, f_min, s1)
    k = int(np.argmin(y))
    # at the incumbent the std is ~0 and the mean is f_min, so WB2S = -f_min
    assert acq.wb2s(X[k], ctx) == pytest.approx(-f_min, abs=1e-4 * (1 + abs(f_min)))


def test_context_rejects_bad_scale():
    with pytest.raises(ValueError):
        acq.AcquisitionContext(_Model(0, 1), 0.0, 0.0)
