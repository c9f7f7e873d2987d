import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from segoutb import gp
from segoutb.problems import Bounds


def branin_like(X):
    return np.sin(6 * X[:, 0]) + X[:, 1] ** 2 + 0.5 * X[:, 0] * X[:, 1]


def random_doe(seed, n=12, d=2):
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    return X, branin_like(X) if d == 2 else np.sin(3 * X).sum(axis=1)


def dense_predict(model, x):
    """Universal kriging via plain dense solves on the normalized data."""
    U, y, th, jit = model.X, model.y, model.theta, model.jitter
    n = len(y)
    R = np.exp(-np.sum(th * (U[:, None, :] - U[None, :, :]) ** 2, axis=-1)) + jit * np.eye(n)
    F = np.hstack([np.ones((n, 1)), U]) if model.trend == "linear" else np.ones((n, 1))
    RiF = np.linalg.solve(R, F)
    Riy = np.linalg.solve(R, y)
    beta = np.linalg.solve(F.T @ RiF, F.T @ Riy)
    res = y - F @ beta
    sigma2 = res @ np.linalg.solve(R, res) / n
    u = (np.atleast_2d(x) - model.x_offset) / model.x_scale
    r = np.exp(-np.sum(th * (u[:, None, :] - U[None, :, :]) ** 2, axis=-1))
    f = np.hstack([np.ones((len(u), 1)), u]) if model.trend == "linear" else np.ones((len(u), 1))
    mean = f @ beta + r @ np.linalg.solve(R, res)
    Rir = np.linalg.solve(R, r.T)
    w = F.T @ Rir - f.T
    var = sigma2 * (1 + jit - np.sum(r.T * Rir, axis=0)
                    + np.sum(w * np.linalg.solve(F.T @ RiF, w), axis=0))
    return mean * model.y_scale + model.y_mean, np.sqrt(np.maximum(var, 0)) * model.y_scale


def test_kernel_values():
    assert gp.kernel([0.3, 0.4], [0.3, 0.4], [2.0, 5.0]) == 1.0
    assert gp.kernel([0.0], [1.0], [1.0]) == pytest.approx(0.36788, abs=1e-5)


def test_constant_outputs():
    X, _ = random_doe(1)
    model = gp.fit(X, np.full(len(X), 4.2), rng=0)
    mean, std = model.predict(np.random.default_rng(2).random((20, 2)))
    assert np.allclose(mean, 4.2, atol=1e-8)
    assert model.process_variance == pytest.approx(0.0, abs=1e-12)


def test_linear_recovery():
    X, _ = random_doe(3, n=10)
    y = 1.5 - 2.0 * X[:, 0] + 0.7 * X[:, 1]
    model = gp.fit(X, y, rng=0)
    Q = np.random.default_rng(4).random((50, 2))
    assert np.max(np.abs(gp.predict_mean(model, Q) - (1.5 - 2.0 * Q[:, 0] + 0.7 * Q[:, 1]))) < 1e-4


@pytest.mark.parametrize("seed", range(5))
def test_matches_dense_oracle(seed):
    X, y = random_doe(seed)
    model = gp.fit(X, y, rng=seed)
    Q = np.random.default_rng(100 + seed).random((30, 2))
    m1, s1 = model.predict(Q)
    m2, s2 = dense_predict(model, Q)
    assert np.allclose(m1, m2, atol=1e-8 * np.std(y))
    assert np.allclose(s1, s2, atol=1e-6 * np.std(y))


def test_interpolation_and_zero_std_at_data():
    X, y = random_doe(7)
    model = gp.fit(X, y, rng=0)
    mean, std = model.predict(X)
    scale = np.std(y)
    assert np.max(np.abs(mean - y)) <= 1e-6 * scale
    assert np.max(std) <= 1e-5 * scale
    assert gp.predict_mean(model, X[0]) == pytest.approx(y[0], abs=1e-6 * scale)


def test_prior_recovered_far_away():
    X, y = random_doe(8)
    cfg = gp.GpConfig(trend="constant", theta_bounds=(10.0, 100.0))
    model = gp.fit(X, y, cfg, rng=0, bounds=Bounds(np.zeros(2), np.ones(2)))
    far = np.array([[30.0, -30.0]])
    std = model.predict(far)[1][0]
    assert std >= 0.9 * np.sqrt(model.process_variance)


def test_symmetric_design():
    X = np.array([[0.2], [0.8]])
    model = gp.fit(X, np.array([1.0, 1.0 + 1e-3]), gp.GpConfig(trend="constant"), rng=0,
                   bounds=Bounds(np.zeros(1), np.ones(1)))
    _, s = model.predict(np.array([[0.35], [0.65]]))
    assert s[0] == pytest.approx(s[1], abs=1e-10)


def test_deterministic_refit():
    X, y = random_doe(9)
    a = gp.fit(X, y, rng=5)
    b = gp.fit(X, y, rng=5)
    assert np.array_equal(a.theta, b.theta)
    assert a.dump() == b.dump()


def test_degenerate_inputs():
    X = np.array([[0.1, 0.2], [0.1, 0.2], [0.5, 0.5], [0.9, 0.1]])
    with pytest.raises(gp.DegenerateDoE):
        gp.fit(X, np.arange(4.0))
    with pytest.raises(gp.DegenerateDoE):
        gp.fit(X[:2] + [[0, 0], [0.3, 0]], np.arange(2.0))   # too few points for a linear trend


def test_likelihood_gradient():
    X, y = random_doe(11)
    U = X
    ys = (y - y.mean()) / y.std()
    lik = gp._Likelihood(U, ys, gp.trend_basis(U, "linear"), 1e-10)
    z = np.log(np.array([3.0, 0.7]))
    _, grad = lik.value_and_grad(z)
    h = 1e-6
    num = np.array([(lik.value_and_grad(z + h * e)[0] - lik.value_and_grad(z - h * e)[0]) / (2 * h)
                    for e in np.eye(2)])
    assert np.allclose(grad, num, rtol=1e-4, atol=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(-6, 6), st.integers(-50, 50))
def test_affine_output_invariance(seed, k, b):
    # power-of-two scale, integer shift and dyadic outputs: the rescaled
    # outputs are exact in floating point
    X, y = random_doe(seed, n=8)
    y = np.round(y * 2 ** 20) / 2 ** 20
    a = 2.0 ** k
    Q = np.random.default_rng(seed + 1).random((10, 2))
    m1, s1 = gp.fit(X, y, rng=0).predict(Q)
    m2, s2 = gp.fit(X, a * y + b, rng=0).predict(Q)
    assert np.allclose((m2 - b) / a, m1, rtol=1e-8, atol=1e-8 * np.std(y))
    assert np.allclose(s2 / a, s1, rtol=1e-8, atol=1e-8 * np.std(y))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.01, 100.0), st.floats(-50.0, 50.0))
def test_affine_output_invariance_inexact(seed, a, b):
    # a*y + b rounds, perturbing the standardized outputs by ~1e-14; lengthscales
    # on flat likelihoods amplify that, so only a looser bound holds in general
    X, y = random_doe(seed, n=8)
    Q = np.random.default_rng(seed + 1).random((10, 2))
    m1, s1 = gp.fit(X, y, rng=0).predict(Q)
    m2, s2 = gp.fit(X, a * y + b, rng=0).predict(Q)
    assert np.allclose((m2 - b) / a, m1, rtol=1e-5, atol=1e-5 * np.std(y))
    assert np.allclose(s2 / a, s1, rtol=1e-5, atol=1e-5 * np.std(y))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_std_nonnegative(seed):
    X, y = random_doe(seed, n=9)
    model = gp.fit(X, y, rng=0)
    Q = np.random.default_rng(seed).random((200, 2))
    assert np.all(model.predict(Q)[1] >= 0)
    raw = model.predict_variance_raw(Q)
    assert np.all(raw >= -1e-8 * model.sigma2)
