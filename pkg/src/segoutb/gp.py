"""Universal kriging with a polynomial trend and Gaussian correlation.

Inputs are mapped to the unit cube and outputs standardized before fitting.
The correlation lengthscales maximize the concentrated log-likelihood.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.linalg.lapack import dpotrf, dpotri, dtrtrs
from scipy.optimize import minimize
from scipy.stats import qmc

JITTER_START = 1e-10
JITTER_MAX = 1e-6


class DegenerateDoE(ValueError):
    pass


class SingularCorrelation(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class GpConfig:
    trend: str = "linear"
    theta_bounds: tuple[float, float] = (1e-6, 1e2)
    jitter: float = JITTER_START
    restarts: int = 10

    def __post_init__(self):
        if self.trend not in ("constant", "linear"):
            raise ValueError(f"unknown trend {self.trend!r}")
        lo, hi = self.theta_bounds
        if not 0 < lo < hi:
            raise ValueError("lengthscale bounds must be positive and ordered")
        if self.jitter <= 0:
            raise ValueError("jitter must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass(frozen=True)
class GpModel:
    X: np.ndarray              # normalized inputs, (l, d)
    y: np.ndarray              # standardized outputs, (l,)
    x_offset: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float
    trend: str
    theta: np.ndarray
    beta: np.ndarray
    sigma2: float              # process variance in standardized units
    jitter: float
    chol: np.ndarray           # lower Cholesky factor of R + jitter*I
    alpha: np.ndarray          # R^-1 (y - F beta)
    F_tilde: np.ndarray        # L^-1 F
    trend_r: np.ndarray        # R factor of the QR of F_tilde
    log_likelihood: float

    @property
    def process_variance(self) -> float:
        """Process variance in original output units."""
        return self.sigma2 * self.y_scale ** 2

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def predict(self, x):
        """Posterior mean and standard deviation at one point or a batch."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        mean, var = self._predict_normalized(np.atleast_2d(x))
        mean = mean * self.y_scale + self.y_mean
        std = np.sqrt(np.maximum(var, 0.0)) * self.y_scale
        if single:
            return float(mean[0]), float(std[0])
        return mean, std

    def predict_variance_raw(self, x):
        """Unclamped posterior variance in standardized units."""
        return self._predict_normalized(np.atleast_2d(np.asarray(x, dtype=float)))[1]

    def _predict_normalized(self, x):
        u = (x - self.x_offset) / self.x_scale
        r = correlation(u, self.X, self.theta)          # (q, l)
        # Jitter is a white-noise term of the kernel, so it only enters the
        # cross-correlation at exactly coincident points.
        same = np.all(u[:, None, :] == self.X[None, :, :], axis=-1)
        r = r + self.jitter * same
        f = trend_basis(u, self.trend)                  # (q, k)
        mean = f @ self.beta + r @ self.alpha
        v = solve_triangular(self.chol, r.T, lower=True)  # (l, q)
        w = self.F_tilde.T @ v - f.T                    # (k, q)
        z = solve_triangular(self.trend_r, w, trans="T", lower=False)
        var = self.sigma2 * (1.0 + self.jitter - np.sum(v * v, axis=0) + np.sum(z * z, axis=0))
        return mean, var

    def dump(self) -> str:
        """Debugging record of the fitted model (not a stable format)."""
        record = {
            "inputs": (self.X * self.x_scale + self.x_offset).tolist(),
            "outputs": (self.y * self.y_scale + self.y_mean).tolist(),
            "theta": self.theta.tolist(),
            "beta": self.beta.tolist(),
            "sigma2": self.process_variance,
            "trend": self.trend,
        }
        return json.dumps(record)


def kernel(x, x2, theta) -> float:
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return float(np.exp(-np.sum(np.asarray(theta) * (x - x2) ** 2)))


def correlation(A, B, theta):
    diff = A[:, None, :] - B[None, :, :]
    return np.exp(-np.einsum("ijk,k->ij", diff * diff, theta))


def trend_basis(u, trend):
    ones = np.ones((u.shape[0], 1))
    if trend == "constant":
        return ones
    return np.hstack([ones, u])


def _factor(R, jitter):
    n = R.shape[0]
    j = jitter
    diag = np.arange(n)
    while j <= JITTER_MAX * (1 + 1e-12):
        A = R.copy()
        A[diag, diag] += j
        L, info = dpotrf(A, lower=1, clean=1, overwrite_a=1)
        if info == 0:
            return L, j
        j *= 10.0
    raise SingularCorrelation(f"correlation matrix not positive definite with jitter {JITTER_MAX}")


class _Likelihood:
    """Concentrated log-likelihood and its gradient in log-lengthscale space."""

    def __init__(self, X, y, F, jitter):
        self.X, self.y, self.F, self.jitter = X, y, F, jitter
        diff = X[:, None, :] - X[None, :, :]
        self.sqdist = diff * diff                      # (l, l, d)
        # strict lower triangle: the diagonal of sqdist vanishes and W is symmetric
        self._il = np.tril_indices(X.shape[0], -1)
        self._lower = self.sqdist[self._il]
        self._Fy = np.column_stack([F, y])

    def solve(self, theta):
        R = np.exp(-(self.sqdist @ theta))
        L, jit = _factor(R, self.jitter)
        sol, _ = dtrtrs(L, self._Fy, lower=1)
        Ft, yt = sol[:, :-1], sol[:, -1]
        A = Ft.T @ Ft
        beta = np.linalg.solve(A, Ft.T @ yt)
        resid_t = yt - Ft @ beta
        n = self.y.size
        sigma2 = float(resid_t @ resid_t) / n
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        if sigma2 <= 0.0:
            ll = np.inf
        else:
            ll = -0.5 * (n * np.log(sigma2) + logdet)
        return dict(R=R, L=L, jitter=jit, Ft=Ft, A=A, beta=beta, sigma2=sigma2, ll=ll,
                    resid_t=resid_t)

    def value_and_grad(self, log_theta):
        theta = np.exp(log_theta)
        try:
            s = self.solve(theta)
        except SingularCorrelation:
            return 1e10, np.zeros_like(log_theta)
        if not np.isfinite(s["ll"]):
            return -1e10, np.zeros_like(log_theta)
        L, R, sigma2 = s["L"], s["R"], s["sigma2"]
        alpha, _ = dtrtrs(L, s["resid_t"], lower=1, trans=1)
        Rinv, _ = dpotri(L, lower=1)
        i, j = self._il
        w = (Rinv[i, j] - alpha[i] * alpha[j] / sigma2) * R[i, j]
        grad = (w @ self._lower) * theta
        return -s["ll"], -grad


def log_likelihood(model_or_data, theta=None) -> float:
    """Concentrated log-likelihood of a fitted model, optionally at another theta."""
    m = model_or_data
    th = m.theta if theta is None else np.atleast_1d(np.asarray(theta, dtype=float))
    lik = _Likelihood(m.X, m.y, trend_basis(m.X, m.trend), m.jitter)
    return float(lik.solve(th)["ll"])


def fit(doe_inputs, outputs, config: GpConfig | None = None, rng=None, bounds=None) -> GpModel:
    """Fit a universal-kriging model.

    ``bounds`` (a ``Bounds``) fixes the unit-cube normalization; without it the
    data range is used.
    """
    config = config or GpConfig()
    rng = np.random.default_rng(rng)
    X = np.atleast_2d(np.asarray(doe_inputs, dtype=float))
    y = np.asarray(outputs, dtype=float).reshape(-1)
    n, d = X.shape
    if y.size != n:
        raise ValueError("inputs and outputs differ in length")
    n_basis = 1 if config.trend == "constant" else d + 1
    if n < n_basis:
        raise DegenerateDoE(f"need at least {n_basis} points for a {config.trend} trend")

    if bounds is not None:
        x_offset, x_scale = bounds.lower.copy(), bounds.width.copy()
    else:
        x_offset = X.min(axis=0)
        x_scale = X.max(axis=0) - x_offset
        x_scale[x_scale == 0] = 1.0
    U = (X - x_offset) / x_scale
    diff = U[:, None, :] - U[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1)) + np.eye(n)
    if np.any(dist < 1e-10):
        raise DegenerateDoE("duplicate inputs in the design of experiments")

    y_mean = float(np.mean(y))
    y_scale = float(np.std(y))
    if y_scale == 0.0 or not np.isfinite(y_scale):
        y_scale = 1.0
    # Rounding makes affine rescalings of y map to identical standardized data;
    # otherwise ulp-level differences move theta on flat likelihood surfaces.
    ys = np.round((y - y_mean) / y_scale, 12)
    F = trend_basis(U, config.trend)
    lik = _Likelihood(U, ys, F, config.jitter)

    lo, hi = np.log(config.theta_bounds[0]), np.log(config.theta_bounds[1])
    if np.allclose(ys, 0.0):
        # Constant outputs carry no information on the lengthscales.
        best_theta = np.full(d, np.exp(0.5 * (lo + hi)))
    else:
        starts = lo + (hi - lo) * qmc.LatinHypercube(d=d, seed=rng).random(config.restarts)
        best_val, best_theta = np.inf, None
        for s in starts:
            res = minimize(lik.value_and_grad, s, jac=True, method="L-BFGS-B",
                           bounds=[(lo, hi)] * d)
            val = float(res.fun)
            if val < best_val:
                best_val, best_theta = val, np.exp(res.x)
        if best_theta is None:
            raise SingularCorrelation("likelihood optimization failed at every start")

    s = lik.solve(best_theta)
    resid = ys - F @ s["beta"]
    alpha = cho_solve((s["L"], True), resid)
    ll = s["ll"] if np.isfinite(s["ll"]) else np.inf
    return GpModel(
        X=U, y=ys, x_offset=x_offset, x_scale=x_scale, y_mean=y_mean, y_scale=y_scale,
        trend=config.trend, theta=best_theta, beta=s["beta"], sigma2=max(s["sigma2"], 0.0),
        jitter=s["jitter"], chol=s["L"], alpha=alpha, F_tilde=s["Ft"], trend_r=np.linalg.qr(s["Ft"], mode="r"),
        log_likelihood=float(ll),
    )


def predict_mean(model: GpModel, x):
    return model.predict(x)[0]


def predict_std(model: GpModel, x):
    return model.predict(x)[1]
