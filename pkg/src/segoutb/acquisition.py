"""Expected improvement and the scaled Watson-Barnes criterion (WB2S)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr
from scipy.stats import qmc

from .gp import GpModel

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
EI_ZERO = 1e-300


def expected_improvement(mean, std, f_min):
    """Closed-form EI for minimization; vectorized over mean and std."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    if np.any(std < 0):
        raise ValueError("std must be non-negative")
    gain = f_min - mean
    # subnormal std overflows z; the limits of ndtr/exp are still correct
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        z = np.where(std > 0, gain / np.where(std > 0, std, 1.0), 0.0)
        ei = np.where(std > 0,
                      gain * ndtr(z) + std * _INV_SQRT_2PI * np.exp(-0.5 * z * z),
                      np.maximum(gain, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


@dataclass(frozen=True)
class AcquisitionContext:
    gp_f: GpModel
    f_min: float
    scale: float

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be finite and positive, got {self.scale}")


def space_filling(bounds, n, rng):
    return bounds.from_unit(qmc.LatinHypercube(d=bounds.dim, seed=rng).random(n))


def compute_scale(gp_f: GpModel, bounds, f_min: float, rng, n_per_dim: int = 100) -> float:
    candidates = space_filling(bounds, n_per_dim * bounds.dim, rng)
    mean, std = gp_f.predict(candidates)
    ei = expected_improvement(mean, std, f_min)
    best = int(np.argmax(ei))
    if ei[best] > EI_ZERO:
        s = 100.0 * abs(mean[best]) / ei[best]
        if np.isfinite(s) and s > 0:
            return float(s)
    return 1.0


def wb2s(x, ctx: AcquisitionContext):
    """s * EI(x) - mu_f(x); accepts one point or a batch."""
    mean, std = ctx.gp_f.predict(x)
    return ctx.scale * expected_improvement(mean, std, ctx.f_min) - mean


def wb2s_from_moments(mean, std, f_min, scale):
    return scale * expected_improvement(mean, std, f_min) - np.asarray(mean)
