"""Sample-splitting correction that makes the convolution estimator efficient.

The data are split into halves; each half gets its own smoother and residual
density, the score -f'/f and the Fisher information are estimated crosswise,
and the additive correction C1 + C2 is assembled from centered evaluations of
the derivative of a pooled logistic-kernel density estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .density import DensityEstimate, Method
from .kernels import SmoothKernel, logistic_kernel
from .scenarios import Dataset
from .smoother import WeightFunction, fit_all

__all__ = [
    "SplitPlan",
    "CrossFit",
    "LogisticKde",
    "ScoreEstimate",
    "CorrectionTerm",
    "FisherDegenerateError",
    "crossfit",
    "split_density_estimates",
    "score_and_fisher",
    "correction",
    "efficient_estimate",
    "efficiency_correction",
]

_J_FLOOR = 1e-12


class FisherDegenerateError(RuntimeError):
    """Estimated Fisher information is numerically zero; correction undefined."""


@dataclass(frozen=True)
class SplitPlan:
    n: int

    @property
    def m(self):
        return self.n // 2

    @property
    def first(self):
        return slice(0, self.m)

    @property
    def second(self):
        return slice(self.m, self.n)


@dataclass(frozen=True)
class CrossFit:
    plan: SplitPlan
    bandwidth: float
    r1_at_x: np.ndarray          # r-hat from the first half, at all X_j
    r2_at_x: np.ndarray
    residuals: np.ndarray        # shape (2, n): eps-hat_{i,j} = Y_j - r_i(X_j)


def crossfit(data: Dataset, c: float, w: WeightFunction) -> CrossFit:
    """Fit the smoother on each half and evaluate both fits at every X_j."""
    n = data.n
    if n < 8:
        raise ValueError("crossfit needs at least 8 observations")
    plan = SplitPlan(n)
    halves = []
    for sl in (plan.first, plan.second):
        sub = Dataset(x=data.x[sl], y=data.y[sl], eps=None, r_x=None,
                      seed=data.seed, rep=data.rep, scenario_name=data.scenario_name)
        fit = fit_all(sub, c, w, grid=data.x)
        halves.append(fit.r_hat_grid)
    r1, r2 = halves
    residuals = np.stack([data.y - r1, data.y - r2])
    return CrossFit(plan=plan, bandwidth=float(c), r1_at_x=r1, r2_at_x=r2,
                    residuals=residuals)


class LogisticKde:
    """Weighted logistic-kernel density estimate with an exact derivative.

    value/deriv are exact sums; interpolators() tabulates both on a fine grid
    and returns cubic splines for bulk evaluation.
    """

    def __init__(self, points, weights, a, kappa: SmoothKernel | None = None):
        self.points = np.asarray(points, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        if a <= 0:
            raise ValueError("bandwidth must be positive")
        self.a = float(a)
        self.kappa = kappa if kappa is not None else logistic_kernel()

    def value(self, z):
        return self.value_and_deriv(z)[0]

    def deriv(self, z):
        return self.value_and_deriv(z)[1]

    def value_and_deriv(self, z, chunk=512):
        """Both sums from one kernel-argument broadcast, chunked over z."""
        z = np.asarray(z, dtype=float)
        flat = np.atleast_1d(z).ravel()
        val = np.empty(flat.shape)
        der = np.empty(flat.shape)
        for lo in range(0, len(flat), chunk):
            sl = slice(lo, lo + chunk)
            u = (flat[sl, None] - self.points) / self.a
            s = self.kappa._sigmoid(u)
            ku = s * (1.0 - s)
            val[sl] = (self.weights * ku).sum(axis=-1) / self.a
            der[sl] = (self.weights * (ku * (1.0 - 2.0 * s))).sum(axis=-1) / self.a**2
        return val.reshape(z.shape), der.reshape(z.shape)

    def total_mass(self):
        return float(self.weights.sum())

    def interpolators(self, lo, hi, size=4096):
        grid = np.linspace(lo, hi, size)
        val, der = self.value_and_deriv(grid)
        return CubicSpline(grid, val), CubicSpline(grid, der)


def split_density_estimates(residuals, a: float):
    """The three residual density estimates f1, f2, f3 of the split scheme.

    f1 uses first-half residuals from the first-half smoother (weight 1/m),
    f2 the second-half residuals from the second-half smoother (1/(n-m)), and
    f3 pools the crosswise residuals with weight 1/n each.
    """
    residuals = np.asarray(residuals, dtype=float)
    n = residuals.shape[1]
    m = n // 2
    f1 = LogisticKde(residuals[0, :m], np.full(m, 1.0 / m), a)
    f2 = LogisticKde(residuals[1, m:], np.full(n - m, 1.0 / (n - m)), a)
    f3 = LogisticKde(
        np.concatenate([residuals[1, :m], residuals[0, m:]]),
        np.full(n, 1.0 / n),
        a,
    )
    return f1, f2, f3


@dataclass(frozen=True)
class ScoreEstimate:
    """Score and lambda estimate built from one half's density estimate."""

    half: int
    kde: LogisticKde
    fisher_info: float

    def score(self, z):
        val, der = self.kde.value_and_deriv(z)
        return -der / (self.kde.a + val)

    def lam(self, z):
        z = np.asarray(z, dtype=float)
        return self.score(z) / self.fisher_info - z


def score_and_fisher(f1: LogisticKde, f2: LogisticKde, residuals, a: float):
    """Crosswise score estimates and the pooled Fisher information estimate."""
    residuals = np.asarray(residuals, dtype=float)
    n = residuals.shape[1]
    m = n // 2

    def raw_score(f, z):
        val, der = f.value_and_deriv(z)
        return -der / (a + val)

    j_hat = (
        np.sum(raw_score(f2, residuals[0, :m]) ** 2)
        + np.sum(raw_score(f1, residuals[1, m:]) ** 2)
    ) / n
    if j_hat < _J_FLOOR:
        raise FisherDegenerateError(
            f"estimated Fisher information {j_hat:.3g} below {_J_FLOOR:g}; "
            "correction undefined"
        )
    s1 = ScoreEstimate(half=1, kde=f1, fisher_info=float(j_hat))
    s2 = ScoreEstimate(half=2, kde=f2, fisher_info=float(j_hat))
    return s1, s2, float(j_hat)


@dataclass(frozen=True)
class CorrectionTerm:
    grid: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    fisher_info: float
    bandwidth_a: float
    bandwidth_c: float
    plan: SplitPlan

    @property
    def values(self):
        return self.c1 + self.c2

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("y,C1,C2,C\n")
            for y, a, b in zip(self.grid, self.c1, self.c2):
                fh.write(f"{float(y)!r},{float(a)!r},{float(b)!r},{float(a + b)!r}\n")

    def sidecar(self):
        return {
            "fisher_info": self.fisher_info,
            "bandwidth_a": self.bandwidth_a,
            "bandwidth_c": self.bandwidth_c,
            "split": {"n": self.plan.n, "m": self.plan.m},
        }


def correction(grid, cross: CrossFit, f3: LogisticKde, s1: ScoreEstimate,
               s2: ScoreEstimate, a: float) -> CorrectionTerm:
    """Assemble C = C1 + C2 on the grid.

    Each half averages centered f3' evaluations at y - r-hat of the other
    half's fit, weighted by the other half's lambda estimate at own residuals.
    """
    grid = np.asarray(grid, dtype=float)
    n = cross.plan.n
    m = cross.plan.m
    args_lo = float(np.min(grid) - max(cross.r1_at_x.max(), cross.r2_at_x.max()))
    args_hi = float(np.max(grid) - min(cross.r1_at_x.min(), cross.r2_at_x.min()))
    span = args_hi - args_lo
    _, d_spline = f3.interpolators(args_lo - 0.01 * span, args_hi + 0.01 * span)

    def half_term(r_other, lam_vals, size):
        evals = d_spline(grid[:, None] - r_other[None, :])   # |grid| x size
        centered = evals - evals.mean(axis=1, keepdims=True)
        return centered @ lam_vals / n

    c1 = half_term(cross.r2_at_x[:m], s2.lam(cross.residuals[0, :m]), m)
    c2 = half_term(cross.r1_at_x[m:], s1.lam(cross.residuals[1, m:]), n - m)
    return CorrectionTerm(grid=grid, c1=c1, c2=c2, fisher_info=s1.fisher_info,
                          bandwidth_a=float(a), bandwidth_c=cross.bandwidth,
                          plan=cross.plan)


def efficient_estimate(h_hat: DensityEstimate, corr: CorrectionTerm) -> DensityEstimate:
    """The corrected estimator h-hat minus C, on the shared grid."""
    if len(h_hat.grid) != len(corr.grid) or not np.allclose(h_hat.grid, corr.grid):
        raise ValueError("h-hat and correction term grids differ")
    return DensityEstimate(
        grid=h_hat.grid,
        values=h_hat.values - corr.values,
        bandwidth=h_hat.bandwidth,
        method=Method.EFFICIENT,
        n=h_hat.n,
    )


def efficiency_correction(data: Dataset, grid, c: float, a: float,
                          w: WeightFunction) -> CorrectionTerm:
    """Full correction pipeline: crossfit, split KDEs, scores, then C."""
    cross = crossfit(data, c, w)
    f1, f2, f3 = split_density_estimates(cross.residuals, a)
    s1, s2, _ = score_and_fisher(f1, f2, cross.residuals, a)
    return correction(grid, cross, f3, s1, s2, a)
