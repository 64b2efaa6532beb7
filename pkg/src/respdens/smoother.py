"""Local quadratic weighted least squares smoother and residual extraction.

At each evaluation point x the estimator solves the 3x3 normal equation
Wbar(x) beta = Vbar(x) built from the basis (1, u, u^2) with u = (X_j - x)/c
and weights w(u).  The regression estimate is the intercept beta[0].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from .scenarios import Dataset

__all__ = [
    "WeightFunction",
    "quartic_weight",
    "LocalFit",
    "SmootherFit",
    "DegenerateWindowError",
    "fit_at",
    "fit_all",
    "smoother_fit_to_csv",
]

# relative eigenvalue cutoff for the pseudo-inverse and the condition trigger
_EIG_CUTOFF = 1e-10
_COND_TRIGGER = 1e12


class DegenerateWindowError(ValueError):
    """No observation falls inside [x - c, x + c] for some evaluation point."""

    def __init__(self, points):
        self.points = list(np.atleast_1d(points))
        super().__init__(
            f"degenerate smoother window: no data within bandwidth of x = {self.points}"
        )


@dataclass(frozen=True)
class WeightFunction:
    """Symmetric polynomial density on [-1, 1] used as smoother weight."""

    coeffs: np.ndarray  # ascending, in the local variable u

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        out = P.polyval(u, self.coeffs)
        return np.where(np.abs(u) <= 1.0, out, 0.0)

    def deriv(self, u, order=1):
        u = np.asarray(u, dtype=float)
        out = P.polyval(u, P.polyder(self.coeffs, order))
        return np.where(np.abs(u) <= 1.0, out, 0.0)


def quartic_weight() -> WeightFunction:
    """w(u) = (315/256)(1 - u^2)^4; C^3 at the support edges."""
    return WeightFunction(coeffs=315.0 / 256.0 * P.polypow([1.0, 0.0, -1.0], 4))


@dataclass(frozen=True)
class LocalFit:
    x: float
    beta: np.ndarray            # (intercept, scaled slope, scaled curvature)
    gram: np.ndarray            # Wbar(x)
    rhs: np.ndarray             # Vbar(x)
    used_pseudo_inverse: bool
    condition_number: float

    @property
    def value(self):
        return float(self.beta[0])


@dataclass(frozen=True)
class SmootherFit:
    bandwidth: float
    x: np.ndarray
    y: np.ndarray
    r_hat: np.ndarray           # at the sample points
    residuals: np.ndarray
    grid: np.ndarray
    r_hat_grid: np.ndarray
    pseudo_inverse_flags: np.ndarray   # at sample then grid points
    condition_numbers: np.ndarray

    @property
    def n(self):
        return len(self.x)


def _solve_batch(gram, rhs):
    """Solve 3x3 systems via eigendecomposition with a relative cutoff.

    Eigenvalues below _EIG_CUTOFF * max are zeroed, which yields the
    minimum-norm solution for rank-deficient windows.
    """
    vals, vecs = np.linalg.eigh(gram)
    vmax = vals[..., -1]
    tiny = vals <= _EIG_CUTOFF * vmax[..., None]
    inv = np.where(tiny, 0.0, np.divide(1.0, vals, where=~tiny))
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(vals[..., 0] > 0, vmax / vals[..., 0], np.inf)
    pseudo = np.any(tiny, axis=-1) | (cond > _COND_TRIGGER)
    proj = np.einsum("...ij,...j->...ij", vecs, inv)
    beta = np.einsum("...ij,...kj,...k->...i", proj, vecs, rhs)
    return beta, pseudo, cond


def _moments_at(x_sorted, y_sorted, c, w, points, chunk=2048):
    """Gram matrices and right-hand sides at all evaluation points, batched."""
    points = np.asarray(points, dtype=float)
    n = len(x_sorted)
    start = np.searchsorted(x_sorted, points - c, side="left")
    end = np.searchsorted(x_sorted, points + c, side="right")
    if np.any(end <= start):
        raise DegenerateWindowError(points[end <= start])
    s = np.empty((5, len(points)))
    t = np.empty((3, len(points)))
    for lo in range(0, len(points), chunk):
        hi = min(lo + chunk, len(points))
        pts = points[lo:hi]
        st, en = start[lo:hi], end[lo:hi]
        maxw = int(np.max(en - st))
        idx = st[:, None] + np.arange(maxw)[None, :]
        valid = idx < en[:, None]
        np.minimum(idx, n - 1, out=idx)
        u = x_sorted[idx]
        u -= pts[:, None]
        u /= c
        wt = P.polyval(u, w.coeffs)
        wt *= valid
        wy = wt * y_sorted[idx]
        s[0, lo:hi] = wt.sum(axis=1)
        t[0, lo:hi] = wy.sum(axis=1)
        for k in range(1, 5):
            wt *= u
            s[k, lo:hi] = wt.sum(axis=1)
            if k < 3:
                wy *= u
                t[k, lo:hi] = wy.sum(axis=1)
    s /= n * c
    t /= n * c
    gram = np.empty((len(points), 3, 3))
    for i in range(3):
        for j in range(3):
            gram[:, i, j] = s[i + j]
    rhs = t.T.copy()
    return gram, rhs


def fit_at(data: Dataset, c: float, w: WeightFunction, x: float) -> LocalFit:
    """Local quadratic fit at a single point; reference implementation."""
    if c <= 0:
        raise ValueError("bandwidth must be positive")
    order = np.argsort(data.x, kind="stable")
    xs, ys = data.x[order], data.y[order]
    gram, rhs = _moments_at(xs, ys, c, w, np.array([float(x)]))
    beta, pseudo, cond = _solve_batch(gram, rhs)
    return LocalFit(
        x=float(x),
        beta=beta[0],
        gram=gram[0],
        rhs=rhs[0],
        used_pseudo_inverse=bool(pseudo[0]),
        condition_number=float(cond[0]),
    )


def fit_all(data: Dataset, c: float, w: WeightFunction, grid=None) -> SmootherFit:
    """Fit at every sample point and every grid point; extract residuals."""
    if c <= 0:
        raise ValueError("bandwidth must be positive")
    grid = np.asarray([] if grid is None else grid, dtype=float)
    order = np.argsort(data.x, kind="stable")
    xs, ys = data.x[order], data.y[order]
    points = np.concatenate([data.x, grid])
    gram, rhs = _moments_at(xs, ys, c, w, points)
    beta, pseudo, cond = _solve_batch(gram, rhs)
    r_hat = beta[: data.n, 0]
    return SmootherFit(
        bandwidth=float(c),
        x=data.x,
        y=data.y,
        r_hat=r_hat,
        residuals=data.y - r_hat,
        grid=grid,
        r_hat_grid=beta[data.n :, 0],
        pseudo_inverse_flags=pseudo,
        condition_numbers=cond,
    )


def smoother_fit_to_csv(fit: SmootherFit, path, r_true=None):
    """Export sample-point fits as CSV (x, r_true?, r_hat, residual, flag)."""
    cols = [fit.x, fit.r_hat, fit.residuals,
            fit.pseudo_inverse_flags[: fit.n].astype(int)]
    header = ["x", "r_hat", "residual", "pseudo_inverse_flag"]
    if r_true is not None:
        cols.insert(1, np.asarray(r_true, dtype=float))
        header.insert(1, "r_true")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(str(int(v)) if isinstance(v, (int, np.integer))
                              else repr(float(v)) for v in row) + "\n")
