"""Oracle-side theoretical objects: the empirical expansion terms H1/H2/H3,
the limiting correction C, influence functions, covariance kernels, and the
log-log rate fit used to quantify convergence rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenarios import Dataset, Scenario, TruthTables

__all__ = [
    "EmpiricalTerms",
    "CovarianceReport",
    "RateReport",
    "empirical_terms",
    "influence",
    "influence_moments",
    "tangent_basis",
    "gamma",
    "gamma_monte_carlo",
    "rate_fit",
]


# ---------------------------------------------------------------------------
# empirical expansion terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmpiricalTerms:
    grid: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    h3: np.ndarray
    c: np.ndarray
    eps_bar: float


def empirical_terms(data: Dataset, scenario: Scenario, truth: TruthTables,
                    grid=None) -> EmpiricalTerms:
    """Exact finite-sum evaluation of H1, H2, H3 and C on the grid.

    H1 averages f(y - r(X_j)) - h(y), H2 averages q(y - eps_j) - h(y), and H3
    is the negated error-weighted centered f' average, so that the plug-in
    estimate satisfies h-hat = h + H1 + H2 + H3 + o(1/sqrt(n)).  (Smoothing
    residuals instead of errors shifts the error-density factor by +eps_bar*h'
    and the regression-density factor by -eps_bar*h' minus the error-weighted
    f' average, so the eps-weighted term enters with a minus sign, matching
    the influence function.)  C replaces the -eps_j weight in H3 by
    +lambda(eps_j) and is the population target of the subtracted correction
    term.
    """
    data.require_truth()
    grid = truth.grid if grid is None else np.asarray(grid, dtype=float)
    if grid is not truth.grid and not np.array_equal(grid, truth.grid):
        raise ValueError("truth tables must be tabulated on the requested grid")
    err = scenario.error
    f_at = err.pdf(grid[:, None] - data.r_x[None, :])
    fp_at = err.pdf_d1(grid[:, None] - data.r_x[None, :])
    q_at = np.stack([scenario.q(y - data.eps) for y in grid]) \
        if scenario.regression.inverse is not None else None
    if q_at is None:
        raise ValueError("H2 requires an invertible regression function (q)")
    n = data.n
    h1 = f_at.mean(axis=1) - truth.h
    h2 = q_at.mean(axis=1) - truth.h
    centered_fp = fp_at - truth.h1[:, None]
    h3 = -(centered_fp @ data.eps) / n
    c = centered_fp @ err.lam(data.eps) / n
    return EmpiricalTerms(grid=grid, h1=h1, h2=h2, h3=h3, c=c,
                          eps_bar=float(np.mean(data.eps)))


# ---------------------------------------------------------------------------
# influence functions
# ---------------------------------------------------------------------------

def influence(scenario: Scenario, x, y_point: float, eps):
    """Influence function I and its tangent-space projection I* at (x, eps).

    Both are evaluated for the response-density functional at y_point; the
    projection requires finite positive Fisher information.
    """
    err = scenario.error
    x = np.asarray(x, dtype=float)
    eps = np.asarray(eps, dtype=float)
    h_y = float(scenario.h(y_point))
    hp_y = float(scenario.h(y_point, 1))
    rx = scenario.regression.func(x)
    f_term = err.pdf(y_point - rx) - h_y
    q_term = scenario.q(y_point - eps) - h_y
    fp_term = err.pdf_d1(y_point - rx) - hp_y
    i_plain = q_term + f_term - eps * fp_term
    if not np.isfinite(err.fisher_info) or err.fisher_info <= 0:
        raise ValueError("projection unavailable: Fisher information not finite")
    d_y = float(scenario.d(y_point))
    ell = err.score(eps)
    i_star = (
        f_term
        + (q_term - d_y * ell)
        + (d_y - fp_term / err.fisher_info) * ell
    )
    return i_plain, i_star


def influence_moments(scenario: Scenario, y_point: float, basis=None,
                      x_panels=32, e_panels=64, tail=1e-12):
    """Quadrature moments of (I, I*) at y_point: means, variances, and the
    inner products E[(I - I*) t] for each tangent-basis element t.

    Error panels are split where q(y - eps) crosses the response-range edges,
    which is where the integrand loses smoothness.
    """
    err = scenario.error
    x, wx = _gl_nodes(0.0, 1.0, panels=x_panels)
    lo, hi = float(err.ppf(tail)), float(err.ppf(1.0 - tail))
    r0, r1 = scenario.r_range()
    z, wz = _gl_nodes(lo, hi, panels=e_panels,
                      breakpoints=(y_point - r1, y_point - r0))
    xx, zz = np.meshgrid(x, z, indexing="ij")
    weight = np.outer(wx * scenario.covariate.pdf(x), wz * err.pdf(z))
    i_plain, i_star = influence(scenario, xx.ravel(), y_point, zz.ravel())
    i_plain = i_plain.reshape(xx.shape)
    i_star = i_star.reshape(xx.shape)

    def mean(a):
        return float((a * weight).sum())

    out = {
        "mean_i": mean(i_plain),
        "mean_i_star": mean(i_star),
        "var_i": mean(i_plain**2) - mean(i_plain) ** 2,
        "var_i_star": mean(i_star**2) - mean(i_star) ** 2,
    }
    if basis is not None:
        diff = i_plain - i_star
        out["orthogonality"] = [mean(diff * t(xx, zz)) for t in basis]
    return out


def tangent_basis(scenario: Scenario, count=12):
    """Polynomial tangent-space directions alpha(X) + beta(eps) + gamma(X)l(eps).

    Returns callables t(x, eps).  alpha is centered under g, beta is centered
    under f and orthogonal to eps, gamma is unconstrained.
    """
    err = scenario.error
    cov = scenario.covariate

    xq, wxq = _gl_nodes(0.0, 1.0, panels=16)
    gxq = wxq * cov.pdf(xq)
    zq, wzq = _gl_nodes(float(err.ppf(1e-14)), float(err.ppf(1.0 - 1e-14)),
                        panels=128)
    fzq = wzq * err.pdf(zq)

    def moment_x(k):
        return float((xq**k * gxq).sum())

    def moment_e(k):
        return float((zq**k * fzq).sum())

    basis = []
    for k in range(1, 5):
        mu = moment_x(k)
        basis.append(lambda x, e, k=k, mu=mu: x**k - mu)
    # beta: center z^k under f and project out the linear direction
    m2 = moment_e(2)
    for k in range(2, 6):
        mk = moment_e(k)
        mk1 = moment_e(k + 1)
        basis.append(
            lambda x, e, k=k, mk=mk, cvar=mk1 / m2:
            e**k - mk - cvar * e
        )
    for k in range(0, 4):
        basis.append(lambda x, e, k=k: x**k * err.score(e))
    return basis[:count]


# ---------------------------------------------------------------------------
# covariance kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CovarianceReport:
    grid: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    gamma3: np.ndarray
    sigma2: float
    method: str

    @property
    def gamma(self):
        return self.gamma1 + self.gamma2 + self.sigma2 * self.gamma3


def _gl_nodes(lo, hi, panels=64, order=16, breakpoints=()):
    """Composite Gauss-Legendre nodes; panel edges include any breakpoints.

    Breakpoints let integrands with interior kinks or jumps (the compactly
    supported q) be integrated to quadrature accuracy.
    """
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    extra = [b for b in breakpoints if lo < b < hi]
    if extra:
        edges = np.unique(np.concatenate([edges, np.asarray(extra, dtype=float)]))
    mids = 0.5 * (edges[:-1] + edges[1:])
    halves = 0.5 * np.diff(edges)
    x = (mids[:, None] + halves[:, None] * nodes[None, :]).ravel()
    w = (halves[:, None] * weights[None, :]).ravel()
    return x, w


def gamma(scenario: Scenario, grid) -> CovarianceReport:
    """Covariance kernels Gamma_1, Gamma_2, Gamma_3 by quadrature.

    Gamma_1 and Gamma_3 integrate over the covariate, Gamma_2 over the error.
    """
    grid = np.asarray(grid, dtype=float)
    err = scenario.error
    x, wx = _gl_nodes(0.0, 1.0)
    gx = scenario.covariate.pdf(x)
    rx = scenario.regression.func(x)
    f_mat = err.pdf(grid[:, None] - rx[None, :])
    fp_mat = err.pdf_d1(grid[:, None] - rx[None, :])
    h_vec = f_mat @ (wx * gx)
    hp_vec = fp_mat @ (wx * gx)
    gamma1 = (f_mat * (wx * gx)) @ f_mat.T - np.outer(h_vec, h_vec)
    gamma3 = (fp_mat * (wx * gx)) @ fp_mat.T - np.outer(hp_vec, hp_vec)

    lo, hi = float(err.ppf(1e-12)), float(err.ppf(1.0 - 1e-12))
    # q(y - z) jumps where y - z leaves the response range; split panels there
    r0, r1 = scenario.r_range()
    breaks = np.concatenate([grid - r0, grid - r1])
    z, wz = _gl_nodes(lo, hi, panels=256, breakpoints=breaks)
    fz = err.pdf(z)
    q_mat = np.stack([scenario.q(y - z) for y in grid])
    qh = q_mat @ (wz * fz)
    gamma2 = (q_mat * (wz * fz)) @ q_mat.T - np.outer(qh, qh)
    if not np.isfinite(err.sigma2):
        raise ValueError("Gamma requires a finite error variance")
    return CovarianceReport(grid=grid, gamma1=gamma1, gamma2=gamma2,
                            gamma3=gamma3, sigma2=err.sigma2, method="quadrature")


def gamma_monte_carlo(scenario: Scenario, grid, draws=100_000, seed=0):
    """Monte Carlo covariance of H(y) draws; cross-check for gamma()."""
    from .scenarios import rng_for

    grid = np.asarray(grid, dtype=float)
    rng_x = rng_for(seed, stream=10)
    rng_e = rng_for(seed, stream=11)
    x = scenario.covariate.draw(rng_x, draws)
    eps = scenario.error.draw(rng_e, draws)
    rx = scenario.regression.func(x)
    err = scenario.error
    hp = scenario.h(grid, 1)
    big_h = (
        err.pdf(grid[:, None] - rx[None, :])
        + np.stack([scenario.q(y - eps) for y in grid])
        - eps[None, :] * (err.pdf_d1(grid[:, None] - rx[None, :]) - hp[:, None])
    )
    return np.cov(big_h), big_h.shape[1]


# ---------------------------------------------------------------------------
# rate fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateReport:
    ns: np.ndarray
    medians: np.ndarray
    q25: np.ndarray
    q75: np.ndarray
    slope: float
    slope_se: float
    errors: list          # per-n replication sup-errors

    def as_dict(self):
        return {
            "n": self.ns.tolist(),
            "median": self.medians.tolist(),
            "q25": self.q25.tolist(),
            "q75": self.q75.tolist(),
            "slope": self.slope,
            "slope_se": self.slope_se,
        }


def rate_fit(per_n_errors: dict) -> RateReport:
    """OLS slope of log median sup-error against log n."""
    if len(per_n_errors) < 4:
        raise ValueError("rate fit needs at least 4 sample sizes")
    ns = np.array(sorted(per_n_errors))
    errors = [np.asarray(per_n_errors[n], dtype=float) for n in ns]
    med = np.array([np.median(e) for e in errors])
    q25 = np.array([np.quantile(e, 0.25) for e in errors])
    q75 = np.array([np.quantile(e, 0.75) for e in errors])
    lx, ly = np.log(ns.astype(float)), np.log(med)
    design = np.stack([np.ones_like(lx), lx], axis=1)
    coef, res, *_ = np.linalg.lstsq(design, ly, rcond=None)
    fitted = design @ coef
    dof = max(len(ns) - 2, 1)
    s2 = float(np.sum((ly - fitted) ** 2)) / dof
    cov = s2 * np.linalg.inv(design.T @ design)
    return RateReport(ns=ns, medians=med, q25=q25, q75=q75,
                      slope=float(coef[1]), slope_se=float(np.sqrt(cov[1, 1])),
                      errors=[e.tolist() for e in errors])
