"""Monte Carlo harnesses: rate studies, variance studies, expansion checks,
correction collapse and smoother linearization diagnostics.

Replications are independent tasks keyed by (master seed, rep index); workers
rebuild scenarios from their JSON specs, so results are identical for any
worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .asymptotics import empirical_terms
from .density import Method, convolution_fft, kde, _big_kernel_cache
from .efficiency import efficiency_correction, efficient_estimate
from .kernels import BandwidthKind, BandwidthRule, make_third_order_kernel
from .scenarios import Scenario, scenario_from_spec, scenario_to_spec, truth
from .smoother import fit_all, quartic_weight

__all__ = [
    "StudyConfig",
    "default_workers",
    "study_grid",
    "rate_study",
    "variance_study",
    "expansion_study",
    "collapse_study",
    "smoother_linearization_study",
    "smoother_design_matrix",
]

ESTIMATORS = ("baseline", "convolution", "oracle", "efficient")


def default_workers():
    env = os.environ.get("RESPDENS_WORKERS")
    return max(1, int(env)) if env else 1


@dataclass(frozen=True)
class StudyConfig:
    """Bandwidth constants and grid settings shared by the harnesses."""

    baseline_const: float = 1.0
    convolution_const: float = 1.0
    smoother_const: float = 1.0
    score_const: float = 0.16
    grid_size: int = 512
    fft_size: int = 8192
    tail: float = 1e-9

    def rules(self, kind):
        consts = {
            BandwidthKind.KDE_BASELINE: self.baseline_const,
            BandwidthKind.CONVOLUTION: self.convolution_const,
            BandwidthKind.SMOOTHER: self.smoother_const,
            BandwidthKind.SCORE: self.score_const,
        }
        return BandwidthRule(kind, consts[kind])


def study_grid(scenario: Scenario, config: StudyConfig):
    lo, hi = scenario.response_range(config.tail)
    return np.linspace(lo, hi, config.grid_size)


def _map_reps(fn, tasks, workers):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


# ---------------------------------------------------------------------------
# rate study
# ---------------------------------------------------------------------------

def _rate_rep(task):
    (spec, n, rep, seed, estimators, grid, h_true, cfg) = task
    scenario = scenario_from_spec(spec)
    data = scenario.sample(n, seed, rep=rep)
    k = make_third_order_kernel()
    K = _big_kernel_cache(k)
    out = {}
    if {"convolution", "oracle", "efficient"} & set(estimators):
        c = cfg.rules(BandwidthKind.SMOOTHER).value_for(n)
        b = cfg.rules(BandwidthKind.CONVOLUTION).value_for(n)
    if "baseline" in estimators:
        b0 = cfg.rules(BandwidthKind.KDE_BASELINE).value_for(n)
        est = kde(data.y, b0, K, grid, method=Method.BASELINE_KDE)
        out["baseline"] = float(np.max(np.abs(est.values - h_true)))
    if "oracle" in estimators:
        data.require_truth()
        est = convolution_fft(data.eps, data.r_x, k, b, grid,
                              grid_size=cfg.fft_size)
        out["oracle"] = float(np.max(np.abs(est.values - h_true)))
    if {"convolution", "efficient"} & set(estimators):
        fit = fit_all(data, c, quartic_weight())
        h_hat = convolution_fft(fit.residuals, fit.r_hat, k, b, grid,
                                grid_size=cfg.fft_size)
        if "convolution" in estimators:
            out["convolution"] = float(np.max(np.abs(h_hat.values - h_true)))
        if "efficient" in estimators:
            a = cfg.rules(BandwidthKind.SCORE).value_for(n)
            corr = efficiency_correction(data, grid, c, a, quartic_weight())
            eff = efficient_estimate(h_hat, corr)
            out["efficient"] = float(np.max(np.abs(eff.values - h_true)))
    return out


def rate_study(scenario: Scenario, ns, reps, seed, estimators=("baseline", "convolution"),
               config: StudyConfig | None = None, workers=None, grid=None,
               h_true=None):
    """Per-estimator sup-norm errors against the true h, per n and replication."""
    cfg = config or StudyConfig()
    workers = default_workers() if workers is None else workers
    grid = study_grid(scenario, cfg) if grid is None else np.asarray(grid, dtype=float)
    h_true = scenario.h(grid) if h_true is None else np.asarray(h_true, dtype=float)
    spec = scenario_to_spec(scenario)
    results = {est: {} for est in estimators}
    for n in ns:
        tasks = [(spec, int(n), rep, seed, tuple(estimators), grid, h_true, cfg)
                 for rep in range(reps)]
        rows = _map_reps(_rate_rep, tasks, workers)
        for est in estimators:
            results[est][int(n)] = [row[est] for row in rows]
    return {"grid": grid, "errors": results}


# ---------------------------------------------------------------------------
# pointwise variance study
# ---------------------------------------------------------------------------

def _variance_rep(task):
    (spec, n, rep, seed, y0, with_correction, cfg) = task
    scenario = scenario_from_spec(spec)
    data = scenario.sample(n, seed, rep=rep)
    k = make_third_order_kernel()
    c = cfg.rules(BandwidthKind.SMOOTHER).value_for(n)
    b = cfg.rules(BandwidthKind.CONVOLUTION).value_for(n)
    fit = fit_all(data, c, quartic_weight())
    grid = np.array([y0])
    h_hat = convolution_fft(fit.residuals, fit.r_hat, k, b, grid,
                            grid_size=cfg.fft_size)
    out = {"h_hat": float(h_hat.values[0])}
    if with_correction:
        a = cfg.rules(BandwidthKind.SCORE).value_for(n)
        corr = efficiency_correction(data, grid, c, a, quartic_weight())
        out["corrected"] = float(h_hat.values[0] - corr.values[0])
        out["fisher"] = corr.fisher_info
    return out


def variance_study(scenario: Scenario, n, reps, seed, y0, with_correction=False,
                   config: StudyConfig | None = None, workers=None):
    """Replicated values of h-hat(y0) (and the corrected estimate)."""
    cfg = config or StudyConfig()
    workers = default_workers() if workers is None else workers
    spec = scenario_to_spec(scenario)
    tasks = [(spec, int(n), rep, seed, float(y0), with_correction, cfg)
             for rep in range(reps)]
    rows = _map_reps(_variance_rep, tasks, workers)
    out = {"h_hat": np.array([r["h_hat"] for r in rows])}
    if with_correction:
        out["corrected"] = np.array([r["corrected"] for r in rows])
        out["fisher"] = np.array([r["fisher"] for r in rows])
    return out


# ---------------------------------------------------------------------------
# expansion checks
# ---------------------------------------------------------------------------

def _expansion_rep(task):
    (spec, n, rep, seed, grid, tt, cfg) = task
    scenario = scenario_from_spec(spec)
    data = scenario.sample(n, seed, rep=rep)
    k = make_third_order_kernel()
    c = cfg.rules(BandwidthKind.SMOOTHER).value_for(n)
    b = cfg.rules(BandwidthKind.CONVOLUTION).value_for(n)
    terms = empirical_terms(data, scenario, tt)
    fit = fit_all(data, c, quartic_weight())
    h_hat = convolution_fft(fit.residuals, fit.r_hat, k, b, grid,
                            grid_size=cfg.fft_size)
    h_tilde = convolution_fft(data.eps, data.r_x, k, b, grid,
                              grid_size=cfg.fft_size)
    resid_hat = h_hat.values - tt.h - terms.h1 - terms.h2 - terms.h3
    resid_tilde = h_tilde.values - tt.h - terms.h1 - terms.h2
    root_n = np.sqrt(n)
    return {
        "plug_in": float(root_n * np.max(np.abs(resid_hat))),
        "oracle": float(root_n * np.max(np.abs(resid_tilde))),
    }


def expansion_study(scenario: Scenario, ns, reps, seed,
                    config: StudyConfig | None = None, workers=None):
    """Medians of sqrt(n) * sup-norm expansion residuals per sample size."""
    cfg = config or StudyConfig()
    workers = default_workers() if workers is None else workers
    grid = study_grid(scenario, cfg)
    tt = truth(scenario, grid)
    spec = scenario_to_spec(scenario)
    table = {"plug_in": {}, "oracle": {}}
    for n in ns:
        tasks = [(spec, int(n), rep, seed, grid, tt, cfg) for rep in range(reps)]
        rows = _map_reps(_expansion_rep, tasks, workers)
        for key in table:
            table[key][int(n)] = [row[key] for row in rows]
    return table


# ---------------------------------------------------------------------------
# correction collapse
# ---------------------------------------------------------------------------

def _collapse_rep(task):
    (spec, n, rep, seed, grid, cfg) = task
    scenario = scenario_from_spec(spec)
    data = scenario.sample(n, seed, rep=rep)
    c = cfg.rules(BandwidthKind.SMOOTHER).value_for(n)
    a = cfg.rules(BandwidthKind.SCORE).value_for(n)
    corr = efficiency_correction(data, grid, c, a, quartic_weight())
    return float(np.sqrt(n) * np.max(np.abs(corr.values)))


def collapse_study(scenario: Scenario, ns, reps, seed,
                   config: StudyConfig | None = None, workers=None):
    """sqrt(n) * sup |C-hat| per n; collapses for normal errors."""
    cfg = config or StudyConfig()
    workers = default_workers() if workers is None else workers
    grid = study_grid(scenario, cfg)
    spec = scenario_to_spec(scenario)
    out = {}
    for n in ns:
        tasks = [(spec, int(n), rep, seed, grid, cfg) for rep in range(reps)]
        out[int(n)] = _map_reps(_collapse_rep, tasks, workers)
    return out


# ---------------------------------------------------------------------------
# smoother linearization
# ---------------------------------------------------------------------------

def smoother_design_matrix(scenario: Scenario, c: float, x_grid):
    """W(x) = E[Wbar(x)] by quadrature and D(x), the first row of its inverse."""
    w = quartic_weight()
    nodes, weights = np.polynomial.legendre.leggauss(32)
    d_rows = np.empty((len(x_grid), 3))
    for i, x in enumerate(x_grid):
        lo = max(-1.0, (0.0 - x) / c)
        hi = min(1.0, (1.0 - x) / c)
        if hi <= lo:
            raise ValueError(f"W(x) singular at x = {x}: empty weight support")
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        u = mid + half * nodes
        gu = scenario.covariate.pdf(x + c * u)
        wu = w(u) * gu * weights * half
        psi = np.stack([np.ones_like(u), u, u**2])
        mat = (psi * wu) @ psi.T
        cond = np.linalg.cond(mat)
        if not np.isfinite(cond) or cond > 1e14:
            raise ValueError(f"W(x) numerically singular at x = {x}")
        d_rows[i] = np.linalg.solve(mat, np.array([1.0, 0.0, 0.0]))
    return d_rows


def _linearization_rep(task):
    (spec, n, rep, seed, x_grid, d_rows, gx, r_grid, cfg) = task
    from .smoother import _moments_at

    scenario = scenario_from_spec(spec)
    data = scenario.sample(n, seed, rep=rep)
    c = cfg.rules(BandwidthKind.SMOOTHER).value_for(n)
    fit = fit_all(data, c, quartic_weight(), grid=x_grid)
    order = np.argsort(data.x, kind="stable")
    _, a_comp = _moments_at(data.x[order], data.eps[order], c,
                            quartic_weight(), x_grid)
    rho_hat = np.einsum("ij,ij->i", d_rows, a_comp)
    diff_grid = fit.r_hat_grid - r_grid
    eps_bar = float(np.mean(data.eps))
    root_n = np.sqrt(n)
    integral = float(np.trapezoid(diff_grid * gx, x_grid))
    return {
        "linearization": float(root_n * np.max(np.abs(diff_grid - rho_hat))),
        "mean_square": float(n * c * np.mean((fit.r_hat - data.r_x) ** 2)),
        "integral": float(root_n * abs(integral - eps_bar)),
    }


def smoother_linearization_study(scenario: Scenario, ns, reps, seed,
                                 config: StudyConfig | None = None,
                                 workers=None, grid_size=801):
    """Desk-scale checks of the smoother's uniform linearization.

    Reports sqrt(n)*sup|r-hat - r - rho-hat|, nc * mean squared error at the
    sample points, and sqrt(n)*|int (r-hat - r) g - eps-bar| per n.
    """
    cfg = config or StudyConfig()
    workers = default_workers() if workers is None else workers
    x_grid = np.linspace(0.0, 1.0, grid_size)
    gx = scenario.covariate.pdf(x_grid)
    r_grid = scenario.regression.func(x_grid)
    spec = scenario_to_spec(scenario)
    out = {"linearization": {}, "mean_square": {}, "integral": {}}
    for n in ns:
        c = cfg.rules(BandwidthKind.SMOOTHER).value_for(int(n))
        d_rows = smoother_design_matrix(scenario, c, x_grid)
        tasks = [(spec, int(n), rep, seed, x_grid, d_rows, gx, r_grid, cfg)
                 for rep in range(reps)]
        rows = _map_reps(_linearization_rep, tasks, workers)
        for key in out:
            out[key][int(n)] = [row[key] for row in rows]
    return out
