"""Command-line front end: simulate | estimate | rates | efficiency |
covariance | check.

A single JSON document configures a run; command-line flags override its
fields.  Exit codes: 0 success, 2 configuration error, 3 numerical failure
(degenerate Fisher information, singular design), 4 invariant failure.
"""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np

from . import __version__
from .asymptotics import (gamma, gamma_monte_carlo, influence,
                          influence_moments, rate_fit, tangent_basis)
from .density import EstimatorConfig, estimate_pipeline
from .efficiency import (FisherDegenerateError, efficiency_correction,
                         efficient_estimate)
from .experiments import (StudyConfig, collapse_study, default_workers,
                          rate_study, smoother_design_matrix, study_grid,
                          variance_study)
from .kernels import (BandwidthKind, BandwidthRule, _make_kernel,
                      make_third_order_kernel, self_convolve)
from .report import ReportWriter, curve_plot, heatmap_plot, rate_plot, sha256_file
from .scenarios import Dataset, builtin_names, builtin_scenario
from .smoother import DegenerateWindowError, fit_all, quartic_weight

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INVARIANT = 4

NUMERICAL_ERRORS = (FisherDegenerateError, DegenerateWindowError,
                    np.linalg.LinAlgError)


class ConfigError(click.ClickException):
    exit_code = EXIT_CONFIG


def _fail_numerical(exc):
    click.echo(f"numerical failure: {exc}", err=True)
    sys.exit(EXIT_NUMERICAL)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    return doc


def _merged(config_path, **flags):
    """JSON config overlaid by any flags the user actually passed."""
    merged = _load_config(config_path)
    for key, value in flags.items():
        if value is not None and value != ():
            merged[key] = value
    return merged


def _require(cfg, key, caster=None):
    if key not in cfg or cfg[key] is None:
        raise ConfigError(f"missing required setting {key!r} "
                          "(flag or config field; no implicit default)")
    value = cfg[key]
    if caster is not None:
        try:
            value = caster(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value for {key!r}: {exc}")
    return value


def _get_scenario(cfg):
    name = _require(cfg, "scenario")
    if isinstance(name, str) and os.path.exists(name):
        with open(name, encoding="utf-8") as fh:
            from .scenarios import scenario_from_spec
            return scenario_from_spec(json.load(fh))
    try:
        return builtin_scenario(name)
    except (KeyError, ValueError):
        raise ConfigError(
            f"unknown scenario {name!r}; built-ins: {', '.join(builtin_names())}"
        )


def _get_ns(cfg, minimum=1):
    ns = _require(cfg, "ns")
    if isinstance(ns, str):
        ns = [int(v) for v in ns.split(",")]
    ns = [int(v) for v in ns]
    if len(ns) < minimum:
        raise ConfigError(f"need at least {minimum} sample sizes")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ConfigError("sample sizes must be strictly increasing")
    return ns


def _study_config(cfg):
    kwargs = {}
    for key in ("baseline_const", "convolution_const", "smoother_const",
                "score_const", "grid_size", "fft_size"):
        if key in cfg and cfg[key] is not None:
            kwargs[key] = cfg[key]
    return StudyConfig(**kwargs)


def _workers(cfg):
    return int(cfg.get("workers") or default_workers())


@click.group()
@click.version_option(__version__, prog_name="respdens")
def main():
    """Convolution-type response density estimation and its Monte Carlo studies."""


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--scenario", type=str)
@click.option("--n", type=int)
@click.option("--seed", type=int)
@click.option("--rep", type=int)
@click.option("--oracle", is_flag=True, default=None,
              help="Include the hidden error and regression columns.")
@click.option("--out", type=click.Path())
def simulate(config_path, scenario, n, seed, rep, oracle, out):
    """Draw one dataset and write it as CSV with a manifest."""
    cfg = _merged(config_path, scenario=scenario, n=n, seed=seed, rep=rep,
                  oracle=oracle, out=out)
    sc = _get_scenario(cfg)
    n = _require(cfg, "n", int)
    seed = _require(cfg, "seed", int)
    rep = int(cfg.get("rep") or 0)
    if n < 1:
        raise ConfigError("n must be positive")
    data = sc.sample(n, seed, rep=rep)
    writer = ReportWriter(cfg.get("out", "out"), _jsonable(cfg))
    if cfg.get("oracle"):
        writer.csv("dataset.csv", ["x", "y", "eps", "r_x"],
                   [data.x, data.y, data.eps, data.r_x])
    else:
        writer.csv("dataset.csv", ["x", "y"], [data.x, data.y])
    writer.json("dataset.json", {
        "scenario": sc.name, "n": n, "seed": seed, "rep": rep,
        "oracle": bool(cfg.get("oracle")),
    })
    writer.finish()
    click.echo(f"wrote {writer.path('dataset.csv')}")


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------

def _load_dataset_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    cols = {name: table[:, i] for i, name in enumerate(header)}
    if "x" not in cols or "y" not in cols:
        raise ConfigError(f"dataset {path} must have x and y columns")
    return Dataset(x=cols["x"], y=cols["y"], eps=cols.get("eps"),
                   r_x=cols.get("r_x"), seed=-1, rep=0, scenario_name="external")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--data", type=click.Path(exists=True), help="Dataset CSV (x,y).")
@click.option("--scenario", type=str)
@click.option("--n", type=int)
@click.option("--seed", type=int)
@click.option("--path", "est_path", type=click.Choice(["direct", "fft"]))
@click.option("--efficient", is_flag=True, default=None)
@click.option("--grid-size", type=int)
@click.option("--fft-size", type=int)
@click.option("--convolution-const", type=float)
@click.option("--smoother-const", type=float)
@click.option("--score-const", type=float)
@click.option("--out", type=click.Path())
def estimate(config_path, data, scenario, n, seed, est_path, efficient,
             grid_size, fft_size, convolution_const, smoother_const,
             score_const, out):
    """Run the smoother + convolution estimator pipeline on one dataset."""
    cfg = _merged(config_path, data=data, scenario=scenario, n=n, seed=seed,
                  path=est_path, efficient=efficient, grid_size=grid_size,
                  fft_size=fft_size, convolution_const=convolution_const,
                  smoother_const=smoother_const, score_const=score_const,
                  out=out)
    if cfg.get("data"):
        ds = _load_dataset_csv(cfg["data"])
    else:
        sc = _get_scenario(cfg)
        ds = sc.sample(_require(cfg, "n", int), _require(cfg, "seed", int))
    study = _study_config(cfg)
    est_cfg = EstimatorConfig(
        b_rule=BandwidthRule(BandwidthKind.CONVOLUTION, study.convolution_const),
        c_rule=BandwidthRule(BandwidthKind.SMOOTHER, study.smoother_const),
        path=cfg.get("path", "fft"),
        grid_size=int(cfg.get("grid_size") or 1024),
        fft_size=int(cfg.get("fft_size") or 8192),
    )
    writer = ReportWriter(cfg.get("out", "out"), _jsonable(cfg))
    try:
        result = estimate_pipeline(ds, est_cfg)
    except NUMERICAL_ERRORS as exc:
        _fail_numerical(exc)
    grid = result.h_hat.grid
    writer.csv("f_hat.csv", ["y", "value"], [grid, result.f_hat.values])
    writer.csv("q_hat.csv", ["y", "value"], [grid, result.q_hat.values])
    writer.csv("h_hat.csv", ["y", "value"], [grid, result.h_hat.values])
    curves = {"residual density": result.f_hat.values,
              "surrogate density": result.q_hat.values,
              "response density": result.h_hat.values}
    metadata = dict(result.metadata)
    if cfg.get("efficient"):
        a = BandwidthRule(BandwidthKind.SCORE, study.score_const).value_for(ds.n)
        try:
            corr = efficiency_correction(
                ds, grid, est_cfg.c_rule.value_for(ds.n), a, quartic_weight())
        except NUMERICAL_ERRORS as exc:
            _fail_numerical(exc)
        corrected = efficient_estimate(result.h_hat, corr)
        writer.csv("correction.csv", ["y", "C1", "C2", "C"],
                   [grid, corr.c1, corr.c2, corr.values])
        writer.csv("h_corrected.csv", ["y", "value"], [grid, corrected.values])
        curves["corrected response density"] = corrected.values
        sup_c = float(np.sqrt(ds.n) * np.max(np.abs(corr.values)))
        metadata.update({
            "fisher_info": corr.fisher_info,
            "bandwidth_a": a,
            "scaled_sup_correction": sup_c,
            "near_normal": sup_c < float(cfg.get("near_normal_threshold", 0.5)),
        })
    writer.json("metadata.json", _jsonable(metadata))
    writer.figure("estimate.svg", curve_plot(grid, curves, "density estimates"))
    writer.finish()
    click.echo(f"h integral: {metadata['h_integral']:.6f}")


# ---------------------------------------------------------------------------
# rates
# ---------------------------------------------------------------------------

@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--scenario", type=str)
@click.option("--ns", type=str, help="Comma-separated increasing sample sizes.")
@click.option("--reps", type=int)
@click.option("--seed", type=int)
@click.option("--estimators", type=str,
              help="Comma-separated subset of baseline,convolution,oracle,efficient.")
@click.option("--workers", type=int)
@click.option("--baseline-const", type=float)
@click.option("--convolution-const", type=float)
@click.option("--smoother-const", type=float)
@click.option("--score-const", type=float)
@click.option("--out", type=click.Path())
def rates(config_path, scenario, ns, reps, seed, estimators, workers,
          baseline_const, convolution_const, smoother_const, score_const, out):
    """Monte Carlo sup-error rate study with log-log slope fits."""
    cfg = _merged(config_path, scenario=scenario, ns=ns, reps=reps, seed=seed,
                  estimators=estimators, workers=workers,
                  baseline_const=baseline_const,
                  convolution_const=convolution_const,
                  smoother_const=smoother_const, score_const=score_const,
                  out=out)
    sc = _get_scenario(cfg)
    ns = _get_ns(cfg, minimum=4)
    reps = _require(cfg, "reps", int)
    seed = _require(cfg, "seed", int)
    if reps < 1:
        raise ConfigError("reps must be at least 1")
    ests = cfg.get("estimators", "baseline,convolution")
    if isinstance(ests, str):
        ests = tuple(s.strip() for s in ests.split(","))
    bad = set(ests) - {"baseline", "convolution", "oracle", "efficient"}
    if bad:
        raise ConfigError(f"unknown estimators: {sorted(bad)}")
    study = _study_config(cfg)
    writer = ReportWriter(cfg.get("out", "out"), _jsonable(cfg))
    try:
        res = rate_study(sc, ns, reps, seed, estimators=ests, config=study,
                         workers=_workers(cfg))
    except NUMERICAL_ERRORS as exc:
        _fail_numerical(exc)
    reports = {}
    summary = {}
    for est in ests:
        table = res["errors"][est]
        rows_n, rows_rep, rows_err = [], [], []
        for nval in ns:
            for rep, err in enumerate(table[nval]):
                rows_n.append(nval); rows_rep.append(rep); rows_err.append(err)
        writer.csv(f"errors_{est}.csv", ["n", "rep", "sup_error"],
                   [rows_n, rows_rep, rows_err])
        rep_fit = rate_fit(table)
        reports[est] = rep_fit
        summary[est] = rep_fit.as_dict()
        writer.csv(f"plot_data_{est}.csv", ["log_n", "log_median_error"],
                   [np.log(rep_fit.ns.astype(float)), np.log(rep_fit.medians)])
    writer.json("rate_report.json", _jsonable(summary))
    writer.figure("rates.svg", rate_plot(reports))
    writer.finish()
    for est in ests:
        click.echo(f"{est}: slope {summary[est]['slope']:.4f} "
                   f"(se {summary[est]['slope_se']:.4f})")


# ---------------------------------------------------------------------------
# efficiency
# ---------------------------------------------------------------------------

@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--scenario", type=str)
@click.option("--n", type=int)
@click.option("--reps", type=int)
@click.option("--seed", type=int)
@click.option("--y0", type=float)
@click.option("--collapse-ns", type=str,
              help="Optional comma-separated n ladder for the collapse study.")
@click.option("--workers", type=int)
@click.option("--smoother-const", type=float)
@click.option("--convolution-const", type=float)
@click.option("--score-const", type=float)
@click.option("--out", type=click.Path())
def efficiency(config_path, scenario, n, reps, seed, y0, collapse_ns, workers,
               smoother_const, convolution_const, score_const, out):
    """Pointwise variance comparison of the corrected and plain estimators."""
    cfg = _merged(config_path, scenario=scenario, n=n, reps=reps, seed=seed,
                  y0=y0, collapse_ns=collapse_ns, workers=workers,
                  smoother_const=smoother_const,
                  convolution_const=convolution_const,
                  score_const=score_const, out=out)
    sc = _get_scenario(cfg)
    n = _require(cfg, "n", int)
    reps = _require(cfg, "reps", int)
    seed = _require(cfg, "seed", int)
    y0 = _require(cfg, "y0", float)
    study = _study_config(cfg)
    writer = ReportWriter(cfg.get("out", "out"), _jsonable(cfg))
    try:
        res = variance_study(sc, n, reps, seed, y0, with_correction=True,
                             config=study, workers=_workers(cfg))
    except NUMERICAL_ERRORS as exc:
        _fail_numerical(exc)
    h_true = float(sc.h(y0))
    plain = np.sqrt(n) * (res["h_hat"] - h_true)
    corrected = np.sqrt(n) * (res["corrected"] - h_true)
    moments = influence_moments(sc, y0)
    summary = {
        "scenario": sc.name, "n": n, "reps": reps, "y0": y0,
        "h_true": h_true,
        "var_plain": float(np.var(plain, ddof=1)),
        "var_corrected": float(np.var(corrected, ddof=1)),
        "var_influence": moments["var_i"],
        "var_influence_projected": moments["var_i_star"],
        "fisher_median": float(np.median(res["fisher"])),
        "fisher_true": float(sc.error.fisher_info),
    }
    writer.csv("efficiency.csv", ["rep", "h_hat", "corrected", "fisher"],
               [np.arange(reps), res["h_hat"], res["corrected"], res["fisher"]])
    if cfg.get("collapse_ns"):
        ladder = [int(v) for v in str(cfg["collapse_ns"]).split(",")]
        col = collapse_study(sc, ladder, reps, seed, config=study,
                             workers=_workers(cfg))
        rows_n, rows_rep, rows_v = [], [], []
        for nval in ladder:
            for rep, v in enumerate(col[nval]):
                rows_n.append(nval); rows_rep.append(rep); rows_v.append(v)
        writer.csv("collapse.csv", ["n", "rep", "scaled_sup_correction"],
                   [rows_n, rows_rep, rows_v])
        summary["collapse_medians"] = {
            str(nval): float(np.median(col[nval])) for nval in ladder}
    writer.json("efficiency.json", _jsonable(summary))
    writer.finish()
    click.echo(f"var plain {summary['var_plain']:.5f} vs corrected "
               f"{summary['var_corrected']:.5f} "
               f"(limits {summary['var_influence']:.5f} / "
               f"{summary['var_influence_projected']:.5f})")


# ---------------------------------------------------------------------------
# covariance
# ---------------------------------------------------------------------------

@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--scenario", type=str)
@click.option("--y-min", type=float)
@click.option("--y-max", type=float)
@click.option("--points", type=int)
@click.option("--mc-draws", type=int, help="0 skips the Monte Carlo cross-check.")
@click.option("--seed", type=int)
@click.option("--out", type=click.Path())
def covariance(config_path, scenario, y_min, y_max, points, mc_draws, seed, out):
    """Limit covariance kernel Gamma by quadrature, with optional MC check."""
    cfg = _merged(config_path, scenario=scenario, y_min=y_min, y_max=y_max,
                  points=points, mc_draws=mc_draws, seed=seed, out=out)
    sc = _get_scenario(cfg)
    points = int(cfg.get("points") or 41)
    if points < 2:
        raise ConfigError("points must be at least 2")
    if cfg.get("y_min") is not None and cfg.get("y_max") is not None:
        lo, hi = float(cfg["y_min"]), float(cfg["y_max"])
    else:
        lo, hi = sc.response_range(1e-6)
    grid = np.linspace(lo, hi, points)
    writer = ReportWriter(cfg.get("out", "out"), _jsonable(cfg))
    try:
        rep = gamma(sc, grid)
    except NUMERICAL_ERRORS as exc:
        _fail_numerical(exc)
    total = rep.gamma
    header = ["s"] + [repr(float(t)) for t in grid]
    writer.csv("gamma.csv", header, [grid] + [total[:, j] for j in range(points)])
    summary = {
        "scenario": sc.name,
        "grid": grid.tolist(),
        "sigma2": rep.sigma2,
        "diag": np.diag(total).tolist(),
        "method": rep.method,
    }
    draws = int(cfg.get("mc_draws") or 0)
    if draws:
        mc, used = gamma_monte_carlo(sc, grid, draws=draws,
                                     seed=int(cfg.get("seed") or 0))
        summary["mc_draws"] = used
        summary["mc_max_abs_diff"] = float(np.max(np.abs(mc - total)))
    writer.json("covariance.json", _jsonable(summary))
    writer.figure("gamma.svg", heatmap_plot(grid, total, "limit covariance"))
    writer.finish()
    click.echo(f"Gamma diagonal max {float(np.max(np.diag(total))):.5f}")


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def _injected_kernel(inject):
    k = make_third_order_kernel()
    if inject == "kernel-moment2":
        # add 0.05 (u^2 - 1/3): zero mass and first moment, nonzero second
        coeffs = [np.array(c, dtype=float) for c in k.coeffs]
        coeffs[0][0] -= 0.05 / 3.0
        coeffs[0][2] += 0.05
        return _make_kernel(k.breaks, coeffs)
    raise ConfigError(f"unknown injection {inject!r}")


def _run_checks(kernel):
    """The cross-module invariant suite; returns a list of check dicts."""
    from .scenarios import rng_for, truth, validate

    checks = []

    def add(name, passed, value, tolerance, detail=""):
        checks.append({
            "name": name,
            "passed": bool(passed),
            "value": float(value),
            "tolerance": float(tolerance),
            "detail": detail,
        })

    # kernel moments
    for m, target in ((0, 1.0), (1, 0.0), (2, 0.0)):
        val = abs(kernel.moment(m) - target)
        add(f"kernel.order3.moment{m}", val < 1e-10, val, 1e-10)
    big = self_convolve(kernel)
    val = max(abs(big.moment(0) - 1.0), abs(big.moment(1)), abs(big.moment(2)))
    add("kernel.convolution.moments", val < 1e-10, val, 1e-10)

    # smoother exactness on random quadratics
    sc = builtin_scenario("uniform-linear")
    rng = rng_for(99, stream=7)
    worst = 0.0
    for _ in range(5):
        x = rng.random(200)
        abc = rng.normal(size=3)
        yv = abc[0] + abc[1] * x + abc[2] * x**2
        ds = Dataset(x=x, y=yv, eps=None, r_x=None, seed=99, rep=0,
                     scenario_name="synthetic")
        fit = fit_all(ds, 0.3, quartic_weight())
        worst = max(worst, float(np.max(np.abs(fit.r_hat - yv))))
    add("smoother.quadratic_exactness", worst < 1e-8, worst, 1e-8)

    # design-row identity D(x) W(x) = (1, 0, 0)
    xg = np.linspace(0.0, 1.0, 21)
    d_rows = smoother_design_matrix(sc, 0.25, xg)
    nodes, wq = np.polynomial.legendre.leggauss(32)
    worst = 0.0
    w = quartic_weight()
    for xi, drow in zip(xg, d_rows):
        lo, hi = max(-1.0, -xi / 0.25), min(1.0, (1.0 - xi) / 0.25)
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        u = mid + half * nodes
        wu = w(u) * sc.covariate.pdf(xi + 0.25 * u) * wq * half
        psi = np.stack([np.ones_like(u), u, u**2])
        mat = (psi * wu) @ psi.T
        worst = max(worst, float(np.max(np.abs(drow @ mat - [1, 0, 0]))))
    add("smoother.design_row_identity", worst < 1e-8, worst, 1e-8)

    # estimator path equivalence
    data = sc.sample(400, seed=17)
    direct = estimate_pipeline(data, EstimatorConfig(path="direct", grid_size=101))
    fft = estimate_pipeline(data, EstimatorConfig(path="fft", grid_size=101),
                            grid=direct.h_hat.grid)
    rel = float(np.max(np.abs(direct.h_hat.values - fft.h_hat.values))
                / np.max(np.abs(direct.h_hat.values)))
    add("paths.equivalence", rel < 1e-4, rel, 1e-4)

    # centering of the first expansion term summand at y = 0
    nodes64, w64 = np.polynomial.legendre.leggauss(64)
    x = 0.5 + 0.5 * nodes64
    val = abs(float((sc.error.pdf(0.0 - sc.regression.func(x))
                     * sc.covariate.pdf(x) * 0.5 * w64).sum()) - float(sc.h(0.0)))
    add("terms.centering", val < 1e-8, val, 1e-8)

    # covariance symmetry
    g = gamma(sc, np.linspace(0.0, 1.0, 9))
    val = float(np.max(np.abs(g.gamma - g.gamma.T)))
    add("gamma.symmetry", val < 1e-12, val, 1e-12)

    # influence identities
    xs, es = np.meshgrid(np.linspace(0.05, 0.95, 10), np.linspace(-2, 2, 10))
    i_plain, i_star = influence(sc, xs.ravel(), 0.5, es.ravel())
    val = float(np.max(np.abs(i_plain - i_star)))
    add("influence.normal_identity", val < 1e-10, val, 1e-10)

    sl = builtin_scenario("uniform-logistic")
    mom = influence_moments(sl, 0.8, basis=tangent_basis(sl))
    val = max(abs(mom["mean_i"]), abs(mom["mean_i_star"]))
    add("influence.centering", val < 1e-6, val, 1e-6)
    val = max(abs(v) for v in mom["orthogonality"])
    add("influence.orthogonality", val < 1e-6, val, 1e-6)

    # scenario assumption validation
    rep = validate(sc)
    add("scenario.assumptions", rep.all_pass, 0.0 if rep.all_pass else 1.0, 0.5,
        detail="uniform-linear satisfies (F), (G), (R)")
    return checks


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path())
@click.option("--manifest", type=click.Path(exists=True),
              help="Also verify artifact hashes listed in this manifest.")
@click.option("--inject", type=str, hidden=True)
def check(config_path, out, manifest, inject):
    """Run the cross-module invariant suite; exit 0 iff everything passes."""
    cfg = _merged(config_path, out=out, manifest=manifest, inject=inject)
    kernel = (_injected_kernel(cfg["inject"]) if cfg.get("inject")
              else make_third_order_kernel())
    try:
        checks = _run_checks(kernel)
    except NUMERICAL_ERRORS as exc:
        _fail_numerical(exc)
    if cfg.get("manifest"):
        with open(cfg["manifest"], encoding="utf-8") as fh:
            doc = json.load(fh)
        base = os.path.dirname(cfg["manifest"])
        bad = []
        for art in doc.get("artifacts", []):
            path = os.path.join(base, art["file"])
            ok = os.path.exists(path) and sha256_file(path) == art["sha256"]
            if not ok:
                bad.append(art["file"])
        checks.append({
            "name": "manifest.hashes",
            "passed": not bad,
            "value": float(len(bad)),
            "tolerance": 0.0,
            "detail": f"mismatched: {bad}" if bad else "",
        })
    report = {
        "version": __version__,
        "passed": all(c["passed"] for c in checks),
        "checks": checks,
    }
    writer = ReportWriter(cfg.get("out", "out"), _jsonable(cfg))
    writer.json("check_report.json", report)
    writer.finish()
    for c in checks:
        click.echo(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']} "
                   f"(value {c['value']:.3g}, tolerance {c['tolerance']:.3g})")
    if not report["passed"]:
        first = next(c["name"] for c in checks if not c["passed"])
        click.echo(f"invariant failure: {first}", err=True)
        sys.exit(EXIT_INVARIANT)


if __name__ == "__main__":
    main()
