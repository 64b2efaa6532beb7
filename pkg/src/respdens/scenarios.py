"""Generative scenarios for the regression model Y = r(X) + eps.

Each scenario bundles a covariate density g on [0,1], a regression function r
with analytic derivatives, and an error density f with analytic derivatives,
distribution function, score and Fisher information.  Ground-truth quantities
(response density h and its derivatives, surrogate density q, lambda, d, ...)
are computed by quadrature against these analytic ingredients.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, stats

__all__ = [
    "Scenario",
    "Dataset",
    "TruthTables",
    "ValidationReport",
    "builtin_scenario",
    "builtin_names",
    "validate",
    "sample",
    "truth",
    "scenario_from_spec",
    "scenario_to_spec",
]

_GRID_N = 2001  # assumption-checking grid on [0, 1]


# ---------------------------------------------------------------------------
# component models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CovariateModel:
    """Covariate distribution on [0, 1]."""

    kind: str
    pdf: Callable
    cdf: Callable
    g_min: float
    g_max: float

    def draw(self, rng, n):
        if self.kind == "uniform":
            return rng.random(n)
        if self.kind == "beta22":
            return rng.beta(2.0, 2.0, size=n)
        raise ValueError(f"no sampler for covariate kind {self.kind!r}")


@dataclass(frozen=True)
class RegressionModel:
    kind: str
    func: Callable
    deriv: Callable
    deriv2: Callable
    inverse: Callable | None  # defined when r is strictly increasing


@dataclass(frozen=True)
class ErrorModel:
    """Mean-zero error density with analytic derivatives and score data."""

    kind: str
    pdf: Callable
    pdf_d1: Callable
    pdf_d2: Callable
    pdf_d3: Callable
    cdf: Callable
    ppf: Callable
    score: Callable          # ell = -f'/f
    fisher_info: float       # J = int ell^2 f; inf if undefined
    sigma2: float
    has_8_3_moment: bool

    def draw(self, rng, n):
        if self.kind == "normal":
            return rng.standard_normal(n)
        if self.kind == "logistic":
            return rng.logistic(size=n)
        if self.kind == "student-t2":
            return rng.standard_t(2.0, size=n)
        raise ValueError(f"no sampler for error kind {self.kind!r}")

    def lam(self, z):
        """lambda(z) = ell(z)/J - z; identically 0 iff f is mean-zero normal."""
        z = np.asarray(z, dtype=float)
        return self.score(z) / self.fisher_info - z


def _normal_error():
    phi = stats.norm.pdf
    return ErrorModel(
        kind="normal",
        pdf=phi,
        pdf_d1=lambda z: -z * phi(z),
        pdf_d2=lambda z: (z**2 - 1.0) * phi(z),
        pdf_d3=lambda z: (3.0 * z - z**3) * phi(z),
        cdf=stats.norm.cdf,
        ppf=stats.norm.ppf,
        score=lambda z: np.asarray(z, dtype=float),
        fisher_info=1.0,
        sigma2=1.0,
        has_8_3_moment=True,
    )


def _logistic_error():
    def s(z):
        z = np.asarray(z, dtype=float)
        # overflow-safe sigmoid: exp of a nonpositive argument on each branch
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out

    def pdf(z):
        sv = s(z)
        return sv * (1.0 - sv)

    return ErrorModel(
        kind="logistic",
        pdf=pdf,
        pdf_d1=lambda z: pdf(z) * (1.0 - 2.0 * s(z)),
        pdf_d2=lambda z: pdf(z) * ((1.0 - 2.0 * s(z)) ** 2 - 2.0 * pdf(z)),
        pdf_d3=lambda z: pdf(z)
        * (1.0 - 2.0 * s(z))
        * ((1.0 - 2.0 * s(z)) ** 2 - 8.0 * pdf(z)),
        cdf=s,
        ppf=lambda p: np.log(np.asarray(p) / (1.0 - np.asarray(p))),
        score=lambda z: np.tanh(np.asarray(z, dtype=float) / 2.0),
        fisher_info=1.0 / 3.0,
        sigma2=math.pi**2 / 3.0,
        has_8_3_moment=True,
    )


def _t2_error():
    # test-only: finite variance fails, so the 8/3 moment flag is false
    return ErrorModel(
        kind="student-t2",
        pdf=lambda z: stats.t.pdf(z, 2.0),
        pdf_d1=lambda z: -3.0 * z / (2.0 + np.asarray(z) ** 2) * stats.t.pdf(z, 2.0),
        pdf_d2=lambda z: stats.t.pdf(z, 2.0)
        * (15.0 * np.asarray(z) ** 2 - 6.0)
        / (2.0 + np.asarray(z) ** 2) ** 2,
        pdf_d3=lambda z: stats.t.pdf(z, 2.0)
        * (102.0 * np.asarray(z) - 75.0 * np.asarray(z) ** 3)
        / (2.0 + np.asarray(z) ** 2) ** 3,
        cdf=lambda z: stats.t.cdf(z, 2.0),
        ppf=lambda p: stats.t.ppf(p, 2.0),
        score=lambda z: 3.0 * np.asarray(z) / (2.0 + np.asarray(z) ** 2),
        fisher_info=float(integrate.quad(
            lambda z: (3.0 * z / (2.0 + z**2)) ** 2 * stats.t.pdf(z, 2.0),
            -np.inf, np.inf)[0]),
        sigma2=math.inf,
        has_8_3_moment=False,
    )


_COVARIATES = {
    "uniform": lambda: CovariateModel(
        kind="uniform",
        pdf=lambda x: np.where((np.asarray(x) >= 0) & (np.asarray(x) <= 1), 1.0, 0.0),
        cdf=lambda x: np.clip(np.asarray(x, dtype=float), 0.0, 1.0),
        g_min=1.0,
        g_max=1.0,
    ),
    "beta22": lambda: CovariateModel(
        kind="beta22",
        pdf=lambda x: np.where(
            (np.asarray(x) >= 0) & (np.asarray(x) <= 1),
            6.0 * np.asarray(x, dtype=float) * (1.0 - np.asarray(x, dtype=float)),
            0.0,
        ),
        cdf=lambda x: np.clip(
            3.0 * np.asarray(x, dtype=float) ** 2
            - 2.0 * np.asarray(x, dtype=float) ** 3,
            0.0,
            1.0,
        ),
        g_min=0.0,
        g_max=1.5,
    ),
}

_REGRESSIONS = {
    "linear": lambda: RegressionModel(
        kind="linear",
        func=lambda x: np.asarray(x, dtype=float),
        deriv=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        deriv2=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        inverse=lambda z: np.asarray(z, dtype=float),
    ),
    "exp": lambda: RegressionModel(
        kind="exp",
        func=np.exp,
        deriv=np.exp,
        deriv2=np.exp,
        inverse=np.log,
    ),
    "linear-quadratic": lambda: RegressionModel(
        kind="linear-quadratic",
        func=lambda x: np.asarray(x, dtype=float) + np.asarray(x, dtype=float) ** 2 / 2.0,
        deriv=lambda x: 1.0 + np.asarray(x, dtype=float),
        deriv2=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        inverse=lambda z: -1.0 + np.sqrt(1.0 + 2.0 * np.asarray(z, dtype=float)),
    ),
    "sin2pi": lambda: RegressionModel(
        kind="sin2pi",
        func=lambda x: np.sin(2.0 * np.pi * np.asarray(x, dtype=float)),
        deriv=lambda x: 2.0 * np.pi * np.cos(2.0 * np.pi * np.asarray(x, dtype=float)),
        deriv2=lambda x: -4.0 * np.pi**2 * np.sin(2.0 * np.pi * np.asarray(x, dtype=float)),
        inverse=None,
    ),
}

_ERRORS = {
    "normal": _normal_error,
    "logistic": _logistic_error,
    "student-t2": _t2_error,
}


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    name: str
    covariate: CovariateModel
    regression: RegressionModel
    error: ErrorModel
    flag_f: bool
    flag_g: bool
    flag_r: bool

    # -- ground truth -------------------------------------------------------

    def r_range(self):
        x = np.linspace(0.0, 1.0, _GRID_N)
        rx = self.regression.func(x)
        return float(np.min(rx)), float(np.max(rx))

    def q(self, z):
        """Density of r(X) via the change-of-variables formula (needs (R))."""
        if self.regression.inverse is None:
            raise ValueError(
                f"scenario {self.name!r}: q via the inverse formula requires a "
                "strictly increasing regression function"
            )
        z = np.asarray(z, dtype=float)
        scalar = z.ndim == 0
        z = np.atleast_1d(z)
        lo, hi = self.r_range()
        inside = (z >= lo) & (z <= hi)
        x = self.regression.inverse(np.clip(z, lo, hi))
        vals = np.atleast_1d(self.covariate.pdf(x) / self.regression.deriv(x))
        out = np.where(inside, vals, 0.0)
        return float(out[0]) if scalar else out

    def surrogate_cdf(self, z):
        """Q(z) = P(r(X) <= z); via the inverse when (R), else by quadrature."""
        z = np.asarray(z, dtype=float)
        lo, hi = self.r_range()
        if self.regression.inverse is not None:
            x = self.regression.inverse(np.clip(z, lo, hi))
            out = self.covariate.cdf(x)
            return np.where(z < lo, 0.0, np.where(z > hi, 1.0, out))
        grid = np.linspace(0.0, 1.0, 20001)
        gx = self.covariate.pdf(grid)
        rx = self.regression.func(grid)
        def one(zv):
            mask = rx <= zv
            return float(np.trapezoid(gx * mask, grid))
        return np.vectorize(one)(z)

    def h(self, y, deriv=0):
        """Response density h (or its m-th derivative) by quadrature over x.

        Uses h^(m)(y) = int f^(m)(y - r(x)) g(x) dx, which avoids inverting r
        and therefore also covers non-monotone regression functions.
        """
        fd = [self.error.pdf, self.error.pdf_d1, self.error.pdf_d2,
              self.error.pdf_d3][deriv]
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        out = _adaptive_grid_quad(
            lambda x, yy: fd(yy[:, None] - self.regression.func(x)[None, :])
            * self.covariate.pdf(x)[None, :],
            y,
        )
        return out[0] if scalar else out

    def d(self, y):
        """d(y) = E[q(y - eps) eps], by quadrature over the error."""
        lo, hi = self.r_range()
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.empty_like(y)
        for i, yv in enumerate(y):
            val, _ = integrate.quad(
                lambda z: float(self.q(yv - z)) * z * float(self.error.pdf(z)),
                yv - hi,
                yv - lo,
                epsabs=1e-10,
                limit=200,
            )
            out[i] = val
        return out if out.size > 1 else float(out[0])

    def response_range(self, tail=1e-9):
        """Interval outside which h is (numerically) zero."""
        lo, hi = self.r_range()
        return (
            float(lo + self.error.ppf(tail)),
            float(hi + self.error.ppf(1.0 - tail)),
        )

    # -- sampling -----------------------------------------------------------

    def sample(self, n, seed, rep=0):
        return sample(self, n, seed, rep=rep)

    def truth(self, grid):
        return truth(self, grid)

    def validate(self):
        return validate(self)


def _adaptive_grid_quad(integrand, y, tol=1e-9, max_panels=512):
    """Integrate integrand(x, y) over x in [0,1], vectorized over the y grid.

    Composite Gauss-Legendre with panel doubling until the change is below
    tol; raises if the tolerance is not reached.
    """
    nodes, weights = np.polynomial.legendre.leggauss(16)
    panels = 16
    prev = None
    while panels <= max_panels:
        edges = np.linspace(0.0, 1.0, panels + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1] - edges[0])
        x = (mids[:, None] + half * nodes[None, :]).ravel()
        w = np.tile(half * weights, panels)
        vals = integrand(x, y) @ w
        if prev is not None and np.max(np.abs(vals - prev)) < tol:
            return vals
        prev = vals
        panels *= 2
    bad = int(np.argmax(np.abs(vals - prev)))
    raise RuntimeError(
        f"quadrature did not converge to {tol:g} at grid point {y[bad]!r}"
    )


# ---------------------------------------------------------------------------
# dataset
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """(X_i, Y_i) sample; oracle mode carries the hidden errors and r(X)."""

    x: np.ndarray
    y: np.ndarray
    eps: np.ndarray | None
    r_x: np.ndarray | None
    seed: int
    rep: int
    scenario_name: str

    @property
    def n(self):
        return len(self.x)

    @property
    def has_truth(self):
        return self.eps is not None

    def require_truth(self):
        if not self.has_truth:
            raise ValueError("oracle mode required: dataset carries no hidden truth")

    def without_truth(self):
        return Dataset(self.x, self.y, None, None, self.seed, self.rep,
                       self.scenario_name)


def rng_for(seed, rep=0, stream=0):
    """Splittable counter-based generator keyed by (seed, rep, stream)."""
    key = [np.uint64(seed), np.uint64(rep) << np.uint64(16) | np.uint64(stream)]
    return np.random.Generator(np.random.Philox(key=key))


def sample(s: Scenario, n: int, seed: int, rep: int = 0) -> Dataset:
    if n < 1:
        raise ValueError("sample size must be at least 1")
    rng = rng_for(seed, rep=rep, stream=0)
    x = s.covariate.draw(rng, n)
    eps = s.error.draw(rng_for(seed, rep=rep, stream=1), n)
    r_x = s.regression.func(x)
    return Dataset(x=x, y=r_x + eps, eps=eps, r_x=r_x, seed=int(seed),
                   rep=int(rep), scenario_name=s.name)


# ---------------------------------------------------------------------------
# truth tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TruthTables:
    grid: np.ndarray
    h: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    h3: np.ndarray
    q: np.ndarray | None
    big_q: np.ndarray
    score: np.ndarray
    lam: np.ndarray
    d: np.ndarray
    fisher_info: float
    sigma2: float


def truth(s: Scenario, grid) -> TruthTables:
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    invertible = s.regression.inverse is not None
    return TruthTables(
        grid=grid,
        h=s.h(grid, 0),
        h1=s.h(grid, 1),
        h2=s.h(grid, 2),
        h3=s.h(grid, 3),
        q=s.q(grid) if invertible else None,
        big_q=s.surrogate_cdf(grid),
        score=s.error.score(grid),
        lam=s.error.lam(grid),
        d=np.atleast_1d(s.d(grid)) if invertible else None,
        fisher_info=s.error.fisher_info,
        sigma2=s.error.sigma2,
    )


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AssumptionResult:
    name: str
    claimed: bool
    passed: bool
    witness: float | None = None
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    scenario: str
    results: tuple[AssumptionResult, ...]

    @property
    def all_pass(self):
        return all(r.passed for r in self.results if r.claimed)

    def as_dict(self):
        return {
            "scenario": self.scenario,
            "results": [
                {
                    "assumption": r.name,
                    "claimed": r.claimed,
                    "passed": r.passed,
                    "witness": r.witness,
                    "detail": r.detail,
                }
                for r in self.results
            ],
        }


def validate(s: Scenario) -> ValidationReport:
    x = np.linspace(0.0, 1.0, _GRID_N)
    results = []

    # (F): mean zero, 8/3 moment, smooth density
    mean, _ = integrate.quad(lambda z: z * float(s.error.pdf(z)), -np.inf, np.inf)
    f_ok = abs(mean) < 1e-8 and s.error.has_8_3_moment
    detail = "" if f_ok else (
        f"error mean {mean:.3g}" if abs(mean) >= 1e-8 else "moment of order 8/3 infinite"
    )
    results.append(AssumptionResult("F", s.flag_f, f_ok, None, detail))

    # (G): quasi-uniform on [0, 1]
    g = s.covariate.pdf(x)
    g_ok = bool(np.all(g > 0.0) and np.all(np.isfinite(g)))
    witness = None if g_ok else float(x[int(np.argmin(g))])
    results.append(
        AssumptionResult("G", s.flag_g, g_ok, witness,
                         "" if g_ok else "density not bounded away from zero")
    )

    # (R): strictly positive derivative
    rp = s.regression.deriv(x)
    r_ok = bool(np.min(rp) > 0.0)
    witness = None if r_ok else float(x[int(np.argmin(rp))])
    results.append(
        AssumptionResult("R", s.flag_r, r_ok, witness,
                         "" if r_ok else f"min r' = {float(np.min(rp)):.3g}")
    )
    return ValidationReport(scenario=s.name, results=tuple(results))


# ---------------------------------------------------------------------------
# registry and serialization
# ---------------------------------------------------------------------------

_BUILTINS = {
    "uniform-linear": dict(covariate="uniform", regression="linear",
                           error="normal", flags=(True, True, True)),
    "uniform-exp": dict(covariate="uniform", regression="exp",
                        error="normal", flags=(True, True, True)),
    "uniform-logistic": dict(covariate="uniform", regression="linear-quadratic",
                             error="logistic", flags=(True, True, True)),
    "sin-beta": dict(covariate="beta22", regression="sin2pi",
                     error="normal", flags=(True, False, False)),
}


def builtin_names():
    return sorted(_BUILTINS)


def builtin_scenario(name: str) -> Scenario:
    if name not in _BUILTINS:
        raise ValueError(
            f"unknown scenario {name!r}; available: {', '.join(builtin_names())}"
        )
    spec = _BUILTINS[name]
    flag_f, flag_g, flag_r = spec["flags"]
    return Scenario(
        name=name,
        covariate=_COVARIATES[spec["covariate"]](),
        regression=_REGRESSIONS[spec["regression"]](),
        error=_ERRORS[spec["error"]](),
        flag_f=flag_f,
        flag_g=flag_g,
        flag_r=flag_r,
    )


def scenario_to_spec(s: Scenario) -> dict:
    return {
        "name": s.name,
        "g": {"kind": s.covariate.kind},
        "r": {"kind": s.regression.kind},
        "f": {"kind": s.error.kind},
        "flags": {"F": s.flag_f, "G": s.flag_g, "R": s.flag_r},
    }


def scenario_from_spec(spec) -> Scenario:
    """Build a scenario from a JSON document or an already-parsed dict."""
    if isinstance(spec, str):
        if spec in _BUILTINS:
            return builtin_scenario(spec)
        with open(spec, encoding="utf-8") as fh:
            spec = json.load(fh)
    cov = spec["g"]["kind"]
    reg = spec["r"]["kind"]
    err = spec["f"]["kind"]
    for kind, table, what in [
        (cov, _COVARIATES, "covariate"),
        (reg, _REGRESSIONS, "regression"),
        (err, _ERRORS, "error"),
    ]:
        if kind not in table:
            raise ValueError(f"unknown {what} kind {kind!r}")
    flags = spec.get("flags", {})
    return Scenario(
        name=spec.get("name", f"{cov}/{reg}/{err}"),
        covariate=_COVARIATES[cov](),
        regression=_REGRESSIONS[reg](),
        error=_ERRORS[err](),
        flag_f=bool(flags.get("F", True)),
        flag_g=bool(flags.get("G", True)),
        flag_r=bool(flags.get("R", True)),
    )
