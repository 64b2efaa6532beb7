"""Scenario models: sampling, hidden truth, derived densities, validation."""

import numpy as np
import pytest
from scipy import integrate, stats

from respdens.scenarios import (Dataset, builtin_names, builtin_scenario,
                                rng_for, scenario_from_spec, scenario_to_spec,
                                truth, validate)


@pytest.fixture(scope="module")
def lin():
    return builtin_scenario("uniform-linear")


@pytest.fixture(scope="module")
def logi():
    return builtin_scenario("uniform-logistic")


class TestRegistry:
    def test_builtin_names(self):
        names = builtin_names()
        for expected in ("uniform-linear", "uniform-exp", "uniform-logistic",
                         "sin-beta"):
            assert expected in names

    def test_unknown_raises(self):
        with pytest.raises(ValueError):
            builtin_scenario("not-a-scenario")

    def test_spec_round_trip(self, logi):
        spec = scenario_to_spec(logi)
        back = scenario_from_spec(spec)
        assert back.name == logi.name
        y = np.linspace(0.0, 1.5, 7)
        assert np.allclose(back.h(y), logi.h(y))


class TestSampling:
    def test_deterministic(self, lin):
        d1 = lin.sample(200, seed=5)
        d2 = lin.sample(200, seed=5)
        assert np.array_equal(d1.x, d2.x) and np.array_equal(d1.y, d2.y)

    def test_seed_and_rep_vary(self, lin):
        d1 = lin.sample(200, seed=5)
        d2 = lin.sample(200, seed=6)
        d3 = lin.sample(200, seed=5, rep=1)
        assert not np.array_equal(d1.x, d2.x)
        assert not np.array_equal(d1.x, d3.x)

    def test_model_identity(self, lin):
        d = lin.sample(500, seed=1)
        assert np.allclose(d.y, d.r_x + d.eps)
        assert np.allclose(d.r_x, lin.regression.func(d.x))

    def test_hidden_truth_toggle(self, lin):
        d = lin.sample(50, seed=2)
        assert d.has_truth
        blind = d.without_truth()
        assert not blind.has_truth
        with pytest.raises(ValueError):
            blind.require_truth()

    def test_stream_independence(self):
        a = rng_for(3, rep=0, stream=0).random(5)
        b = rng_for(3, rep=0, stream=1).random(5)
        assert not np.array_equal(a, b)

    def test_covariate_range(self, lin):
        d = lin.sample(1000, seed=9)
        assert d.x.min() >= 0.0 and d.x.max() <= 1.0


class TestDerivedDensities:
    def test_h_is_convolution(self, lin):
        # uniform X, r(x) = x: h(y) = Phi(y) - Phi(y - 1)
        y = np.linspace(-2.0, 3.0, 31)
        expect = stats.norm.cdf(y) - stats.norm.cdf(y - 1.0)
        assert np.max(np.abs(lin.h(y) - expect)) < 1e-9

    def test_h_integrates_to_one(self, logi):
        lo, hi = logi.response_range(1e-12)
        val, _ = integrate.quad(lambda y: float(logi.h(y)), lo, hi, limit=200)
        assert val == pytest.approx(1.0, abs=1e-6)

    def test_h_derivative(self, lin):
        y, eps = 0.4, 1e-6
        fd = (float(lin.h(y + eps)) - float(lin.h(y - eps))) / (2 * eps)
        assert float(lin.h(y, 1)) == pytest.approx(fd, abs=1e-6)

    def test_q_uniform_linear(self, lin):
        # surrogate r(X) with X uniform and r = id: q = 1 on [0, 1]
        assert lin.q(0.5) == pytest.approx(1.0)
        assert lin.q(-0.2) == 0.0 and lin.q(1.2) == 0.0

    def test_q_uniform_exp(self):
        sc = builtin_scenario("uniform-exp")
        # r(x) = e^x: density of r(X) is 1/z on [1, e]
        assert sc.q(2.0) == pytest.approx(0.5, abs=1e-12)
        assert sc.q(0.9) == 0.0

    def test_q_is_density(self, logi):
        lo, hi = logi.r_range()
        z = np.linspace(lo + 1e-9, hi - 1e-9, 20001)
        assert np.trapezoid(logi.q(z), z) == pytest.approx(1.0, abs=1e-3)

    def test_d_function(self, lin):
        # d(y) = E[q(y - eps) eps]; for normal errors compare against MC
        rng = np.random.default_rng(0)
        eps = rng.normal(size=400_000)
        mc = np.mean(lin.q(0.5 - eps) * eps)
        assert float(lin.d(0.5)) == pytest.approx(mc, abs=5e-3)


class TestErrorModels:
    @pytest.mark.parametrize("name", ["uniform-linear", "uniform-logistic"])
    def test_score_properties(self, name):
        sc = builtin_scenario(name)
        err = sc.error
        lo, hi = float(err.ppf(1e-12)), float(err.ppf(1 - 1e-12))
        z = np.linspace(lo, hi, 200_001)
        f = err.pdf(z)
        # E[score] = 0, E[eps * score] = 1, E[score^2] = J
        assert np.trapezoid(err.score(z) * f, z) == pytest.approx(0.0, abs=1e-6)
        assert np.trapezoid(z * err.score(z) * f, z) == pytest.approx(1.0, abs=1e-6)
        assert np.trapezoid(err.score(z) ** 2 * f, z) == pytest.approx(
            err.fisher_info, abs=1e-6)

    def test_logistic_fisher_info(self, logi):
        assert logi.error.fisher_info == pytest.approx(1.0 / 3.0)

    def test_normal_lambda_vanishes(self, lin):
        z = np.linspace(-4, 4, 21)
        assert np.max(np.abs(lin.error.lam(z))) < 1e-12

    def test_pdf_derivatives(self, logi):
        z = np.linspace(-3, 3, 25)
        h = 1e-5
        err = logi.error
        fd1 = (err.pdf(z + h) - err.pdf(z - h)) / (2 * h)
        assert np.max(np.abs(fd1 - err.pdf_d1(z))) < 1e-8
        fd2 = (err.pdf_d1(z + h) - err.pdf_d1(z - h)) / (2 * h)
        assert np.max(np.abs(fd2 - err.pdf_d2(z))) < 1e-8
        fd3 = (err.pdf_d2(z + h) - err.pdf_d2(z - h)) / (2 * h)
        assert np.max(np.abs(fd3 - err.pdf_d3(z))) < 1e-7


class TestTruthTables:
    def test_tables_match_callables(self, lin):
        grid = np.linspace(-1.0, 2.0, 11)
        tt = truth(lin, grid)
        assert np.allclose(tt.h, lin.h(grid))
        assert np.allclose(tt.h1, lin.h(grid, 1))
        assert np.allclose(tt.q, lin.q(grid))

    def test_non_invertible_regression(self):
        sc = builtin_scenario("sin-beta")
        tt = truth(sc, np.linspace(-2, 2, 5))
        assert tt.q is None and tt.d is None


class TestValidation:
    def test_good_scenarios_pass(self):
        for name in ("uniform-linear", "uniform-exp", "uniform-logistic"):
            assert builtin_scenario(name).validate().all_pass

    def test_sin_beta_violates_assumptions(self):
        rep = builtin_scenario("sin-beta").validate()
        by_name = {r.name: r for r in rep.results}
        # the design and regression conditions fail, and the scenario says so
        assert not by_name["G"].passed and not by_name["G"].claimed
        assert not by_name["R"].passed and not by_name["R"].claimed
