"""Gaussian expectation rules: normalization, moments, kink handling and
order convergence."""

import math

import numpy as np
import pytest

from volhedge.errors import ConfigError
from volhedge.quadrature import gaussian_expectation, hermite_rule, lognormal_expectation


class TestHermiteRule:
    def test_weights_normalize(self):
        _, w = hermite_rule(32)
        assert np.sum(w) == pytest.approx(1.0, abs=1e-12)

    def test_gaussian_moments(self):
        x, w = hermite_rule(32)
        assert np.sum(w * x) == pytest.approx(0.0, abs=1e-12)
        assert np.sum(w * x ** 2) == pytest.approx(1.0, abs=1e-12)
        assert np.sum(w * x ** 4) == pytest.approx(3.0, abs=1e-10)

    def test_order_validation(self):
        with pytest.raises(ConfigError):
            hermite_rule(1)


class TestGaussianExpectation:
    def test_constant(self):
        assert gaussian_expectation(lambda z: np.ones_like(z), 16) == \
            pytest.approx(1.0, abs=1e-12)

    def test_exponential_moment(self):
        got = gaussian_expectation(lambda z: np.exp(0.3 * z), 48)
        assert got == pytest.approx(math.exp(0.045), rel=1e-12)

    def test_kink_split_beats_plain_rule(self):
        f = lambda z: np.maximum(z - 0.4, 0.0)
        exact = math.exp(-0.08) / math.sqrt(2 * math.pi) - 0.4 * (
            1.0 - 0.5 * (1.0 + math.erf(0.4 / math.sqrt(2))))
        split = gaussian_expectation(f, 48, kinks=(0.4,))
        assert split == pytest.approx(exact, abs=1e-12)

    def test_order_convergence(self):
        f = lambda z: np.cos(2.0 * z)
        exact = math.exp(-2.0)
        errs = [abs(gaussian_expectation(f, n) - exact) for n in (4, 8, 16)]
        assert errs[0] > errs[1] > errs[2]


class TestLognormalExpectation:
    def test_degenerate_rho(self):
        got = lognormal_expectation(lambda x: x ** 2, 2.0, 0.5, 0.0, 16)
        assert got == pytest.approx((2.0 * math.exp(0.5)) ** 2, rel=1e-12)

    def test_mean_identity(self):
        # E[s e^{a + rho z}] = s e^{a + rho^2/2}
        got = lognormal_expectation(lambda x: x, 1.5, -0.1, 0.4, 48)
        assert got == pytest.approx(1.5 * math.exp(-0.1 + 0.08), rel=1e-12)

    def test_kink_mapping(self):
        f = lambda x: np.maximum(x - 1.0, 0.0)
        got = lognormal_expectation(f, 1.0, -0.02, 0.2, 64, x_kinks=(1.0,))
        from volhedge.valuation import bs_closed_form

        v0, _ = bs_closed_form(1.0, 1.0, 0.04)
        assert got == pytest.approx(v0, abs=1e-10)
