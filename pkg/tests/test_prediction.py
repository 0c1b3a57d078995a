"""Prediction weights, conditional means/covariances and conditional
functional expectations."""

import math

import numpy as np
import pytest

from volhedge.kernels import TimeGrid, apply_Kstar, build_kernel
from volhedge.models import (
    MarketModel,
    brownian_motion,
    constant_drift,
    fractional_bm,
    mixed_fbm,
    quadratic_variation,
)
from volhedge.paths import conditional_simulate, simulate_paths
from volhedge.prediction import (
    conditional_cov,
    conditional_functional_expectation,
    conditional_mean_X,
    prediction_law,
    psi_weights,
    rho_hat,
)
from volhedge.valuation import call


def _setup(noise, n=64, T=1.0, mu=0.0):
    market = MarketModel(noise=noise, s0=1.0, drift_mu=constant_drift(mu), T=T)
    grid = TimeGrid.uniform(T, n)
    kern = build_kernel(noise, grid)
    q2 = quadratic_variation(noise, grid, kernel=kern)
    return market, grid, kern, q2


class TestPsiWeights:
    def test_bm_weights_vanish(self):
        _, _, kern, _ = _setup(brownian_motion())
        assert np.allclose(psi_weights(kern, 50, 20), 0.0, atol=1e-12)

    def test_t_equals_u(self):
        _, _, kern, _ = _setup(fractional_bm(0.75))
        assert np.allclose(psi_weights(kern, 20, 20), 0.0)

    def test_forward_operator_residual(self):
        _, _, kern, _ = _setup(fractional_bm(0.75))
        t, u = 50, 20
        psi = psi_weights(kern, t, u)
        target = kern.A[t - 1, :u] - kern.A[u - 1, :u]
        padded = np.concatenate([psi, np.zeros(kern.n - u)])
        res = apply_Kstar(kern, padded)[:u] - target
        assert np.max(np.abs(res)) <= 1e-10

    def test_memoized(self):
        _, _, kern, _ = _setup(fractional_bm(0.75))
        a = psi_weights(kern, 40, 10)
        b = psi_weights(kern, 40, 10)
        assert a is b


class TestConditionalMean:
    def test_bm_predicts_itself(self):
        market, _, kern, q2 = _setup(brownian_motion())
        ps = simulate_paths(market, kern, 1, 3, q2=q2)
        x = ps.x_paths[0]
        assert conditional_mean_X(kern, x, 30, 64) == pytest.approx(x[30], abs=1e-10)

    def test_unconditional_mean_is_zero(self):
        _, _, kern, _ = _setup(fractional_bm(0.75))
        x = np.zeros(65)
        assert conditional_mean_X(kern, x, 0, 64) == 0.0

    @pytest.mark.parametrize("noise", [brownian_motion(), fractional_bm(0.75),
                                       mixed_fbm(0.75)])
    def test_two_routes_agree(self, noise):
        market, _, kern, q2 = _setup(noise)
        ps = simulate_paths(market, kern, 5, 4, q2=q2)
        worst = 0.0
        for p in range(5):
            for u in (1, 16, 32, 63):
                for t in (u + 1, 48, 64):
                    if t <= u:
                        continue
                    a = conditional_mean_X(kern, ps.x_paths[p], u, t, route="psi")
                    b = conditional_mean_X(kern, ps.x_paths[p], u, t,
                                           route="innovations")
                    worst = max(worst, abs(a - b))
        assert worst <= 1e-10

    def test_fbm_persistence_sign(self):
        # for H > 1/2 a strictly rising path predicts a further rise
        _, grid, kern, _ = _setup(fractional_bm(0.75))
        x = np.linspace(0.0, 1.0, 65)
        u = 32
        assert conditional_mean_X(kern, x, u, 64) > x[u]


class TestConditionalCov:
    def test_u_zero_is_unconditional(self):
        _, _, kern, _ = _setup(fractional_bm(0.75))
        assert conditional_cov(kern, 64, 64, 0) == pytest.approx(
            kern.R_grid[63, 63], abs=1e-14)

    def test_bm_independent_increments(self):
        _, grid, kern, _ = _setup(brownian_motion())
        # R_hat(t, s | u) = min(t, s) - t_u
        got = conditional_cov(kern, 64, 48, 16)
        assert got == pytest.approx(grid.points[48] - grid.points[16], abs=1e-10)

    def test_fully_observed_is_zero(self):
        _, _, kern, _ = _setup(fractional_bm(0.75))
        assert conditional_cov(kern, 20, 20, 20) == 0.0

    def test_rho_hat_nonnegative_and_monotone_in_t(self):
        _, _, kern, _ = _setup(fractional_bm(0.75))
        u = 16
        rhos = [rho_hat(kern, t, u) for t in range(u + 1, 65)]
        assert all(r >= 0.0 for r in rhos)
        assert all(b >= a - 1e-12 for a, b in zip(rhos, rhos[1:]))


class TestPredictionLaw:
    def test_matches_pointwise_routines(self):
        market, _, kern, q2 = _setup(fractional_bm(0.75))
        ps = simulate_paths(market, kern, 1, 6, q2=q2)
        u = 24
        law = prediction_law(kern, ps.x_paths[0], u)
        for t in (30, 50, 64):
            assert law.mean[t] == pytest.approx(
                conditional_mean_X(kern, ps.x_paths[0], u, t), abs=1e-12)
            assert law.rho[t] == pytest.approx(rho_hat(kern, t, u), abs=1e-12)


class TestConditionalFunctional:
    def test_normalization(self):
        market, _, kern, q2 = _setup(fractional_bm(0.75))
        ps = simulate_paths(market, kern, 1, 7, q2=q2)
        one = conditional_functional_expectation(
            market, kern, q2, lambda t, x: np.ones_like(x), ps.x_paths[0], 32, 64)
        assert one == pytest.approx(1.0, abs=1e-12)

    def test_martingale_identity(self):
        market, grid, kern, q2 = _setup(brownian_motion())
        ps = simulate_paths(market, kern, 1, 8, q2=q2)
        u = 32
        s_u = ps.s_paths[0, u]
        got = conditional_functional_expectation(
            market, kern, q2, lambda t, x: x, ps.x_paths[0], u, 64)
        assert got == pytest.approx(s_u, rel=1e-10)

    def test_call_value_matches_conditional_mc(self):
        market, grid, kern, q2 = _setup(fractional_bm(0.75))
        ps = simulate_paths(market, kern, 1, 9, q2=q2)
        u = 32
        payoff = call(1.0)
        quad = conditional_functional_expectation(
            market, kern, q2, payoff, ps.x_paths[0], u, 64)
        cont = conditional_simulate(kern, ps.x_paths[0, :u + 1], 10 ** 4, 10)
        t = grid.points
        s_T = market.s0 * np.exp(float(market.drift_mu(t[-1]))
                                 - 0.5 * float(q2.q2(t[-1])) + cont[:, -1])
        vals = payoff.f(s_T)
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(quad - vals.mean()) <= 3 * se
