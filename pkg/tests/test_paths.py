"""Path simulation, realized quadratic variation, conditional continuation
sampling and the pathwise simple-arbitrage identity."""

import numpy as np
import pytest

from volhedge.kernels import TimeGrid, build_kernel
from volhedge.models import (
    MarketModel,
    brownian_motion,
    constant_drift,
    fractional_bm,
    quadratic_variation,
)
from volhedge.paths import (
    conditional_simulate,
    path_rng,
    realized_qv,
    simple_arbitrage_check,
    simulate_paths,
)
from volhedge.prediction import conditional_cov, conditional_mean_X


def _setup(noise, n=64, T=1.0, mu=0.0, s0=1.0):
    market = MarketModel(noise=noise, s0=s0, drift_mu=constant_drift(mu), T=T)
    grid = TimeGrid.uniform(T, n)
    kern = build_kernel(noise, grid)
    q2 = quadratic_variation(noise, grid, kernel=kern)
    return market, grid, kern, q2


class TestSimulate:
    def test_zero_innovations_give_deterministic_paths(self):
        market, grid, kern, q2 = _setup(brownian_motion(), mu=0.1)
        ps = simulate_paths(market, kern, 2, 0, q2=q2,
                            innovations=np.zeros((2, 64)))
        assert np.allclose(ps.x_paths, 0.0)
        expect = np.exp(0.1 * grid.points - 0.5 * grid.points)
        assert np.allclose(ps.s_paths[0], expect, atol=1e-12)

    def test_bm_martingale_mean(self):
        market, grid, kern, q2 = _setup(brownian_motion())
        ps = simulate_paths(market, kern, 10 ** 4, 11, q2=q2)
        st = ps.s_paths[:, -1]
        se = st.std(ddof=1) / np.sqrt(len(st))
        assert abs(st.mean() - 1.0) <= 3 * se

    def test_fbm_terminal_variance(self):
        market, grid, kern, q2 = _setup(fractional_bm(0.75))
        ps = simulate_paths(market, kern, 10 ** 4, 12, q2=q2)
        xt = ps.x_paths[:, -1]
        v = xt.var(ddof=1)
        se = v * np.sqrt(2.0 / (len(xt) - 1))  # SE of a Gaussian variance
        assert abs(v - 1.0) <= 3 * se

    def test_reproducible_per_path(self):
        market, grid, kern, q2 = _setup(brownian_motion())
        a = simulate_paths(market, kern, 5, 99, q2=q2)
        b = simulate_paths(market, kern, 3, 99, q2=q2)
        # same (seed, path index) -> identical rows regardless of batch size
        assert np.array_equal(a.x_paths[:3], b.x_paths)

    def test_path_rng_independent_of_order(self):
        r1 = path_rng(7, 4).standard_normal(8)
        _ = path_rng(7, 3).standard_normal(8)
        r2 = path_rng(7, 4).standard_normal(8)
        assert np.array_equal(r1, r2)


class TestRealizedQV:
    def test_constant_path(self):
        assert realized_qv(np.full(10, 3.0)) == 0.0

    def test_bm_bracket(self):
        market, grid, kern, q2 = _setup(brownian_motion(), n=512)
        ps = simulate_paths(market, kern, 1000, 21, q2=q2)
        qv = np.array([realized_qv(p) for p in ps.x_paths])
        se = qv.std(ddof=1) / np.sqrt(len(qv))
        assert abs(qv.mean() - 1.0) <= 3 * se

    def test_fbm_qv_shrinks_with_refinement(self):
        noise = fractional_bm(0.75)
        means = []
        for n in (64, 128, 256):
            market, grid, kern, q2 = _setup(noise, n=n)
            ps = simulate_paths(market, kern, 200, 31, q2=q2)
            means.append(np.mean([realized_qv(p) for p in ps.x_paths]))
        assert means[0] > means[1] > means[2]


class TestConditionalSimulate:
    def test_prefix_is_reproduced_exactly(self):
        market, grid, kern, q2 = _setup(fractional_bm(0.75))
        ps = simulate_paths(market, kern, 1, 41, q2=q2)
        hist = ps.x_paths[0, :33]
        cont = conditional_simulate(kern, hist, 50, 42)
        assert np.array_equal(cont[:, :33], np.tile(hist, (50, 1)))

    def test_full_history_is_deterministic(self):
        market, grid, kern, q2 = _setup(brownian_motion())
        ps = simulate_paths(market, kern, 1, 43, q2=q2)
        cont = conditional_simulate(kern, ps.x_paths[0], 5, 44)
        assert np.allclose(cont, np.tile(ps.x_paths[0], (5, 1)), atol=1e-10)

    def test_unconditional_covariance(self):
        market, grid, kern, q2 = _setup(fractional_bm(0.75))
        cont = conditional_simulate(kern, np.zeros(1), 10 ** 4, 45)
        xt = cont[:, -1]
        v = xt.var(ddof=1)
        se = v * np.sqrt(2.0 / (len(xt) - 1))
        assert abs(v - 1.0) <= 3 * se

    def test_matches_conditional_moments(self):
        market, grid, kern, q2 = _setup(fractional_bm(0.75))
        ps = simulate_paths(market, kern, 1, 46, q2=q2)
        u = 32
        cont = conditional_simulate(kern, ps.x_paths[0, :u + 1], 10 ** 4, 47)
        xt = cont[:, -1]
        mean_hat = conditional_mean_X(kern, ps.x_paths[0], u, 64)
        var_hat = conditional_cov(kern, 64, 64, u)
        se_m = xt.std(ddof=1) / np.sqrt(len(xt))
        assert abs(xt.mean() - mean_hat) <= 3 * se_m
        v = xt.var(ddof=1)
        se_v = v * np.sqrt(2.0 / (len(xt) - 1))
        assert abs(v - var_hat) <= 3 * se_v


class TestSimpleArbitrage:
    def test_constant_path(self):
        lhs, rhs = simple_arbitrage_check(np.full(10, 2.0), 2, 8)
        assert lhs == 0.0 and rhs == 0.0

    def test_monotone_path_is_exact(self):
        s = np.linspace(1.0, 2.0, 11)
        lhs, rhs = simple_arbitrage_check(s, 2, 9)
        assert lhs == pytest.approx(s[9] - s[2], abs=1e-14)
        assert rhs == pytest.approx(lhs, abs=1e-14)

    def test_index_ordering(self):
        with pytest.raises(ValueError):
            simple_arbitrage_check(np.ones(5), 3, 3)

    def test_gap_decreases_under_refinement(self):
        noise = fractional_bm(0.75)
        gaps = []
        for n in (128, 256, 512):
            market, grid, kern, q2 = _setup(noise, n=n)
            ps = simulate_paths(market, kern, 100, 51, q2=q2)
            gaps.append(np.mean([
                abs(np.subtract(*simple_arbitrage_check(ps.s_paths[p], n // 4, n)))
                for p in range(100)]))
        assert gaps[0] > gaps[1] > gaps[2]
