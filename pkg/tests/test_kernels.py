"""Discrete kernel factorization, the adjoint operator pair and the
transfer inverse pair."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volhedge.errors import NotPositiveDefiniteError
from volhedge.kernels import (
    TimeGrid,
    apply_Kstar,
    build_kernel,
    recover_innovations,
    reconstruct_noise,
    solve_Kstar,
)
from volhedge.models import brownian_motion, custom_covariance, fractional_bm, mixed_fbm


class TestTimeGrid:
    def test_uniform(self):
        g = TimeGrid.uniform(2.0, 4)
        assert np.allclose(g.points, [0.0, 0.5, 1.0, 1.5, 2.0])
        assert g.T == 2.0 and g.n == 4

    def test_dt(self):
        g = TimeGrid.uniform(1.0, 8)
        assert np.allclose(g.dt, 0.125)


class TestFactorization:
    def test_bm_two_point_hand_cholesky(self):
        # R = [[0.5, 0.5], [0.5, 1.0]] over grid {0.5, 1}
        g = TimeGrid(points=np.array([0.0, 0.5, 1.0]))
        kern = build_kernel(brownian_motion(), g, source="cholesky")
        expect = np.array([[np.sqrt(0.5), 0.0], [np.sqrt(0.5), np.sqrt(0.5)]])
        assert np.allclose(kern.L, expect, atol=1e-12)

    def test_single_point_grid(self):
        g = TimeGrid(points=np.array([0.0, 1.0]))
        kern = build_kernel(fractional_bm(0.75), g, source="cholesky")
        assert kern.L.shape == (1, 1)
        assert kern.L[0, 0] == pytest.approx(1.0)  # sqrt(R(1,1)) = 1

    @pytest.mark.parametrize("model", [brownian_motion(), fractional_bm(0.75),
                                       mixed_fbm(0.75)])
    def test_cholesky_reconstruction(self, model):
        g = TimeGrid.uniform(1.0, 64)
        kern = build_kernel(model, g, source="cholesky")
        assert np.max(np.abs(kern.L @ kern.L.T - kern.R_grid)) <= 1e-10

    def test_analytic_reconstruction(self):
        g = TimeGrid.uniform(1.0, 64)
        kern = build_kernel(fractional_bm(0.75), g, source="analytic")
        assert np.max(np.abs(kern.L @ kern.L.T - kern.R_grid)) <= 1e-3

    def test_auto_prefers_analytic_for_fbm(self):
        g = TimeGrid.uniform(1.0, 16)
        assert build_kernel(fractional_bm(0.75), g).source == "analytic-quadrature"
        assert build_kernel(mixed_fbm(0.75), g).source == "numerical-cholesky"

    def test_not_positive_definite_names_minor(self):
        bad = custom_covariance(lambda t, s: -np.minimum(t, s), label="negated")
        g = TimeGrid.uniform(1.0, 4)
        with pytest.raises(NotPositiveDefiniteError) as err:
            build_kernel(bad, g, source="cholesky")
        assert err.value.minor_index is not None


class TestAdjointPair:
    def test_bm_indicator_fixed_point(self):
        # for BM the adjoint acts as the identity on indicators 1_{[0, t_k)}
        g = TimeGrid.uniform(1.0, 8)
        kern = build_kernel(brownian_motion(), g, source="cholesky")
        f = (np.arange(1, 9) <= 5).astype(float)
        assert np.allclose(apply_Kstar(kern, f), f, atol=1e-12)
        assert np.allclose(solve_Kstar(kern, f), f, atol=1e-12)

    def test_zero_maps_to_zero(self):
        g = TimeGrid.uniform(1.0, 8)
        kern = build_kernel(fractional_bm(0.75), g)
        assert np.allclose(apply_Kstar(kern, np.zeros(8)), 0.0)
        assert np.allclose(solve_Kstar(kern, np.zeros(8)), 0.0)

    def test_fbm_indicator_residual(self):
        g = TimeGrid.uniform(1.0, 64)
        kern = build_kernel(fractional_bm(0.75), g)
        target = (np.arange(1, 65) <= 40).astype(float)
        f = solve_Kstar(kern, target)
        assert np.max(np.abs(apply_Kstar(kern, f) - target)) <= 1e-10

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10 ** 6))
    def test_round_trip_random(self, seed):
        g = TimeGrid.uniform(1.0, 32)
        kern = build_kernel(fractional_bm(0.8), g)
        f = np.random.default_rng(seed).standard_normal(32)
        assert np.max(np.abs(apply_Kstar(kern, solve_Kstar(kern, f)) - f)) <= 1e-9
        assert np.max(np.abs(solve_Kstar(kern, apply_Kstar(kern, f)) - f)) <= 1e-9


class TestTransferPair:
    def test_bm_innovations_are_scaled_increments(self):
        g = TimeGrid.uniform(1.0, 8)
        kern = build_kernel(brownian_motion(), g, source="cholesky")
        x = np.concatenate([[0.0], np.cumsum(np.full(8, 0.1))])
        zeta = recover_innovations(kern, x)
        assert np.allclose(zeta, 0.1 / np.sqrt(1.0 / 8.0), atol=1e-12)

    def test_zero_path(self):
        g = TimeGrid.uniform(1.0, 8)
        kern = build_kernel(fractional_bm(0.75), g)
        assert np.allclose(recover_innovations(kern, np.zeros(9)), 0.0)
        assert np.allclose(reconstruct_noise(kern, np.zeros(8)), 0.0)

    def test_bm_unit_innovations(self):
        g = TimeGrid.uniform(1.0, 4)
        kern = build_kernel(brownian_motion(), g, source="cholesky")
        x = reconstruct_noise(kern, np.ones(4))
        assert np.allclose(np.diff(x), np.sqrt(0.25), atol=1e-12)

    @pytest.mark.parametrize("model", [brownian_motion(), fractional_bm(0.75),
                                       mixed_fbm(0.75)])
    def test_round_trip(self, model):
        g = TimeGrid.uniform(1.0, 32)
        kern = build_kernel(model, g)
        zeta = np.random.default_rng(5).standard_normal(32)
        x = reconstruct_noise(kern, zeta)
        assert np.max(np.abs(reconstruct_noise(kern, recover_innovations(kern, x)) - x)) <= 1e-12
