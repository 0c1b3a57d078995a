"""Path simulation of the noise and the asset, realized quadratic variation,
conditional (brute-force) continuation sampling and the simple-arbitrage
pathwise identity check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .kernels import DiscreteKernel, TimeGrid, recover_innovations
from .models import MarketModel, QuadraticVariation, quadratic_variation

__all__ = [
    "PathSet",
    "path_rng",
    "simulate_paths",
    "asset_from_noise",
    "realized_qv",
    "conditional_simulate",
    "simple_arbitrage_check",
]


@dataclass(frozen=True)
class PathSet:
    """Simulated noise and asset paths on a common grid.

    Row p of each matrix is a deterministic function of (seed, p) alone, so
    identical configurations reproduce bit-identical paths regardless of
    worker count or generation order.
    """

    grid: TimeGrid
    x_paths: np.ndarray  # (n_paths, n+1), x_paths[:, 0] = 0
    s_paths: np.ndarray  # (n_paths, n+1), s_paths[:, 0] = S0
    seed: int
    n_paths: int


def path_rng(seed: int, path_index: int) -> np.random.Generator:
    """Counter-based per-path stream: Philox keyed by (master seed, path)."""
    key = np.array([seed % 2 ** 64, path_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _draw_innovations(seed: int, n_paths: int, n: int) -> np.ndarray:
    zeta = np.empty((n_paths, n))
    for p in range(n_paths):
        zeta[p] = path_rng(seed, p).standard_normal(n)
    return zeta


def asset_from_noise(market: MarketModel, grid: TimeGrid, x_paths: np.ndarray,
                     q2: QuadraticVariation) -> np.ndarray:
    """S_t = S0 exp{mu(t) - q^2(t)/2 + X_t} on the grid."""
    t = grid.points
    drift = np.asarray(market.drift_mu(t), dtype=float) - 0.5 * np.asarray(q2.q2(t), dtype=float)
    return market.s0 * np.exp(drift[None, :] + np.atleast_2d(x_paths))


def simulate_paths(market: MarketModel, kernel: DiscreteKernel, n_paths: int,
                   seed: int, q2: QuadraticVariation | None = None,
                   innovations: np.ndarray | None = None) -> PathSet:
    """Draw ``n_paths`` asset paths; ``innovations`` overrides the RNG (test hook)."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    grid = kernel.grid
    if q2 is None:
        q2 = quadratic_variation(market.noise, grid, kernel=kernel)
    if innovations is None:
        zeta = _draw_innovations(seed, n_paths, grid.n)
    else:
        zeta = np.atleast_2d(np.asarray(innovations, dtype=float))
        if zeta.shape != (n_paths, grid.n):
            raise ValueError("innovations shape must be (n_paths, grid.n)")
    x = np.zeros((n_paths, grid.n + 1))
    x[:, 1:] = zeta @ kernel.L.T
    s = asset_from_noise(market, grid, x, q2)
    return PathSet(grid=grid, x_paths=x, s_paths=s, seed=seed, n_paths=n_paths)


def realized_qv(path: np.ndarray, grid: TimeGrid | None = None) -> float:
    """Sum of squared increments of a single path up to its last point."""
    path = np.asarray(path, dtype=float)
    return float(np.sum(np.diff(path) ** 2))


def conditional_simulate(kernel: DiscreteKernel, history: np.ndarray,
                         n_paths: int, seed: int) -> np.ndarray:
    """Sample continuations of a noise path observed through grid index u.

    ``history`` holds the path values on grid points 0..u (so u =
    len(history) - 1).  The observed innovations are recovered exactly and
    fresh ones are drawn beyond u, giving samples from the conditional
    Gaussian law.  Returns full paths of shape (n_paths, n+1) whose prefix
    reproduces the history.
    """
    history = np.asarray(history, dtype=float)
    n = kernel.n
    u = len(history) - 1
    if not 0 <= u <= n:
        raise ValueError(f"history length {len(history)} incompatible with grid")
    zeta = np.zeros((n_paths, n))
    if u > 0:
        zeta_hist = solve_triangular(kernel.L[:u, :u], history[1:], lower=True)
        zeta[:, :u] = zeta_hist[None, :]
    if u < n:
        for p in range(n_paths):
            zeta[p, u:] = path_rng(seed, p).standard_normal(n - u)
    out = np.zeros((n_paths, n + 1))
    out[:, 1:] = zeta @ kernel.L.T
    out[:, : u + 1] = history[None, :]
    return out


def simple_arbitrage_check(s_path: np.ndarray, s_index: int, t_index: int):
    """Pathwise call-identity check for zero-QV models.

    lhs = (S_t - S_s)^+;  rhs = forward Riemann sum of the buy-and-hold-when-
    expensive strategy  sum 1{S_k >= S_s} (S_{k+1} - S_k)  over [s, t].
    """
    if s_index >= t_index:
        raise ValueError("need s_index < t_index")
    s_path = np.asarray(s_path, dtype=float)
    base = s_path[s_index]
    lhs = max(s_path[t_index] - base, 0.0)
    seg = s_path[s_index:t_index + 1]
    rhs = float(np.sum((seg[:-1] >= base) * np.diff(seg)))
    return lhs, rhs
