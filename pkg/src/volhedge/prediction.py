"""Exact conditional laws of the noise (mean, covariance, conditional
standard deviation) and conditional expectations of Markovian functionals of
the asset price.

Sign convention: with psi solving the adjoint system for the kernel
increment K(t, .) - K(u, .) on [0, u), the conditional mean is

    Xhat_t(u) = X_u + sum_j psi_j dX_j,

which coincides term-by-term with the martingale route
sum_{j<=u} L[t, j] zeta_j.  (A minus sign in front of the weighted sum
would contradict both the martingale route and the persistence of
positively correlated noise, e.g. a rising fBm path with H > 1/2 must
predict a further rise, so the plus sign is the consistent one.)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .kernels import DiscreteKernel, apply_Kstar, recover_innovations, solve_Kstar
from .models import MarketModel, QuadraticVariation, beta
from .quadrature import lognormal_expectation

__all__ = [
    "PredictionLaw",
    "psi_weights",
    "conditional_mean_X",
    "conditional_cov",
    "rho_hat",
    "prediction_law",
    "conditional_functional_expectation",
]


def psi_weights(kernel: DiscreteKernel, t_index: int, u_index: int) -> np.ndarray:
    """Prediction weights Psi(t, .|u) on the innovation columns 1..u.

    Solves the discrete adjoint system with target K(t, .) - K(u, .)
    restricted to [0, u); results are memoized on the kernel since they do
    not depend on the observed path.
    """
    if not 0 <= u_index <= t_index <= kernel.n:
        raise ValueError(f"need 0 <= u <= t <= n, got u={u_index}, t={t_index}")
    if u_index == 0:
        return np.zeros(0)
    key = (t_index, u_index)
    with kernel._psi_lock:
        cached = kernel._psi_cache.get(key)
    if cached is not None:
        return cached
    A = kernel.A
    target = A[t_index - 1, :u_index] - A[u_index - 1, :u_index]
    psi = solve_Kstar(kernel, target)
    with kernel._psi_lock:
        kernel._psi_cache[key] = psi
    return psi


def conditional_mean_X(kernel: DiscreteKernel, x_path: np.ndarray, u_index: int,
                       t_index: int, route: str = "psi") -> float:
    """Xhat_t(u) = E[X_t | path through grid index u].

    ``route="psi"`` integrates the prediction weights against the observed
    increments; ``route="innovations"`` recovers the martingale increments
    and applies the kernel row directly.  Both agree to rounding.
    """
    x_path = np.asarray(x_path, dtype=float)
    if t_index <= u_index:
        return float(x_path[t_index])
    if u_index == 0:
        return 0.0
    if route == "psi":
        psi = psi_weights(kernel, t_index, u_index)
        dx = np.diff(x_path[: u_index + 1])
        return float(x_path[u_index] + psi @ dx)
    if route == "innovations":
        zeta = solve_triangular(kernel.L[:u_index, :u_index],
                                x_path[1:u_index + 1], lower=True)
        return float(kernel.L[t_index - 1, :u_index] @ zeta)
    raise ValueError(f"unknown route {route!r}")


def conditional_cov(kernel: DiscreteKernel, t_index: int, s_index: int,
                    u_index: int) -> float:
    """Rhat(t, s|u) = R(t, s) - sum_{j<=u} L[t, j] L[s, j]; zero if t or s <= u."""
    if u_index > min(t_index, s_index):
        raise ValueError("need u <= min(t, s)")
    if t_index == 0 or s_index == 0:
        return 0.0
    if t_index <= u_index or s_index <= u_index:
        return 0.0
    r = kernel.R_grid[t_index - 1, s_index - 1]
    if u_index > 0:
        r -= float(kernel.L[t_index - 1, :u_index] @ kernel.L[s_index - 1, :u_index])
    return float(r)


def rho_hat(kernel: DiscreteKernel, t_index: int, u_index: int) -> float:
    """rhohat(t|u) = sqrt(Rhat(t, t|u)), clipped at 0 against rounding."""
    return math.sqrt(max(conditional_cov(kernel, t_index, t_index, u_index), 0.0))


@dataclass(frozen=True)
class PredictionLaw:
    """Conditional Gaussian law of the noise given its path through index u."""

    kernel: DiscreteKernel
    u_index: int
    mean: np.ndarray      # Xhat_{t_i}(u) for all grid points i = 0..n
    rho: np.ndarray       # rhohat(t_i|u) for all grid points

    def cov(self, t_index: int, s_index: int) -> float:
        return conditional_cov(self.kernel, t_index, s_index, self.u_index)


def prediction_law(kernel: DiscreteKernel, x_path: np.ndarray, u_index: int) -> PredictionLaw:
    """Assemble the full conditional law on the grid (martingale route)."""
    x_path = np.asarray(x_path, dtype=float)
    n = kernel.n
    mean = x_path.copy()[: n + 1]
    if u_index > 0:
        zeta = solve_triangular(kernel.L[:u_index, :u_index],
                                x_path[1:u_index + 1], lower=True)
        mean[u_index + 1:] = kernel.L[u_index:, :u_index] @ zeta
    else:
        mean[1:] = 0.0
    rho = np.array([rho_hat(kernel, i, u_index) if i > u_index else 0.0
                    for i in range(n + 1)])
    return PredictionLaw(kernel=kernel, u_index=u_index, mean=mean, rho=rho)


def conditional_functional_expectation(market: MarketModel, kernel: DiscreteKernel,
                                       q2: QuadraticVariation, payoff, x_path,
                                       u_index: int, t_index: int,
                                       quad_order: int = 64) -> float:
    """E[f(t, S_t) | F_u] by Gauss quadrature of the conditional lognormal law.

    ``payoff`` is either an EuropeanPayoff (its kinks drive the domain split)
    or a plain callable f(t, x) of at most linear growth.
    """
    x_path = np.asarray(x_path, dtype=float)
    t_u = kernel.grid.points[u_index]
    t = kernel.grid.points[t_index]
    s_u = market.s0 * math.exp(
        float(market.drift_mu(t_u)) - 0.5 * float(q2.q2(t_u)) + x_path[u_index]
    )
    dx_hat = conditional_mean_X(kernel, x_path, u_index, t_index) - x_path[u_index]
    a = beta(market, q2, t_u, t) + dx_hat
    rho = rho_hat(kernel, t_index, u_index)
    if hasattr(payoff, "f"):
        f = payoff.f
        kinks = payoff.kinks
    else:
        f = lambda x: payoff(t, x)
        kinks = ()
    return lognormal_expectation(f, s_u, a, rho, quad_order, x_kinks=kinks)
