"""Conditional-mean hedging under proportional transaction costs: conditional
gains, the recursive position fixed point, wealth dynamics and the
initial-position optimizer."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional

import numpy as np

from .errors import (
    DegenerateCostError,
    ModelParameterError,
    NoSolutionError,
    SingularHedgeError,
    UnboundedInitialPositionError,
)
from .kernels import DiscreteKernel
from .models import MarketModel, QuadraticVariation, beta, gamma
from .prediction import conditional_mean_X, rho_hat
from .quadrature import hermite_rule, lognormal_expectation
from .valuation import EuropeanPayoff, delta as frictionless_delta, frictionless_value

__all__ = [
    "CostSpec",
    "ConditionalGains",
    "HedgeStep",
    "HedgeTrace",
    "conditional_gains",
    "solve_position",
    "hedge_step",
    "initial_position",
    "run_hedge",
]

_BRANCH_TOL = 1e-12


@dataclass(frozen=True)
class CostSpec:
    """Proportional transaction cost k in [0, 1): each trade pays k S |dpi|."""

    k: float

    def __post_init__(self):
        if not 0.0 <= self.k < 1.0:
            raise ModelParameterError(f"transaction cost k must be in [0, 1), got {self.k}")


@dataclass(frozen=True)
class ConditionalGains:
    """One-step conditional expectations given the path through t_i."""

    dX_hat: float    # E[X_{t+} - X_t | F_t]
    dS_hat: float    # E[S_{t+} | F_t] - S_t
    dV_pi_hat: float  # E[V^pi_{t+} | F_t] - V^pi_t
    rho_hat: float   # conditional sd of the noise over the step
    v_pi: float      # frictionless value at the current state


@dataclass(frozen=True)
class HedgeStep:
    i: int
    t: float
    s: float
    pi: float
    dpi: float
    v_k: float        # wealth with costs at t (cost of the trade at t not yet charged)
    v_pi: float
    gains: ConditionalGains
    residual: float
    cost_paid: float
    tie_break: bool = False


@dataclass
class HedgeTrace:
    steps: List[HedgeStep] = field(default_factory=list)
    terminal_time: float = 0.0
    s_terminal: float = 0.0
    v_terminal: float = 0.0
    payoff_terminal: float = 0.0
    tracking_error: float = 0.0
    total_cost: float = 0.0
    initial_wealth: float = 0.0
    aborted: Optional[str] = None


# ---------------------------------------------------------------------------
# conditional gains (one step of the prediction law applied to S and V^pi)
# ---------------------------------------------------------------------------

def _conditional_value_hat(payoff: EuropeanPayoff, s_u: float, shift: float,
                           rho: float, q_next: float, quad_order: int) -> float:
    """E[v(t_next, S_{t_next}) | F_u] as a tensor Gauss integral.

    The exponent is shift + rho*y + q_next*z with shift = gamma + dX_hat; the
    inner y-integral is the conditional law of the asset, the outer z carries
    the remaining variance to maturity.  Degenerate directions collapse to a
    single integral.
    """
    if rho == 0.0 and q_next == 0.0:
        return float(np.asarray(payoff.f(np.asarray([s_u * math.exp(shift)]))).ravel()[0])
    if rho == 0.0:
        return lognormal_expectation(payoff.f, s_u, shift, q_next, quad_order,
                                     x_kinks=payoff.kinks)
    if q_next == 0.0:
        return lognormal_expectation(payoff.f, s_u, shift, rho, quad_order,
                                     x_kinks=payoff.kinks)
    z, w = hermite_rule(quad_order)
    total = 0.0
    for zi, wi in zip(z, w):
        total += wi * lognormal_expectation(
            payoff.f, s_u, shift + q_next * zi, rho, quad_order, x_kinks=payoff.kinks
        )
    return total


def conditional_gains(market: MarketModel, kernel: DiscreteKernel,
                      q2: QuadraticVariation, payoff: EuropeanPayoff,
                      x_path: np.ndarray, u_index: int, next_index: int,
                      quad_order: int = 64) -> ConditionalGains:
    """Conditional gains over the step (t_u, t_next] given the observed path."""
    pts = kernel.grid.points
    t_u, t_next, T = pts[u_index], pts[next_index], kernel.grid.T
    x_path = np.asarray(x_path, dtype=float)
    s_u = market.s0 * math.exp(
        float(market.drift_mu(t_u)) - 0.5 * float(q2.q2(t_u)) + x_path[u_index]
    )
    dx_hat = conditional_mean_X(kernel, x_path, u_index, next_index) - x_path[u_index]
    rho = rho_hat(kernel, next_index, u_index)
    b = beta(market, q2, t_u, t_next)
    dS_hat = s_u * math.expm1(b + 0.5 * rho * rho + dx_hat)
    g = gamma(market, q2, t_u, t_next, T)
    q_next = math.sqrt(q2.increment(t_next, T))
    v_hat_next = _conditional_value_hat(payoff, s_u, g + dx_hat, rho, q_next, quad_order)
    v_pi = frictionless_value(payoff, q2, t_u, s_u, quad_order, T=T)
    return ConditionalGains(dX_hat=dx_hat, dS_hat=dS_hat,
                            dV_pi_hat=v_hat_next - v_pi, rho_hat=rho, v_pi=v_pi)


# ---------------------------------------------------------------------------
# the piecewise-linear position fixed point
# ---------------------------------------------------------------------------

def solve_position(a, b, pi_prev):
    """Solve pi = a + b |pi - pi_prev| by two-branch case analysis.

    Returns (pi, tie_break).  For |b| < 1 exactly one branch is consistent
    except on the boundary a == pi_prev, where both give (numerically) the
    same answer; the one with minimal |pi - pi_prev| (least cost) wins then
    and ``tie_break`` is flagged.  For |b| >= 1 the transaction cost
    dominates the expected gain and the fixed point may have zero or two
    solutions, so the recursion is declared degenerate.

    Accepts floats or exact ``fractions.Fraction`` inputs; the arithmetic is
    pure Python either way, so exact inputs give the exact root.
    """
    if abs(b) >= 1:
        raise DegenerateCostError(
            f"|b| = {float(abs(b)):g} >= 1: transaction cost dominates the "
            "expected gain, the position fixed point may not exist"
        )
    up = (a - b * pi_prev) / (1 - b)
    down = (a + b * pi_prev) / (1 + b)
    scale = max(1.0, abs(pi_prev), abs(a))
    up_ok = up >= pi_prev - _BRANCH_TOL * scale
    down_ok = down < pi_prev + _BRANCH_TOL * scale
    if up_ok and down_ok:
        if abs(up - pi_prev) <= abs(down - pi_prev):
            return up, True
        return down, True
    if up_ok:
        return up, False
    if down_ok:
        return down, False
    raise NoSolutionError(
        f"no consistent branch for pi = a + b|pi - pi_prev| "
        f"(a={float(a):g}, b={float(b):g}, pi_prev={float(pi_prev):g}; "
        f"candidates up={float(up):g}, down={float(down):g})",
        candidates=(float(up), float(down)),
    )


@dataclass(frozen=True)
class _StepResult:
    # exact Fractions when produced by hedge_step; float() them for reporting
    pi: object
    dpi: object
    cost: object
    residual: object
    v_next: object
    tie_break: bool


def hedge_step(v_k, pi_prev, gains: ConditionalGains, s_u: float,
               s_next: float, cost: CostSpec, step_index: int | None = None) -> _StepResult:
    """One step of the recursion: solve the position, charge the trade cost,
    and advance wealth with the realized asset increment.

    The accounting runs in exact rational arithmetic over the (float-valued)
    inputs.  The recursion amplifies tracking errors by roughly the ratio of
    realized to expected one-step asset moves, so positions can grow by
    orders of magnitude along a path; doing the wealth algebra exactly keeps
    the per-step conditional-mean identity residual at zero instead of
    rounding noise scaled by the position.  ``v_k`` and ``pi_prev`` may be
    Fractions to chain steps without intermediate rounding."""
    eps = 1e-10 * s_u
    if abs(gains.dS_hat) <= eps:
        raise SingularHedgeError(
            f"expected asset gain {gains.dS_hat:g} is (near) zero at step "
            f"{step_index}; the hedge recursion divides by it and is undefined "
            "for (near-)martingale models", step=step_index,
        )
    v_k = Fraction(v_k)
    pi_prev = Fraction(pi_prev)
    dS = Fraction(gains.dS_hat)
    target = Fraction(gains.v_pi) + Fraction(gains.dV_pi_hat)
    ks = Fraction(cost.k) * Fraction(s_u)
    a = (target - v_k) / dS
    b = ks / dS
    pi, tie = solve_position(a, b, pi_prev)
    dpi = pi - pi_prev
    paid = ks * abs(dpi)
    residual = (v_k + pi * dS - paid) - target
    v_next = v_k + pi * (Fraction(s_next) - Fraction(s_u)) - paid
    return _StepResult(pi=pi, dpi=dpi, cost=paid, residual=residual,
                       v_next=v_next, tie_break=tie)


def initial_position(cost: CostSpec, dS_hat_0: float, s0: float, ev_pi_t1: float):
    """Minimal-cost initial pair (beta0, pi0) under the budget constraint.

    Bounded iff k >= |dS_hat_0| / S0, in which case all wealth starts in the
    riskless asset: pi0 = 0, beta0 = E[V^pi_{t_1}] (independent of the claim).
    """
    threshold = abs(dS_hat_0) / s0
    if cost.k < threshold - 1e-15:
        raise UnboundedInitialPositionError(
            f"minimal-cost initial position is unbounded: k={cost.k:g} below the "
            f"expected-return threshold |dS_hat/S0|={threshold:g}"
        )
    return ev_pi_t1, 0.0


# ---------------------------------------------------------------------------
# full per-path recursion
# ---------------------------------------------------------------------------

def run_hedge(market: MarketModel, kernel: DiscreteKernel, q2: QuadraticVariation,
              payoff: EuropeanPayoff, x_path: np.ndarray, trading_indices,
              cost: CostSpec, init_policy: str = "delta",
              quad_order: int = 64) -> HedgeTrace:
    """Run the conditional-mean hedge along one path.

    ``trading_indices`` are simulation-grid indices strictly inside (0, n);
    the position set at the last of them is held to maturity T.  The
    ``init_policy`` fixes the non-unique time-0 position: ``"riskless"`` uses
    the minimal-cost optimizer (may raise for small k), ``"delta"`` starts
    from the frictionless delta, with the riskless account balancing the
    conditional-mean budget either way.

    Engine failures mid-path (singular step, degenerate cost, no consistent
    branch) abort the run: the partial trace is returned with ``aborted`` set
    to the failure message and the terminal fields reflect the wealth carried
    to maturity with the last solved position.
    """
    grid = kernel.grid
    n = grid.n
    idx = [int(i) for i in trading_indices]
    if any(not 0 < i < n for i in idx) or sorted(set(idx)) != idx:
        raise ValueError("trading indices must be strictly increasing inside (0, n)")
    sched = [0] + idx + [n]
    pts = grid.points
    x_path = np.asarray(x_path, dtype=float)
    drift = np.asarray(market.drift_mu(pts), dtype=float)
    qq = np.asarray(q2.q2(pts), dtype=float)
    s_path = market.s0 * np.exp(drift - 0.5 * qq + x_path)

    trace = HedgeTrace()
    # time-0 position and budget, exact so the step-0 identity holds for any pi0
    g0 = conditional_gains(market, kernel, q2, payoff, x_path, 0, sched[1], quad_order)
    target0 = Fraction(g0.v_pi) + Fraction(g0.dV_pi_hat)
    if init_policy == "riskless":
        _, pi0 = initial_position(cost, g0.dS_hat, market.s0, float(target0))
    elif init_policy == "delta":
        pi0 = frictionless_delta(payoff, q2, 0.0, market.s0, quad_order, T=grid.T)
    else:
        raise ValueError(f"unknown init policy {init_policy!r}")
    pi = Fraction(pi0)
    ks0 = Fraction(cost.k) * Fraction(market.s0)
    cost0 = ks0 * abs(pi)
    v_k = target0 - pi * Fraction(g0.dS_hat) + cost0
    trace.initial_wealth = float(v_k)
    residual0 = (v_k + pi * Fraction(g0.dS_hat) - cost0) - target0
    trace.steps.append(HedgeStep(
        i=0, t=0.0, s=market.s0, pi=float(pi), dpi=float(pi), v_k=float(v_k),
        v_pi=g0.v_pi, gains=g0, residual=float(residual0), cost_paid=float(cost0),
    ))
    v_k = v_k + pi * (Fraction(float(s_path[sched[1]])) - Fraction(market.s0)) - cost0

    for step, (u, nxt) in enumerate(zip(sched[1:-1], sched[2:]), start=1):
        gains = conditional_gains(market, kernel, q2, payoff, x_path, u, nxt, quad_order)
        try:
            res = hedge_step(v_k, pi, gains, float(s_path[u]), float(s_path[nxt]),
                             cost, step_index=step)
        except (SingularHedgeError, NoSolutionError, DegenerateCostError) as err:
            trace.aborted = str(err)
            break
        trace.steps.append(HedgeStep(
            i=step, t=pts[u], s=float(s_path[u]), pi=float(res.pi),
            dpi=float(res.dpi), v_k=float(v_k), v_pi=gains.v_pi, gains=gains,
            residual=float(res.residual), cost_paid=float(res.cost),
            tie_break=res.tie_break,
        ))
        pi = res.pi
        v_k = res.v_next

    if trace.aborted is not None:
        # carry the last solved position through the realized path to T
        last_u = sched[len(trace.steps)]
        v_k = v_k + pi * (Fraction(float(s_path[n])) - Fraction(float(s_path[last_u])))

    trace.terminal_time = grid.T
    trace.s_terminal = float(s_path[n])
    trace.v_terminal = float(v_k)
    trace.payoff_terminal = float(np.asarray(payoff.f(np.asarray([s_path[n]]))).ravel()[0])
    trace.tracking_error = trace.v_terminal - trace.payoff_terminal
    trace.total_cost = sum(s.cost_paid for s in trace.steps)
    return trace
