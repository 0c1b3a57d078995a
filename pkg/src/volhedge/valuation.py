"""European vanilla payoffs, frictionless replication values and deltas, and
the closed-form lognormal oracle used to cross-check the quadrature route."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.stats import norm

from .errors import ModelParameterError
from .models import QuadraticVariation
from .quadrature import lognormal_expectation

__all__ = [
    "EuropeanPayoff",
    "call",
    "put",
    "identity_payoff",
    "constant_payoff",
    "custom_payoff",
    "frictionless_value",
    "delta",
    "bs_closed_form",
    "hedge_value_path",
]


@dataclass(frozen=True)
class EuropeanPayoff:
    """Convex or concave payoff f with at most linear growth in the price."""

    kind: str
    f: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    convexity: str  # "convex" | "concave"
    kinks: Tuple[float, ...] = ()
    strike: Optional[float] = None

    def __call__(self, x):
        return self.f(x)


def call(strike: float) -> EuropeanPayoff:
    if strike <= 0:
        raise ModelParameterError(f"call strike must be positive, got {strike}")
    return EuropeanPayoff(
        kind="call",
        f=lambda x: np.maximum(np.asarray(x, dtype=float) - strike, 0.0),
        derivative=lambda x: (np.asarray(x, dtype=float) > strike).astype(float),
        convexity="convex",
        kinks=(strike,),
        strike=strike,
    )


def put(strike: float) -> EuropeanPayoff:
    if strike <= 0:
        raise ModelParameterError(f"put strike must be positive, got {strike}")
    return EuropeanPayoff(
        kind="put",
        f=lambda x: np.maximum(strike - np.asarray(x, dtype=float), 0.0),
        derivative=lambda x: -(np.asarray(x, dtype=float) < strike).astype(float),
        convexity="convex",
        kinks=(strike,),
        strike=strike,
    )


def identity_payoff() -> EuropeanPayoff:
    return EuropeanPayoff(
        kind="identity",
        f=lambda x: np.asarray(x, dtype=float),
        derivative=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        convexity="convex",
    )


def constant_payoff(c: float) -> EuropeanPayoff:
    return EuropeanPayoff(
        kind="constant",
        f=lambda x: np.full_like(np.asarray(x, dtype=float), c),
        derivative=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        convexity="convex",
    )


def custom_payoff(f, derivative=None, convexity: str = "convex", kinks=()) -> EuropeanPayoff:
    return EuropeanPayoff(
        kind="custom", f=f, derivative=derivative, convexity=convexity,
        kinks=tuple(kinks),
    )


# ---------------------------------------------------------------------------
# values and deltas
# ---------------------------------------------------------------------------

def frictionless_value(payoff: EuropeanPayoff, q2: QuadraticVariation, t: float,
                       x: float, quad_order: int = 64, T: float | None = None) -> float:
    """v(t, x) = int f(x e^{-q^2(t,T)/2 + q(t,T) z}) phi(z) dz.

    ``T`` defaults to the end of q2's definition only when passed explicitly
    by callers; the remaining total variance is q2.increment(t, T).
    """
    if T is None:
        raise ValueError("frictionless_value needs the maturity T")
    var = q2.increment(t, T)
    rho = math.sqrt(var)
    return lognormal_expectation(
        payoff.f, x, -0.5 * var, rho, quad_order, x_kinks=payoff.kinks
    )


def delta(payoff: EuropeanPayoff, q2: QuadraticVariation, t: float, x: float,
          quad_order: int = 64, T: float | None = None) -> float:
    """Replicating position dv/dx(t, x).

    Uses the differentiated quadrature int f'(x e^c) e^c phi(z) dz for
    payoffs with a known derivative (valid by convexity and linear growth);
    central finite differences (relative step 1e-5) otherwise.  With zero
    remaining variance the delta is f'(x), undefined at a kink.
    """
    if T is None:
        raise ValueError("delta needs the maturity T")
    var = q2.increment(t, T)
    if var == 0.0:
        if any(abs(x - k) < 1e-12 * max(1.0, abs(x)) for k in payoff.kinks):
            raise ModelParameterError(
                f"derivative undefined at payoff kink x={x} with zero remaining variance"
            )
        return float(np.asarray(payoff.derivative(np.asarray([x]))).ravel()[0])
    rho = math.sqrt(var)
    if payoff.derivative is not None:
        def g(y):
            return payoff.derivative(y) * (y / x)

        return lognormal_expectation(g, x, -0.5 * var, rho, quad_order,
                                     x_kinks=payoff.kinks)
    step = 1e-5 * max(abs(x), 1e-8)
    up = frictionless_value(payoff, q2, t, x + step, quad_order, T=T)
    dn = frictionless_value(payoff, q2, t, x - step, quad_order, T=T)
    return (up - dn) / (2.0 * step)


def bs_closed_form(strike: float, x: float, total_variance: float):
    """Closed-form lognormal call (zero rate, aggregate variance) -> (value, delta)."""
    if strike <= 0 or x <= 0:
        raise ModelParameterError("bs_closed_form needs positive strike and price")
    if total_variance < 0:
        raise ModelParameterError("total_variance must be >= 0")
    if total_variance == 0.0:
        return max(x - strike, 0.0), float(x > strike)
    sig = math.sqrt(total_variance)
    d1 = (math.log(x / strike) + 0.5 * total_variance) / sig
    d2 = d1 - sig
    value = x * norm.cdf(d1) - strike * norm.cdf(d2)
    return float(value), float(norm.cdf(d1))


def hedge_value_path(payoff: EuropeanPayoff, q2: QuadraticVariation,
                     s_path: np.ndarray, grid, quad_order: int = 64) -> np.ndarray:
    """Frictionless value v(t_i, S_{t_i}) along one asset path; exact f(S_T) at T."""
    s_path = np.asarray(s_path, dtype=float)
    pts = grid.points
    out = np.empty_like(s_path)
    T = grid.T
    for i, (t, s) in enumerate(zip(pts, s_path)):
        out[i] = frictionless_value(payoff, q2, t, s, quad_order, T=T)
    out[-1] = float(np.asarray(payoff.f(np.asarray([s_path[-1]]))).ravel()[0])
    return out
