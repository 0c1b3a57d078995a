"""Declarative experiment configuration: YAML schema, validation with
unknown-key rejection, defaults, and assembly of model objects."""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import yaml

from .errors import ConfigError, ModelParameterError
from .kernels import TimeGrid, build_kernel
from .models import (
    MarketModel,
    brownian_motion,
    constant_drift,
    custom_covariance,
    fractional_bm,
    mixed_fbm,
    piecewise_linear_drift,
    quadratic_variation,
)
from .valuation import call, constant_payoff, identity_payoff, put

__all__ = ["ExperimentConfig", "parse_config", "load_config"]

_MODEL_KINDS = ("bm", "fbm", "mixed_fbm")
_PAYOFF_KINDS = ("call", "put", "identity", "constant")
_KERNEL_SOURCES = ("auto", "analytic", "cholesky")
_INIT_POLICIES = ("delta", "riskless")

_DEFAULTS = {
    "model": {"kind": "bm", "hurst": None},
    "s0": 1.0,
    "maturity": 1.0,
    "drift": {"rate": 0.0, "knots": None},
    "grid_n": 64,
    "trading_times": 10,
    "payoff": {"kind": "call", "strike": None, "value": None},
    "cost_k": 0.0,
    "n_paths": 1000,
    "seed": 2024,
    "quad_order": 64,
    "kernel": "auto",
    "init_policy": "delta",
    "out_dir": None,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved declarative description of one experiment."""

    model_kind: str
    hurst: Optional[float]
    s0: float
    maturity: float
    drift_rate: float
    drift_knots: Optional[list]
    grid_n: int
    trading_times: List[float]
    payoff_kind: str
    strike: Optional[float]
    payoff_value: Optional[float]
    cost_k: float
    n_paths: int
    seed: int
    quad_order: int
    kernel_source: str
    init_policy: str
    out_dir: Optional[str]

    def to_dict(self) -> dict:
        return {
            "model": {"kind": self.model_kind, "hurst": self.hurst},
            "s0": self.s0,
            "maturity": self.maturity,
            "drift": {"rate": self.drift_rate, "knots": self.drift_knots},
            "grid_n": self.grid_n,
            "trading_times": list(self.trading_times),
            "payoff": {"kind": self.payoff_kind, "strike": self.strike,
                       "value": self.payoff_value},
            "cost_k": self.cost_k,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "quad_order": self.quad_order,
            "kernel": self.kernel_source,
            "init_policy": self.init_policy,
            "out_dir": self.out_dir,
        }

    def digest(self) -> str:
        """Stable short hash of the resolved configuration."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:10]

    # ---- object assembly -------------------------------------------------

    def make_noise(self):
        if self.model_kind == "bm":
            return brownian_motion()
        if self.model_kind == "fbm":
            return fractional_bm(self.hurst)
        return mixed_fbm(self.hurst)

    def make_market(self) -> MarketModel:
        if self.drift_knots is not None:
            drift = piecewise_linear_drift(self.drift_knots)
        else:
            drift = constant_drift(self.drift_rate)
        return MarketModel(noise=self.make_noise(), s0=self.s0, drift_mu=drift,
                           T=self.maturity)

    def make_grid(self) -> TimeGrid:
        return TimeGrid.uniform(self.maturity, self.grid_n)

    def make_kernel(self, grid=None):
        return build_kernel(self.make_noise(), grid or self.make_grid(),
                            source=self.kernel_source)

    def make_q2(self, kernel=None):
        return quadratic_variation(self.make_noise(), grid=self.make_grid(),
                                   kernel=kernel)

    def make_payoff(self):
        if self.payoff_kind == "call":
            return call(self.strike)
        if self.payoff_kind == "put":
            return put(self.strike)
        if self.payoff_kind == "identity":
            return identity_payoff()
        return constant_payoff(self.payoff_value)

    def trading_grid_indices(self, grid: TimeGrid) -> List[int]:
        """Map trading times to grid indices, snapping within half a step."""
        pts = grid.points
        out = []
        for t in self.trading_times:
            i = int(np.argmin(np.abs(pts - t)))
            off = abs(pts[i] - t)
            half = 0.5 * min(np.diff(pts))
            if off > half + 1e-12:
                raise ConfigError(
                    f"trading time {t} is off the simulation grid by {off:g} "
                    f"(more than half a step)"
                )
            if off > 1e-12:
                warnings.warn(
                    f"trading time {t} snapped to grid point {pts[i]:g}",
                    stacklevel=2,
                )
            if not 0 < i < grid.n:
                raise ConfigError(f"trading time {t} must lie strictly inside (0, T)")
            out.append(i)
        if sorted(set(out)) != out:
            raise ConfigError("trading times collapse to duplicate grid points")
        return out


def _require_keys(mapping: dict, allowed: dict, path: str) -> None:
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"unknown configuration key {path}{key!r}")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate the YAML key-value schema; unknown keys are errors."""
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as err:
        raise ConfigError(f"malformed configuration: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping of keys to values")
    _require_keys(raw, _DEFAULTS, "")

    def section(name):
        sec = raw.get(name, {})
        if sec is None:
            sec = {}
        if not isinstance(sec, dict):
            raise ConfigError(f"{name!r} must be a mapping")
        _require_keys(sec, _DEFAULTS[name], f"{name}.")
        merged = dict(_DEFAULTS[name])
        merged.update(sec)
        return merged

    model = section("model")
    drift = section("drift")
    payoff = section("payoff")

    kind = model["kind"]
    if kind not in _MODEL_KINDS:
        raise ConfigError(f"model.kind must be one of {_MODEL_KINDS}, got {kind!r}")
    hurst = model["hurst"]
    if kind == "bm":
        hurst = None
    elif hurst is None:
        raise ConfigError(f"model.kind={kind!r} requires model.hurst")
    else:
        hurst = float(hurst)
        if kind == "fbm" and not 0.5 <= hurst < 1.0:
            raise ConfigError(
                f"model.hurst={hurst} out of range: fbm requires H in [1/2, 1)"
            )
        if kind == "mixed_fbm" and not 0.5 < hurst < 1.0:
            raise ConfigError(
                f"model.hurst={hurst} out of range: mixed_fbm requires H in (1/2, 1)"
            )

    s0 = float(raw.get("s0", _DEFAULTS["s0"]))
    maturity = float(raw.get("maturity", _DEFAULTS["maturity"]))
    if s0 <= 0:
        raise ConfigError(f"s0 must be positive, got {s0}")
    if maturity <= 0:
        raise ConfigError(f"maturity must be positive, got {maturity}")

    grid_n = int(raw.get("grid_n", _DEFAULTS["grid_n"]))
    if grid_n < 2:
        raise ConfigError(f"grid_n must be >= 2, got {grid_n}")

    tt = raw.get("trading_times", _DEFAULTS["trading_times"])
    if isinstance(tt, int):
        if tt < 1:
            raise ConfigError("trading_times count must be >= 1")
        times = [i * maturity / (tt + 1) for i in range(1, tt + 1)]
    elif isinstance(tt, (list, tuple)):
        times = [float(t) for t in tt]
    else:
        raise ConfigError("trading_times must be a count or a list of times")
    for t in times:
        if not 0.0 < t < maturity:
            raise ConfigError(f"trading time {t} must lie strictly inside (0, T)")
    if sorted(times) != times or len(set(times)) != len(times):
        raise ConfigError("trading times must be strictly increasing")

    pk = payoff["kind"]
    if pk not in _PAYOFF_KINDS:
        raise ConfigError(f"payoff.kind must be one of {_PAYOFF_KINDS}, got {pk!r}")
    strike = payoff["strike"]
    value = payoff["value"]
    if pk in ("call", "put"):
        strike = s0 if strike is None else float(strike)
        if strike <= 0:
            raise ConfigError(f"payoff.strike must be positive, got {strike}")
    else:
        strike = None
    if pk == "constant":
        value = 0.0 if value is None else float(value)
    else:
        value = None

    cost_k = float(raw.get("cost_k", _DEFAULTS["cost_k"]))
    if not 0.0 <= cost_k < 1.0:
        raise ConfigError(f"cost_k must be in [0, 1), got {cost_k}")

    n_paths = int(raw.get("n_paths", _DEFAULTS["n_paths"]))
    if n_paths < 1:
        raise ConfigError(f"n_paths must be >= 1, got {n_paths}")

    seed = int(raw.get("seed", _DEFAULTS["seed"]))

    quad_order = int(raw.get("quad_order", _DEFAULTS["quad_order"]))
    if quad_order < 2:
        raise ConfigError(f"quad_order must be >= 2, got {quad_order}")

    kernel = raw.get("kernel", _DEFAULTS["kernel"])
    if kernel not in _KERNEL_SOURCES:
        raise ConfigError(f"kernel must be one of {_KERNEL_SOURCES}, got {kernel!r}")

    init_policy = raw.get("init_policy", _DEFAULTS["init_policy"])
    if init_policy not in _INIT_POLICIES:
        raise ConfigError(
            f"init_policy must be one of {_INIT_POLICIES}, got {init_policy!r}"
        )

    knots = drift["knots"]
    if knots is not None:
        try:
            knots = [[float(a), float(b)] for a, b in knots]
        except (TypeError, ValueError) as err:
            raise ConfigError(f"drift.knots must be [t, mu] pairs: {err}") from err

    return ExperimentConfig(
        model_kind=kind,
        hurst=hurst,
        s0=s0,
        maturity=maturity,
        drift_rate=float(drift["rate"]),
        drift_knots=knots,
        grid_n=grid_n,
        trading_times=times,
        payoff_kind=pk,
        strike=strike,
        payoff_value=value,
        cost_k=cost_k,
        n_paths=n_paths,
        seed=seed,
        quad_order=quad_order,
        kernel_source=kernel,
        init_policy=init_policy,
        out_dir=raw.get("out_dir", None),
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
