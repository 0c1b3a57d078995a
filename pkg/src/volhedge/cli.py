"""Command-line experiment runner.

Subcommands: verify, simulate, predict, price, hedge.  Each reads a YAML
configuration, writes CSV artifacts (and figures) named with the resolved
config hash, and prints summary statistics.  Exit codes: 0 success, 2
configuration error, 3 verification-check failure, 4 engine abort.
"""

from __future__ import annotations

import dataclasses
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import click
import numpy as np
import yaml

from . import report
from .config import ExperimentConfig, load_config, parse_config
from .errors import (
    ConfigError,
    DegenerateCostError,
    ModelParameterError,
    NoSolutionError,
    NotPositiveDefiniteError,
    SingularHedgeError,
    SingularKernelError,
    UnboundedInitialPositionError,
)
from .hedging import CostSpec, run_hedge
from .kernels import TimeGrid, apply_Kstar, build_kernel, recover_innovations, \
    reconstruct_noise, solve_Kstar
from .models import fractional_bm, quadratic_variation
from .paths import path_rng, realized_qv, simple_arbitrage_check, simulate_paths
from .prediction import conditional_cov, conditional_mean_X, prediction_law
from .valuation import bs_closed_form, call, delta as frictionless_delta, \
    frictionless_value

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECK = 3
EXIT_ENGINE = 4

_ENGINE_ERRORS = (
    NotPositiveDefiniteError,
    SingularKernelError,
    SingularHedgeError,
    DegenerateCostError,
    NoSolutionError,
    UnboundedInitialPositionError,
    ModelParameterError,
)

OUT_DIR_ENV = "VOLHEDGE_OUT_DIR"


def _common(func):
    func = click.option("--config", "config_path", type=click.Path(exists=True),
                        default=None, help="YAML experiment configuration.")(func)
    func = click.option("--seed", type=int, default=None,
                        help="Override the master seed.")(func)
    func = click.option("--threads", type=int, default=1, show_default=True,
                        help="Worker threads for per-path computation.")(func)
    func = click.option("--out-dir", type=click.Path(), default=None,
                        help=f"Output directory (default ${OUT_DIR_ENV} or ./out).")(func)
    func = click.option("--plot/--no-plot", default=True, show_default=True,
                        help="Render figures alongside the CSV output.")(func)
    return func


def _resolve(config_path, seed, out_dir) -> tuple[ExperimentConfig, str]:
    if config_path is None:
        cfg = parse_config("")
    else:
        cfg = load_config(config_path)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    out = out_dir or cfg.out_dir or os.environ.get(OUT_DIR_ENV) or "out"
    os.makedirs(out, exist_ok=True)
    return cfg, out


def _emit_config(cfg: ExperimentConfig, out: str, cmd: str) -> str:
    path = os.path.join(out, f"{cfg.digest()}_{cmd}_config.yaml")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=True, default_flow_style=False)
    return path


def _build(cfg: ExperimentConfig):
    market = cfg.make_market()
    grid = cfg.make_grid()
    kernel = cfg.make_kernel(grid)
    q2 = quadratic_variation(market.noise, grid, kernel=kernel)
    return market, grid, kernel, q2


@click.group()
def main():
    """Gaussian Volterra price models: simulation, prediction, valuation and
    conditional-mean hedging under proportional costs."""


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _run_checks(cfg: ExperimentConfig, corrupt: bool = False):
    """The numerical check battery; returns [(name, passed, value, threshold)]."""
    market, grid, kernel, q2 = _build(cfg)
    if corrupt:
        kernel.L[-1, 0] += 0.1  # deliberate damage, for exercising failures
    results = []

    tol = 1e-3 if kernel.source.startswith("analytic") else 1e-10
    err = float(np.max(np.abs(kernel.L @ kernel.L.T - kernel.R_grid)))
    results.append(("covariance_reconstruction", err <= tol, err, tol))

    rng = path_rng(cfg.seed, 0)
    f = rng.standard_normal(grid.n)
    round1 = float(np.max(np.abs(apply_Kstar(kernel, solve_Kstar(kernel, f)) - f)))
    results.append(("inverse_pair_adjoint", round1 <= 1e-8, round1, 1e-8))
    x = np.concatenate([[0.0], kernel.L @ rng.standard_normal(grid.n)])
    round2 = float(np.max(np.abs(
        reconstruct_noise(kernel, recover_innovations(kernel, x)) - x)))
    results.append(("inverse_pair_transfer", round2 <= 1e-8, round2, 1e-8))

    # realized QV under refinement vs the model bracket
    qv_levels = []
    for n_level in (grid.n // 4, grid.n // 2, grid.n):
        g = TimeGrid.uniform(grid.T, max(n_level, 8))
        kn = build_kernel(market.noise, g, source=cfg.kernel_source)
        qq = quadratic_variation(market.noise, g, kernel=kn)
        ps = simulate_paths(market, kn, 50, cfg.seed, q2=qq)
        qv_levels.append(float(np.mean([realized_qv(p) for p in ps.x_paths])))
    target = float(q2.q2(grid.T))
    if cfg.model_kind == "fbm" and (cfg.hurst or 0.5) > 0.5:
        ok = qv_levels[0] > qv_levels[1] > qv_levels[2]
        results.append(("qv_refinement_monotone", ok, qv_levels[-1], qv_levels[0]))
    else:
        gap = abs(qv_levels[-1] - target)
        tol_qv = 0.25 * max(target, 1e-3)
        results.append(("qv_refinement_target", gap <= tol_qv, gap, tol_qv))

    # two-route prediction oracle
    ps = simulate_paths(market, kernel, 3, cfg.seed, q2=q2)
    worst = 0.0
    for p in range(3):
        for u in (grid.n // 4, grid.n // 2):
            for t in (u + 1, grid.n):
                a = conditional_mean_X(kernel, ps.x_paths[p], u, t, route="psi")
                b = conditional_mean_X(kernel, ps.x_paths[p], u, t, route="innovations")
                worst = max(worst, abs(a - b))
    results.append(("prediction_two_routes", worst <= 1e-10, worst, 1e-10))

    # quadrature vs closed form on a reference call
    ref = call(cfg.s0)
    worst_v = worst_d = 0.0
    for var in (0.01, 0.25, 1.0):
        for x0 in (0.8 * cfg.s0, cfg.s0, 1.25 * cfg.s0):
            q2_flat = _flat_variance(var, grid.T)
            v = frictionless_value(ref, q2_flat, 0.0, x0, cfg.quad_order, T=grid.T)
            d = frictionless_delta(ref, q2_flat, 0.0, x0, cfg.quad_order, T=grid.T)
            v0, d0 = bs_closed_form(cfg.s0, x0, var)
            worst_v = max(worst_v, abs(v - v0))
            worst_d = max(worst_d, abs(d - d0))
    results.append(("quadrature_value_vs_closed_form", worst_v <= 1e-6, worst_v, 1e-6))
    results.append(("quadrature_delta_vs_closed_form", worst_d <= 1e-5, worst_d, 1e-5))

    # hedge residual on one path (needs a nonzero expected gain)
    if cfg.drift_rate != 0.0 or cfg.drift_knots is not None:
        idx = cfg.trading_grid_indices(grid)
        tr = run_hedge(market, kernel, q2, cfg.make_payoff(), ps.x_paths[0], idx,
                       CostSpec(cfg.cost_k), init_policy=cfg.init_policy,
                       quad_order=cfg.quad_order)
        res = max(abs(s.residual) for s in tr.steps)
        results.append(("hedge_step_residual", res <= 1e-10, res, 1e-10))

    # simple-arbitrage identity on the reference persistent model
    fb = fractional_bm(0.75)
    mk = dataclasses.replace(market, noise=fb)
    gaps = []
    for n_level in (64, 128, 256):
        g = TimeGrid.uniform(grid.T, n_level)
        kn = build_kernel(fb, g)
        qq = quadratic_variation(fb, g, kernel=kn)
        pp = simulate_paths(mk, kn, 50, cfg.seed, q2=qq)
        gaps.append(float(np.mean([
            abs(np.subtract(*simple_arbitrage_check(pp.s_paths[p], n_level // 4, n_level)))
            for p in range(50)])))
    ok = gaps[0] > gaps[1] > gaps[2]
    results.append(("simple_arbitrage_gap_decreases", ok, gaps[-1], gaps[0]))
    return results


def _flat_variance(var: float, T: float):
    """Constant-rate bracket with total variance ``var`` on [0, T]."""
    from .models import QuadraticVariation

    return QuadraticVariation(q2=lambda t: var * np.asarray(t, dtype=float) / T)


@main.command()
@_common
@click.option("--corrupt-kernel", is_flag=True, hidden=True,
              help="Damage the kernel before checking (failure-path test hook).")
def verify(config_path, seed, threads, out_dir, plot, corrupt_kernel):
    """Run the numerical check battery and emit a pass/fail report."""
    try:
        cfg, out = _resolve(config_path, seed, out_dir)
    except ConfigError as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        results = _run_checks(cfg, corrupt=corrupt_kernel)
    except _ENGINE_ERRORS as err:
        click.echo(f"engine abort: {err}", err=True)
        sys.exit(EXIT_ENGINE)
    _emit_config(cfg, out, "verify")
    rows = [(name, "pass" if ok else "fail", value, threshold)
            for name, ok, value, threshold in results]
    path = report.write_csv(os.path.join(out, f"{cfg.digest()}_verify_checks.csv"),
                            ["check", "status", "value", "threshold"], rows)
    if plot:
        report.render_verify_figure(results,
                                    os.path.join(out, f"{cfg.digest()}_verify_checks.png"))
    failed = [name for name, ok, _, _ in results if not ok]
    for name, ok, value, threshold in results:
        click.echo(f"{'PASS' if ok else 'FAIL'} {name}: {value:.3e} vs {threshold:.3e}")
    click.echo(f"report: {path}")
    if failed:
        click.echo(f"{len(failed)} check(s) failed: {', '.join(failed)}", err=True)
        sys.exit(EXIT_CHECK)


# ---------------------------------------------------------------------------
# simulate / predict / price / hedge
# ---------------------------------------------------------------------------

def _guard(fn):
    """Shared error-to-exit-code mapping for the artifact commands."""
    def wrapped(config_path, seed, threads, out_dir, plot, **kw):
        try:
            cfg, out = _resolve(config_path, seed, out_dir)
        except ConfigError as err:
            click.echo(f"config error: {err}", err=True)
            sys.exit(EXIT_CONFIG)
        try:
            fn(cfg, out, threads, plot, **kw)
        except ConfigError as err:
            click.echo(f"config error: {err}", err=True)
            sys.exit(EXIT_CONFIG)
        except _ENGINE_ERRORS as err:
            click.echo(f"engine abort: {err}", err=True)
            sys.exit(EXIT_ENGINE)
    wrapped.__name__ = fn.__name__
    wrapped.__doc__ = fn.__doc__
    return wrapped


@main.command()
@_common
def simulate(**kw):
    """Simulate asset paths; emit (path_id, t, X, S) rows and a path figure."""
    _guard(_cmd_simulate)(**{k: kw[k] for k in
                             ("config_path", "seed", "threads", "out_dir", "plot")})


def _cmd_simulate(cfg, out, threads, plot):
    market, grid, kernel, q2 = _build(cfg)
    ps = simulate_paths(market, kernel, cfg.n_paths, cfg.seed, q2=q2)
    rows = ((p, t, ps.x_paths[p, i], ps.s_paths[p, i])
            for p in range(cfg.n_paths) for i, t in enumerate(grid.points))
    path = report.write_csv(os.path.join(out, f"{cfg.digest()}_simulate_paths.csv"),
                            ["path_id", "t", "X", "S"], rows)
    _emit_config(cfg, out, "simulate")
    if plot:
        report.render_simulate_figure(grid, ps.s_paths,
                                      os.path.join(out, f"{cfg.digest()}_simulate_paths.png"))
    qv = np.mean([realized_qv(p) for p in ps.x_paths])
    click.echo(f"paths: {cfg.n_paths}  terminal S mean {ps.s_paths[:, -1].mean():.6f} "
               f"sd {ps.s_paths[:, -1].std(ddof=1):.6f}  mean realized QV {qv:.6f}")
    click.echo(f"artifact: {path}")


@main.command()
@_common
def predict(**kw):
    """Conditional law of the noise given one observed path prefix."""
    _guard(_cmd_predict)(**{k: kw[k] for k in
                            ("config_path", "seed", "threads", "out_dir", "plot")})


def _cmd_predict(cfg, out, threads, plot):
    market, grid, kernel, q2 = _build(cfg)
    ps = simulate_paths(market, kernel, 1, cfg.seed, q2=q2)
    x_path = ps.x_paths[0]
    n = grid.n
    rows = []
    laws = {}
    for u in sorted({n // 4, n // 2, (3 * n) // 4}):
        law = prediction_law(kernel, x_path, u)
        laws[u] = law
        for t in range(u, n + 1):
            rows.append((grid.points[u], grid.points[t], law.mean[t], law.rho[t],
                         conditional_cov(kernel, t, t, u) if t > u else 0.0))
    path = report.write_csv(os.path.join(out, f"{cfg.digest()}_predict_law.csv"),
                            ["u", "t", "X_hat", "rho_hat", "R_hat"], rows)
    _emit_config(cfg, out, "predict")
    if plot:
        u = n // 2
        report.render_predict_figure(grid, x_path, u, laws[u].mean, laws[u].rho,
                                     os.path.join(out, f"{cfg.digest()}_predict_law.png"))
    u = n // 2
    click.echo(f"at u={grid.points[u]:.4f}: X_u={x_path[u]:.6f} "
               f"X_hat(T)={laws[u].mean[n]:.6f} rho_hat(T)={laws[u].rho[n]:.6f}")
    click.echo(f"artifact: {path}")


@main.command()
@_common
def price(**kw):
    """Frictionless values and deltas on a (t, x) grid, with a closed-form
    oracle column for vanilla calls."""
    _guard(_cmd_price)(**{k: kw[k] for k in
                          ("config_path", "seed", "threads", "out_dir", "plot")})


def _cmd_price(cfg, out, threads, plot):
    market, grid, kernel, q2 = _build(cfg)
    payoff = cfg.make_payoff()
    times = np.linspace(0.0, 0.95 * grid.T, 20)
    xs = np.linspace(0.5 * cfg.s0, 1.5 * cfg.s0, 20)
    rows = []
    slice0_v, slice0_d = [], []
    for t in times:
        for x in xs:
            v = frictionless_value(payoff, q2, t, x, cfg.quad_order, T=grid.T)
            d = frictionless_delta(payoff, q2, t, x, cfg.quad_order, T=grid.T)
            if payoff.kind == "call":
                v0, d0 = bs_closed_form(payoff.strike, x, q2.increment(t, grid.T))
                rows.append((t, x, v, d, v0, d0))
            else:
                rows.append((t, x, v, d, "", ""))
            if t == times[0]:
                slice0_v.append(v)
                slice0_d.append(d)
    path = report.write_csv(os.path.join(out, f"{cfg.digest()}_price_grid.csv"),
                            ["t", "x", "value", "delta", "value_oracle", "delta_oracle"],
                            rows)
    _emit_config(cfg, out, "price")
    if plot:
        report.render_price_figure(xs, np.array(slice0_v), np.array(slice0_d),
                                   os.path.join(out, f"{cfg.digest()}_price_grid.png"))
    v_at = frictionless_value(payoff, q2, 0.0, cfg.s0, cfg.quad_order, T=grid.T)
    click.echo(f"value at (0, S0) = {v_at:.8f}")
    click.echo(f"artifact: {path}")


@main.command()
@_common
def hedge(**kw):
    """Run the conditional-mean hedge over simulated paths; emit the per-step
    trace and a terminal summary."""
    _guard(_cmd_hedge)(**{k: kw[k] for k in
                          ("config_path", "seed", "threads", "out_dir", "plot")})


def _cmd_hedge(cfg, out, threads, plot):
    market, grid, kernel, q2 = _build(cfg)
    payoff = cfg.make_payoff()
    idx = cfg.trading_grid_indices(grid)
    cost = CostSpec(cfg.cost_k)
    ps = simulate_paths(market, kernel, cfg.n_paths, cfg.seed, q2=q2)

    def one(p):
        return run_hedge(market, kernel, q2, payoff, ps.x_paths[p], idx, cost,
                         init_policy=cfg.init_policy, quad_order=cfg.quad_order)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            traces = list(pool.map(one, range(cfg.n_paths)))
    else:
        traces = [one(p) for p in range(cfg.n_paths)]

    rows = []
    for p, tr in enumerate(traces):
        for s in tr.steps:
            rows.append((p, s.i, s.t, s.s, s.pi, s.dpi, s.v_k, s.v_pi,
                         s.gains.dS_hat, s.gains.dV_pi_hat, s.residual,
                         s.cost_paid))
    trace_path = report.write_csv(
        os.path.join(out, f"{cfg.digest()}_hedge_trace.csv"),
        ["path_id", "i", "t_i", "S", "pi", "dpi", "V_k", "V_pi", "dS_hat",
         "dV_pi_hat", "residual", "cost_paid"], rows)

    done = [tr for tr in traces if tr.aborted is None]
    errs = np.array([tr.tracking_error for tr in done]) if done else np.array([0.0])
    costs = np.array([tr.total_cost for tr in done]) if done else np.array([0.0])
    qs = np.quantile(errs, [0.05, 0.25, 0.5, 0.75, 0.95]) if done else np.zeros(5)
    summary = [
        ("n_paths", cfg.n_paths), ("n_aborted", len(traces) - len(done)),
        ("tracking_error_mean", errs.mean()),
        ("tracking_error_sd", errs.std(ddof=1) if len(errs) > 1 else 0.0),
        ("tracking_error_q05", qs[0]), ("tracking_error_q25", qs[1]),
        ("tracking_error_q50", qs[2]), ("tracking_error_q75", qs[3]),
        ("tracking_error_q95", qs[4]),
        ("total_cost_mean", costs.mean()),
        ("initial_wealth_mean", np.mean([tr.initial_wealth for tr in traces])),
    ]
    summary_path = report.write_csv(
        os.path.join(out, f"{cfg.digest()}_hedge_summary.csv"),
        ["stat", "value"], summary)
    _emit_config(cfg, out, "hedge")
    if plot:
        report.render_hedge_figure(traces, grid,
                                   os.path.join(out, f"{cfg.digest()}_hedge_trace.png"))
    for stat, value in summary:
        click.echo(f"{stat}: {report.fmt(value)}")
    click.echo(f"artifacts: {trace_path}, {summary_path}")
    if done == []:
        click.echo("all paths aborted", err=True)
        sys.exit(EXIT_ENGINE)


if __name__ == "__main__":
    main()
