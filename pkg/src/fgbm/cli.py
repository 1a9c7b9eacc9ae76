"""Command-line runner: ``fgbm [--config F] [--seed S] [--out D] [--jobs J] SUBCOMMAND``.

Every subcommand writes ``<out>/<subcommand>/report.json``, its CSV tables
and a ``manifest.json`` naming each CSV and its columns.  Exit status is 0
when every check passes, 1 when a check fails, 2 on an invalid config and
3 on a numerical error.
"""

from __future__ import annotations

import argparse
import math
import re
import sys
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg, special, stats

from . import __version__
from .acceptance import CRITERIA, run_all
from .config import ConfigError, ExperimentConfig, load_config
from .fraccalc import FracParams, SampledFunction, g_tilde, gls_integral, norm_alpha_1, rl_integral_left, rl_integral_left_all, weyl_left
from .gfbm import (
    autocovariance,
    autocovariance_target,
    difference_quotient,
    empirical_second_moment,
    holder_exponent,
    loglog_slope,
    p_variation_refinement,
    simulate_policies,
)
from .gheat import GHeatSpec, bachelier_call, pde_vs_mc, solve_g_heat
from .grid import TimeGrid
from .priors import AntitheticPair, ConstantMix, ConstantVertex, cross_bounds, sigma_bounds
from .report import CheckResult, mc_check, write_csv, write_json
from .volterra import HurstIndex, Regime, kernel_inner, kernel_weights
from .youngsde import SdeSpec, arbitrage_experiment, ito_residual, residual_refinement, solve_sde, unit_volatility_policy

__all__ = ["main", "run", "SUBCOMMANDS", "Outcome", "REPORT_SCHEMA", "validate_report"]

# arbitrage: terminal wealth counts as positive above this level
WEALTH_EPS = 1e-4
POSITIVE_FRACTION = 0.99


@dataclass
class Outcome:
    checks: list
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _opt(cfg: ExperimentConfig, section: str, key: str, cast, default, check=None, what="valid"):
    raw = cfg.extras.get(section, {}).get(key)
    if raw is None:
        return default
    try:
        val = cast(raw)
    except ValueError:
        val = None
    if val is None or (check is not None and not check(val)):
        raise ConfigError([(f"[{section}] {key}", f"{raw!r} is not {what}")])
    return val


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_")


def _constant_cov(cfg, policy):
    """Covariance per unit time of a constant policy, else ``None``."""
    if isinstance(policy, AntitheticPair):
        policy = policy.base
    if isinstance(policy, ConstantVertex):
        return cfg.theta.vertices[policy.index]
    if isinstance(policy, ConstantMix):
        return cfg.theta.mix(policy.weights)
    return None


def _grid(cfg, n=None, horizon=None) -> TimeGrid:
    return TimeGrid.uniform(n or cfg.n, cfg.horizon if horizon is None else horizon)


def _need_high(cfg, what):
    if HurstIndex.of(cfg.h).regime is not Regime.HIGH:
        raise ConfigError([("[model] h", f"{what} needs H > 1/2, got {cfg.h:g}")])


def _dyadic_levels(n: int, low: int, where: str):
    """Powers of two from ``low`` to ``n``; at least two levels for a slope."""
    if n & (n - 1) or n < 2 * low:
        raise ConfigError([(where, f"must be a power of two >= {2 * low}, got {n}")])
    return [2**k for k in range(int(math.log2(low)), int(math.log2(n)) + 1)]


def _sized(cfg, section, n_default, m_default):
    """Grid cells and path count for a subcommand: ``[section] n`` / ``paths`` or the defaults."""
    n = _opt(cfg, section, "n", int, n_default, lambda v: v >= 1, "a positive integer")
    m = _opt(cfg, section, "paths", int, m_default, lambda v: v >= 2, "an integer >= 2")
    return n, m


def _band(name, est, se, low, high, n_se, rel, detail=None):
    tol = n_se * se + rel * max(abs(low), abs(high))
    ok = low - tol <= est <= high + tol
    d = {"low": low, "high": high}
    d.update(detail or {})
    return CheckResult(name, bool(ok), None, float(est), float(se), float(tol), d)


# ------------------------------------------------------------ subcommands


def cmd_simulate(cfg: ExperimentConfig) -> Outcome:
    """Simulate every policy; emit path CSVs, moment tables and normality checks.

    Constant policies get a terminal second-moment check and a Jarque-Bera
    test on increments whitened by their exact Gaussian covariance.
    """
    grid = _grid(cfg)
    table = kernel_weights(cfg.h, grid)
    sets = simulate_policies(cfg.theta, cfg.policies, table, cfg.seed, cfg.paths)
    keep = _opt(cfg, "simulate", "csv_paths", int, 20, lambda v: v >= 1, "a positive integer")
    T = grid.horizon
    c = table.covariance()
    inc_cov = c[1:, 1:] - c[1:, :-1] - c[:-1, 1:] + c[:-1, :-1]
    chol = None
    checks, tables, moments = [], {}, []
    idx = sorted({grid.n // 4, grid.n // 2, 3 * grid.n // 4, grid.n} - {0})
    for pol, paths in zip(cfg.policies, sets):
        r = min(keep, paths.n_paths)
        header = ["replicate", "t"] + [f"B{i + 1}" for i in range(cfg.dim)]
        rows = [[k, grid.times[j], *paths.values[k, :, j]] for k in range(r) for j in range(grid.n + 1)]
        tables[f"paths_{_slug(pol.policy_id)}"] = (header, rows)
        cov = _constant_cov(cfg, pol)
        for i in range(cfg.dim):
            for j in idx:
                x = paths.values[:, i, j]
                target = float(cov[i, i] * c[j, j]) if cov is not None else math.nan
                moments.append((pol.policy_id, i + 1, grid.times[j], x.mean(), (x**2).mean(), target))
            if cov is None or cov[i, i] <= 0:
                continue
            v = float(cov[i, i])
            est = empirical_second_moment(paths, i, i, T, T)
            checks.append(
                mc_check(f"{pol.policy_id} E[B_T({i + 1})^2]", v * T ** (2 * cfg.h), est.mean, est.stderr,
                         cfg.tol("n_se"), cfg.tol("rel"))
            )
            if chol is None:
                chol = linalg.cholesky(inc_cov, lower=True)
            z = linalg.solve_triangular(chol, paths.increments[:, i, :].T, lower=True) / math.sqrt(v)
            jb = stats.jarque_bera(z.ravel())
            checks.append(
                CheckResult(f"{pol.policy_id} component {i + 1} whitened increments normal (Jarque-Bera)",
                            bool(jb.pvalue > cfg.tol("p_min")), cfg.tol("p_min"), float(jb.pvalue), None, None,
                            {"statistic": float(jb.statistic), "samples": int(z.size),
                             "variance": float(z.var())})
            )
    tables["moments"] = (["policy", "component", "t", "mean", "second_moment", "target"], moments)
    return Outcome(checks, tables, {"grid_cells": grid.n, "paths": cfg.paths})


def cmd_covariance(cfg: ExperimentConfig) -> Outcome:
    """``E[B_s(i) B_t(j)]`` per policy against the constant-policy law or the Θ bounds."""
    grid = _grid(cfg)
    if grid.n % 4:
        raise ConfigError([("[model] n", "must be divisible by 4 for the (s, t) pairs")])
    sets = simulate_policies(cfg.theta, cfg.policies, kernel_weights(cfg.h, grid), cfg.seed, cfg.paths)
    ts = grid.times
    pairs = [(ts[grid.n // 2], ts[-1]), (ts[grid.n // 4], ts[3 * grid.n // 4]), (ts[-1], ts[-1])]
    n_se, rel = cfg.tol("n_se"), cfg.tol("rel")
    checks, rows = [], []
    for i in range(cfg.dim):
        for j in range(i, cfg.dim):
            lo, hi = sigma_bounds(cfg.theta, i) if i == j else tuple(0.25 * b for b in cross_bounds(cfg.theta, i, j))
            for s, t in pairs:
                k = kernel_inner(cfg.h, s, t)
                for pol, paths in zip(cfg.policies, sets):
                    est = empirical_second_moment(paths, i, j, s, t)
                    cov = _constant_cov(cfg, pol)
                    name = f"{pol.policy_id} E[B_s({i + 1}) B_t({j + 1})] (s,t)=({s:g},{t:g})"
                    if cov is not None:
                        checks.append(mc_check(name, cov[i, j] * k, est.mean, est.stderr, n_se, rel))
                    else:
                        checks.append(_band(name + " within bounds", est.mean, est.stderr, lo * k, hi * k, n_se, rel))
                    rows.append((pol.policy_id, i + 1, j + 1, s, t, est.mean, est.stderr, lo * k, hi * k))
    header = ["policy", "i", "j", "s", "t", "estimate", "stderr", "lower_bound", "upper_bound"]
    return Outcome(checks, {"second_moments": (header, rows)}, {"pairs": [list(p) for p in pairs]})


def _memory_sets(cfg):
    horizon = _opt(cfg, "increments", "horizon", int, 64, lambda v: v >= 3, "an integer >= 3")
    per = _opt(cfg, "increments", "cells_per_unit", int, 8, lambda v: v >= 1, "a positive integer")
    grid = TimeGrid.uniform(horizon * per, float(horizon))
    return horizon, simulate_policies(cfg.theta, cfg.policies, kernel_weights(cfg.h, grid), cfg.seed, cfg.paths)


def cmd_increments(cfg: ExperimentConfig) -> Outcome:
    """Unit-lag increment autocovariance per policy; constant policies are checked."""
    horizon, sets = _memory_sets(cfg)
    lags = _opt(cfg, "increments", "lags", int, 5, lambda v: 1 <= v < horizon - 1, "a lag below horizon - 1")
    checks, rows, bounds = [], [], []
    for i in range(cfg.dim):
        for n in range(1, lags + 1):
            res = autocovariance(sets, i, n)
            bounds.append((i + 1, n, res.rho_upper, res.rho_upper_stderr, res.rho_lower, res.rho_lower_stderr))
            for pol, est in zip(cfg.policies, res.per_policy):
                cov = _constant_cov(cfg, pol)
                target = math.nan if cov is None else autocovariance_target(cfg.h, n, float(cov[i, i]))
                rows.append((pol.policy_id, i + 1, n, est.mean, est.stderr, target))
                if cov is not None:
                    checks.append(
                        mc_check(f"{pol.policy_id} rho({n}) component {i + 1}", target, est.mean, est.stderr,
                                 cfg.tol("n_se"), cfg.tol("autocov_rel"))
                    )
    tables = {
        "autocovariance": (["policy", "component", "lag", "estimate", "stderr", "target"], rows),
        "autocovariance_bounds": (["component", "lag", "upper", "upper_stderr", "lower", "lower_stderr"], bounds),
    }
    return Outcome(checks, tables, {"horizon": horizon})


def cmd_memory(cfg: ExperimentConfig) -> Outcome:
    """Power-law decay of the upper autocovariance, exponent ``2H - 2``."""
    if cfg.h == 0.5:
        raise ConfigError([("[model] h", "no long-memory exponent at H = 1/2")])
    horizon, sets = _memory_sets(cfg)
    top = _opt(cfg, "memory", "max_lag", int, 20, lambda v: 3 <= v < horizon - 1, "a lag in [3, horizon - 1)")
    lags = list(range(2, top + 1))
    checks, rows = [], []
    for i in range(cfg.dim):
        res = [autocovariance(sets, i, n) for n in lags]
        # upper for positive correlation (H > 1/2), magnitude of the lower otherwise
        rho = [r.rho_upper if cfg.h > 0.5 else -r.rho_lower for r in res]
        target = 2 * cfg.h - 2
        if min(rho) <= 0:
            checks.append(CheckResult(f"decay exponent component {i + 1}", False, target, None, None, None,
                                      {"reason": "non-positive autocovariance estimate"}))
        else:
            slope = loglog_slope(lags, rho)
            tol = cfg.tol("memory_slope")
            checks.append(CheckResult(f"decay exponent component {i + 1}", abs(slope - target) <= tol, target, slope,
                                      None, tol))
        rows.extend((i + 1, n, r) for n, r in zip(lags, rho))
    return Outcome(checks, {"long_memory": (["component", "lag", "rho"], rows)}, {"horizon": horizon})


def cmd_regularity(cfg: ExperimentConfig) -> Outcome:
    """Hölder exponent, quadratic-variation rate and difference-quotient growth per policy."""
    n, m = _sized(cfg, "regularity", 4096, min(cfg.paths, 200))
    if n & (n - 1) or n < 256:
        raise ConfigError([("[regularity] n", f"must be a power of two >= 256, got {n}")])
    grid = _grid(cfg, n)
    sets = simulate_policies(cfg.theta, cfg.policies, kernel_weights(cfg.h, grid), cfg.seed, m)
    levels = [2**k for k in range(8, int(math.log2(n)) + 1)]
    checks, pv_rows, dq_rows, hold_rows = [], [], [], []
    holder_summary = {}
    for pol, paths in zip(cfg.policies, sets):
        pid = pol.policy_id
        est = holder_exponent(paths)
        inside = float(np.mean((est >= cfg.h - 0.15) & (est <= cfg.h + 0.05)))
        # the window is calibrated for constant volatility; switching policies
        # bias the max-increment regression low, so they are reported only
        if _constant_cov(cfg, pol) is not None:
            checks.append(CheckResult(f"{pid} Hölder estimate in [H-0.15, H+0.05]", inside >= 0.9, 0.9, inside, None,
                                      None, {"mean_estimate": float(est.mean())}))
        holder_summary[pid] = {"mean": float(est.mean()), "fraction_in_window": inside}
        hold_rows.extend((pid, r, e) for r, e in enumerate(est))
        mesh, sums = p_variation_refinement(paths, 2.0, levels)
        slope = loglog_slope(mesh, sums.mean(axis=1))
        checks.append(CheckResult(f"{pid} quadratic-variation slope", abs(slope - (2 * cfg.h - 1)) <= cfg.tol("slope"),
                                  2 * cfg.h - 1, slope, None, cfg.tol("slope")))
        pv_rows.extend((pid, h, s) for h, s in zip(mesh, sums.mean(axis=1)))
        dq = difference_quotient(paths, levels)
        growing = float(np.mean(np.all(np.diff(dq, axis=0) > 0, axis=0)))
        checks.append(CheckResult(f"{pid} difference quotient grows at every refinement", growing == 1.0, 1.0, growing,
                                  None, None))
        dq_rows.extend((pid, c, q) for c, q in zip(levels, dq.mean(axis=1)))
    tables = {
        "holder": (["policy", "replicate", "exponent"], hold_rows),
        "p_variation": (["policy", "mesh", "mean_sum"], pv_rows),
        "difference_quotient": (["policy", "cells", "mean_max_quotient"], dq_rows),
    }
    return Outcome(checks, tables, {"grid_cells": n, "paths": m, "holder": holder_summary})


def cmd_fraccalc_selftest(cfg: ExperimentConfig) -> Outcome:
    """Closed-form operator checks, plus pathwise checks on simulated paths when ``H > 1/2``."""
    checks = []
    lin = SampledFunction.from_callable(lambda t: t, TimeGrid.uniform(1024))
    d = weyl_left(lin, 0.3).values[-1]
    checks.append(CheckResult("D^0.3 x at 1", abs(d - 1 / special.gamma(1.7)) <= 1e-4, 1 / special.gamma(1.7), d, None,
                              1e-4))
    one = SampledFunction.from_callable(lambda t: 1.0 + 0 * t, TimeGrid.uniform(64))
    for a in (0.3, 0.7):
        v = rl_integral_left(one, a, 1.0)
        checks.append(CheckResult(f"I^{a} 1 at 1", abs(v - 1 / special.gamma(1 + a)) <= 1e-10, 1 / special.gamma(1 + a),
                                  v, None, 1e-10))
    cos = SampledFunction.from_callable(np.cos, TimeGrid.uniform(4096))
    x = cos.grid.times
    rows = []
    for a in (0.3, 0.45, 0.7):
        err = np.abs(weyl_left(rl_integral_left_all(cos, a), a).values - np.cos(x))
        checks.append(CheckResult(f"D^a I^a cos = cos, alpha={a}", err.max() <= 1e-3, 0.0, float(err.max()), None, 1e-3))
        rows.extend((a, xi, e) for xi, e in zip(x[::16], err[::16]))
    g = TimeGrid.uniform(4096)
    v = gls_integral(SampledFunction.from_callable(lambda t: t, g), SampledFunction.from_callable(lambda t: t**2, g), 0.4)
    checks.append(CheckResult("int_0^1 t d(t^2)", abs(v - 2 / 3) <= 1e-3, 2 / 3, v, None, 1e-3))
    tables = {"inversion_error": (["alpha", "x", "abs_error"], rows)}
    if HurstIndex.of(cfg.h).regime is Regime.HIGH:
        m = _opt(cfg, "fraccalc", "paths", int, 10, lambda v: v >= 1, "a positive integer")
        alpha = FracParams.default(cfg.h).alpha
        paths = simulate_policies(cfg.theta, cfg.policies[:1], kernel_weights(cfg.h, _grid(cfg)), cfg.seed, m)[0]
        prow = []
        for r in range(m):
            b = SampledFunction.from_path(paths, r)
            val = gls_integral(b, b, alpha)
            sq = 0.5 * b.values[-1] ** 2
            ratio = abs(val) / (g_tilde(b, alpha) * norm_alpha_1(b, alpha))
            prow.append((r, val, sq, ratio))
        worst = max(abs(p[1] - p[2]) for p in prow)
        checks.append(CheckResult("int B dB = B_T^2/2 (max over paths)", worst <= 1e-2, 0.0, worst, None, 1e-2))
        top = max(p[3] for p in prow)
        slack = cfg.tol("bound_slack")
        checks.append(CheckResult("|int B dB| / (G~ ||B||_(alpha,1)) (max over paths)", top <= 1 + slack, 1.0, top, None,
                                  slack))
        tables["pathwise"] = (["replicate", "integral", "half_square", "bound_ratio"], prow)
    return Outcome(checks, tables)


def cmd_ito(cfg: ExperimentConfig) -> Outcome:
    """Itô-formula residual for ``x^2`` on dyadic coarsenings of each policy's paths."""
    _need_high(cfg, "the pathwise Itô formula")
    n, m = _sized(cfg, "ito", 8192, min(cfg.paths, 200))
    levels = _dyadic_levels(n, 256, "[ito] n")
    sets = simulate_policies(cfg.theta, cfg.policies, kernel_weights(cfg.h, _grid(cfg, n)), cfg.seed, m)
    checks, rows = [], []
    for i in range(cfg.dim):
        fn = lambda p, i=i: ito_residual(lambda x: x**2, lambda x: 2 * x, p, i=i)
        for pol, paths in zip(cfg.policies, sets):
            mesh, res, slope = residual_refinement(paths, levels, fn)
            scale = float(np.mean(np.max(paths.values[:, i, :] ** 2, axis=-1)))
            if scale == 0:
                continue
            name = f"{pol.policy_id} component {i + 1}"
            checks.append(CheckResult(f"{name} residual slope", abs(slope - (2 * cfg.h - 1)) <= cfg.tol("slope"),
                                      2 * cfg.h - 1, slope, None, cfg.tol("slope")))
            per = float(res[-1].mean()) / scale
            checks.append(CheckResult(f"{name} residual per unit path scale", per < cfg.tol("residual"),
                                      cfg.tol("residual"), per, None, None, {"mean_sup_B2": scale}))
            rows.extend((pol.policy_id, i + 1, h, r) for h, r in zip(mesh, res.mean(axis=1)))
    return Outcome(checks, {"ito_residual": (["policy", "component", "mesh", "mean_residual"], rows)},
                   {"grid_cells": n, "paths": m})


def cmd_sde(cfg: ExperimentConfig) -> Outcome:
    """Geometric equation ``dX = sigma X dB`` against ``exp(sigma B_T)`` on each policy's paths."""
    _need_high(cfg, "the pathwise SDE solver")
    sigma = _opt(cfg, "sde", "sigma", float, 1.0, math.isfinite, "a finite number")
    n, m = _sized(cfg, "sde", 4096, min(cfg.paths, 200))
    levels = _dyadic_levels(n, 64, "[sde] n")
    sets = simulate_policies(cfg.theta, cfg.policies, kernel_weights(cfg.h, _grid(cfg, n)), cfg.seed, m)
    spec = SdeSpec.geometric(sigma)

    def rel_err(p):
        ref = np.exp(sigma * p.values[:, 0, -1])
        return np.abs(solve_sde(spec, p).terminal[:, 0] - ref) / ref

    checks, rows = [], []
    low_slope = 2 * cfg.h - 1 - cfg.tol("slope")
    for pol, paths in zip(cfg.policies, sets):
        mesh, errs, slope = residual_refinement(paths, levels, rel_err)
        worst = float(errs[-1].max())
        checks.append(CheckResult(f"{pol.policy_id} max relative error at N={n}", worst < cfg.tol("sde_rtol"),
                                  cfg.tol("sde_rtol"), worst, None, None))
        checks.append(CheckResult(f"{pol.policy_id} convergence slope", slope >= low_slope, low_slope, slope, None, None))
        rows.extend((pol.policy_id, h, e) for h, e in zip(mesh, errs.mean(axis=1)))
    return Outcome(checks, {"sde_error": (["policy", "mesh", "mean_rel_error"], rows)},
                   {"sigma": sigma, "grid_cells": n, "paths": m})


def _payoff(token: str):
    """Payoff and its closed-form G-heat value ``(phi, exact(x, var_low, var_high))``."""
    kind, _, arg = token.partition(":")
    if kind == "x^2" and not arg:
        return (lambda x: x**2), (lambda x, lo, hi: x * x + hi)
    if kind == "-x^2" and not arg:
        return (lambda x: -(x**2)), (lambda x, lo, hi: -x * x - lo)
    if kind in ("call", "put") and arg:
        k = float(arg)
        if kind == "call":
            return (lambda x: np.maximum(x - k, 0.0)), (lambda x, lo, hi: bachelier_call(x, k, hi))
        return (lambda x: np.maximum(k - x, 0.0)), (lambda x, lo, hi: bachelier_call(x, k, hi) - (x - k))
    raise ValueError(f"unknown payoff {token!r} (x^2, -x^2, call:K, put:K)")


def cmd_gheat(cfg: ExperimentConfig) -> Outcome:
    """G-heat PDE at ``t = horizon`` against its closed form and the upper Monte Carlo mean."""
    token = cfg.extras.get("gheat", {}).get("payoff", "x^2")
    try:
        phi, exact = _payoff(token)
    except ValueError as exc:
        raise ConfigError([("[gheat] payoff", str(exc))]) from None
    x = _opt(cfg, "gheat", "x", float, 0.0, math.isfinite, "a finite number")
    dx = _opt(cfg, "gheat", "dx", float, 0.01, lambda v: v > 0, "a positive number")
    i = _opt(cfg, "gheat", "component", int, 0, lambda v: 0 <= v < cfg.dim, "a component index")
    lo, hi = sigma_bounds(cfg.theta, i)
    if lo <= 0:
        raise ConfigError([("[model] theta", f"component {i} needs sigma_low^2 > 0 for the G-heat scheme")])
    spec = GHeatSpec(lo, hi, phi, horizon=cfg.horizon, dx=dx, x_query=x)
    sol = solve_g_heat(spec)
    closed = exact(x, lo * cfg.horizon, hi * cfg.horizon)
    checks = [CheckResult(f"PDE {token} vs closed form", abs(sol.value() - closed) <= 1e-4, closed, sol.value(), None,
                          1e-4, {"boundary_delta": sol.boundary_delta})]
    rep = pde_vs_mc(spec, cfg.theta, cfg.policies, cfg.h, _grid(cfg), cfg.paths, cfg.seed, i=i,
                    pde_value=sol.value(), boundary_delta=sol.boundary_delta)
    checks.append(rep.check(f"PDE {token} vs upper Monte Carlo", cfg.tol("n_se"), cfg.tol("rel")))
    mc_rows = [(pid, m, se) for pid, (m, se) in rep.per_policy.items()]
    tables = {
        "solution": (["x", "u"], list(zip(sol.x, sol.u))),
        "monte_carlo": (["policy", "mean", "stderr"], mc_rows),
    }
    return Outcome(checks, tables, {"payoff": token, "pde": sol.value(), "closed_form": closed, "mc_upper": rep.mc_upper})


def cmd_arbitrage(cfg: ExperimentConfig) -> Outcome:
    """Wealth of the ``(-B^2 - 2B, 2B)`` strategy under every policy plus the unit-volatility mix."""
    if cfg.dim != 1:
        raise ConfigError([("[model] theta", "the arbitrage market is one-dimensional")])
    _need_high(cfg, "the arbitrage market")
    policies = list(cfg.policies)
    unit = None
    try:
        unit = unit_volatility_policy(cfg.theta)
    except ValueError:
        pass
    if unit is not None and unit.policy_id not in {p.policy_id for p in policies}:
        policies.append(unit)
    rep = arbitrage_experiment(cfg.theta, policies, _grid(cfg), cfg.h, cfg.paths, cfg.seed, eps=WEALTH_EPS)
    checks = [
        CheckResult("V_0 = 0", rep.initial_wealth == 0.0, 0.0, rep.initial_wealth, None, 0.0),
        CheckResult("min V >= -1e-12", rep.min_wealth >= -1e-12, -1e-12, rep.min_wealth, None, None),
        CheckResult("self-financing residual slope", abs(rep.residual_slope - (2 * cfg.h - 1)) <= cfg.tol("slope"),
                    2 * cfg.h - 1, rep.residual_slope, None, cfg.tol("slope")),
    ]
    if unit is not None:
        frac = rep.policy(unit.policy_id).fraction_positive
        checks.append(CheckResult(f"fraction V_T > {WEALTH_EPS:g} under unit volatility", frac >= POSITIVE_FRACTION,
                                  POSITIVE_FRACTION, frac, None, None))
    for p in rep.per_policy:
        checks.append(CheckResult(f"positive fraction > 0 under {p.policy_id}", p.fraction_positive > 0, 0.0,
                                  p.fraction_positive, None, None))
    wealth = [(p.policy_id, p.terminal_mean, p.terminal_stderr, p.terminal_quantiles[0.01], p.terminal_quantiles[0.5],
               p.terminal_quantiles[0.99], p.min_wealth, p.fraction_positive, p.self_financing_residual)
              for p in rep.per_policy]
    tables = {
        "wealth": (["policy", "terminal_mean", "terminal_stderr", "q01", "q50", "q99", "min_wealth",
                    "fraction_positive", "self_financing_residual"], wealth),
        "self_financing": (["mesh", "mean_residual"], list(zip(rep.residual_meshes, rep.residual_means))),
    }
    return Outcome(checks, tables, {"unit_policy": None if unit is None else unit.policy_id})


def cmd_acceptance(cfg: ExperimentConfig, progress=None) -> Outcome:
    """All acceptance criteria (or the ``[acceptance] criteria`` subset) from the master seed."""
    raw = cfg.extras.get("acceptance", {}).get("criteria")
    numbers = None
    if raw:
        try:
            numbers = sorted({int(k) for k in raw.replace(",", " ").split()})
        except ValueError:
            numbers = None
        if not numbers or any(k not in CRITERIA for k in numbers):
            raise ConfigError([("[acceptance] criteria", f"{raw!r} is not a list of criterion numbers 1..{len(CRITERIA)}")])
    results = run_all(cfg.seed, numbers, jobs=cfg.jobs, progress=progress)
    checks, tables = [], {}
    for res in results:
        for c in res.checks:
            c.detail = dict(c.detail, criterion=res.number)
            c.name = f"criterion {res.number:2d}: {c.name}"
            checks.append(c)
        for key, tab in res.tables.items():
            tables[f"c{res.number:02d}_{key}"] = tab
    summary = {"criteria": [{"number": r.number, "title": r.title, "passed": r.passed} for r in results]}
    return Outcome(checks, tables, summary)


SUBCOMMANDS = {
    "simulate": cmd_simulate,
    "covariance": cmd_covariance,
    "increments": cmd_increments,
    "memory": cmd_memory,
    "regularity": cmd_regularity,
    "fraccalc-selftest": cmd_fraccalc_selftest,
    "ito": cmd_ito,
    "sde": cmd_sde,
    "gheat": cmd_gheat,
    "arbitrage": cmd_arbitrage,
    "acceptance": cmd_acceptance,
}


# ---------------------------------------------------------------- runner

# report.json layout: top-level key -> type, and the keys of each check record
REPORT_SCHEMA = {
    "name": str,
    "subcommand": str,
    "passed": bool,
    "n_checks": int,
    "n_failed": int,
    "checks": list,
    "summary": dict,
    "config": dict,
    "version": str,
    "data_files": list,
    "wall_time": float,
}
CHECK_SCHEMA = {"name": str, "passed": bool, "target": (float, int, str, type(None)),
                "estimate": (float, int, str, type(None)), "stderr": (float, int, str, type(None)),
                "tolerance": (float, int, str, type(None)), "detail": dict}


def validate_report(doc: dict) -> list[str]:
    """Schema problems of a parsed report (empty when valid)."""
    problems = [f"missing {k}" for k in REPORT_SCHEMA if k not in doc]
    problems += [f"unexpected {k}" for k in doc if k not in REPORT_SCHEMA]
    for k, typ in REPORT_SCHEMA.items():
        if k in doc and not isinstance(doc[k], typ if typ is not float else (float, int)):
            problems.append(f"{k} has type {type(doc[k]).__name__}")
    for i, c in enumerate(doc.get("checks", [])):
        if set(c) != set(CHECK_SCHEMA):
            problems.append(f"check {i} keys {sorted(c)}")
            continue
        problems += [f"check {i} {k}" for k, typ in CHECK_SCHEMA.items() if not isinstance(c[k], typ)]
    if not problems:
        if doc["passed"] != all(c["passed"] for c in doc["checks"]):
            problems.append("passed is not the conjunction of check passes")
        if doc["n_failed"] != sum(not c["passed"] for c in doc["checks"]) or doc["n_checks"] != len(doc["checks"]):
            problems.append("check counts disagree with the records")
    return problems



def write_outputs(directory: Path, name: str, cfg: ExperimentConfig, outcome: Outcome, wall: float) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    manifest = []
    for key in sorted(outcome.tables):
        header, rows = outcome.tables[key]
        fname = f"{key}.csv"
        write_csv(directory / fname, header, rows)
        manifest.append({"file": fname, "columns": list(header), "rows": len(rows)})
    write_json(directory / "manifest.json", {"files": manifest})
    report = {
        "name": cfg.name,
        "subcommand": name,
        "passed": outcome.passed,
        "n_checks": len(outcome.checks),
        "n_failed": sum(not c.passed for c in outcome.checks),
        "checks": [c.to_dict() for c in outcome.checks],
        "summary": outcome.summary,
        "config": cfg.echo(),
        "version": __version__,
        "data_files": [m["file"] for m in manifest],
        "wall_time": round(wall, 3),
    }
    path = directory / "report.json"
    write_json(path, report)
    return path


def _context(exc: BaseException) -> str:
    frames = [f for f in traceback.extract_tb(exc.__traceback__) if "fgbm" in Path(f.filename).parts]
    if not frames:
        return "?"
    f = frames[-1]
    return f"{Path(f.filename).stem}.{f.name}"


def run(subcommand: str, cfg: ExperimentConfig, stream=None) -> int:
    stream = sys.stdout if stream is None else stream
    fn = SUBCOMMANDS[subcommand]
    start = time.perf_counter()
    if subcommand == "acceptance":
        outcome = fn(cfg, progress=lambda r: print(r.line(), file=stream, flush=True))
    else:
        outcome = fn(cfg)
        for c in outcome.checks:
            print(c.line(), file=stream)
    wall = time.perf_counter() - start
    path = write_outputs(Path(cfg.out) / subcommand, subcommand, cfg, outcome, wall)
    failed = sum(not c.passed for c in outcome.checks)
    status = "PASS" if outcome.passed else "FAIL"
    print(f"{status}: {len(outcome.checks) - failed}/{len(outcome.checks)} checks passed; report {path}", file=stream)
    return 0 if outcome.passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fgbm", description="Fractional G-Brownian motion experiments and verifiers.")
    p.add_argument("--config", help="INI config file (default: the shipped default config)")
    p.add_argument("--seed", type=int, help="master seed, overrides [experiment] seed")
    p.add_argument("--out", help="output directory, overrides [experiment] out")
    p.add_argument("--jobs", type=int, help="worker threads for independent checks")
    p.add_argument("--version", action="version", version=f"fgbm {__version__}")
    p.add_argument("subcommand", choices=sorted(SUBCOMMANDS))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    problems = []
    if args.seed is not None and not 0 <= args.seed < 2**64:
        problems.append(("--seed", f"{args.seed} is not an unsigned 64-bit integer"))
    if args.jobs is not None and args.jobs < 1:
        problems.append(("--jobs", f"{args.jobs} is not a positive integer"))
    try:
        if problems:
            raise ConfigError(problems)
        cfg = load_config(args.config, seed=args.seed, out=args.out, jobs=args.jobs)
        return run(args.subcommand, cfg)
    except ConfigError as exc:
        print(f"invalid configuration ({args.config or 'default'}):\n{exc.report()}", file=sys.stderr)
        return 2
    except Exception as exc:  # numerical failures: report with context
        inputs = ""
        if "cfg" in locals():
            inputs = f" h={cfg.h:g} n={cfg.n} paths={cfg.paths} theta={cfg.theta.vertices.tolist()} seed={cfg.seed}"
            section = cfg.extras.get(args.subcommand, {})
            if section:
                inputs += " [" + args.subcommand + "] " + " ".join(f"{k}={v}" for k, v in sorted(section.items()))
        print(f"error in {_context(exc)} ({args.subcommand}{inputs}): {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
