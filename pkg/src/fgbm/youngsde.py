"""Pathwise equations driven by fractional G-Brownian paths (H > 1/2).

For ``H > 1/2`` the pathwise integral agrees with the Riemann-Stieltjes
integral, so the solver is the explicit left-point scheme

    X_{k+1} = X_k + b(t_k, X_k) dt_k + sigma(t_k, X_k) dB^H_k.

The module also carries the Itô-formula residual and the arbitrage
experiment for the additive market ``S = 1 + B^H``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fraccalc import FracParams
from .gfbm import GfbmPath, loglog_slope, simulate_gfbm
from .grid import TimeGrid
from .priors import ConstantMix, ScenarioPolicy, UncertaintySet
from .volterra import HurstIndex, Regime, kernel_weights

__all__ = [
    "SdeSpec",
    "SdePath",
    "SolverError",
    "solve_sde",
    "ito_residual",
    "residual_refinement",
    "unit_volatility_policy",
    "PolicyWealth",
    "WealthReport",
    "arbitrage_experiment",
]

VField = Callable[[float, np.ndarray], np.ndarray]


class SolverError(ArithmeticError):
    """The explicit scheme produced a non-finite state."""


@dataclass
class SdeSpec:
    """Coefficients and declared regularity of ``dX = b dt + sigma dB^H``.

    ``drift(t, x)`` maps states of shape (M, d) to (M, d); ``diffusion(t, x)``
    returns (M, d, m).  Both may return anything broadcastable to those
    shapes.  ``beta`` and ``delta`` are the caller's Hölder exponents (time
    regularity of ``sigma`` and of its gradient) and ``lipschitz`` the
    Lipschitz constant; they are not verified.
    """

    drift: VField
    diffusion: VField
    x0: np.ndarray
    beta: float = 1.0
    delta: float = 1.0
    lipschitz: float = 1.0
    noise_dim: int | None = None

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if self.x0.ndim != 1:
            raise ValueError("x0 must be a vector")
        if min(self.beta, self.delta, self.lipschitz) <= 0:
            raise ValueError("declared regularity constants must be positive")

    @property
    def dim(self) -> int:
        return self.x0.size

    @property
    def alpha_max(self) -> float:
        """``min(1/2, beta, delta/(1+delta))``."""
        return min(0.5, self.beta, self.delta / (1.0 + self.delta))

    def check_order(self, h) -> FracParams:
        """The default order for ``h``, checked against ``alpha_max``."""
        params = FracParams.default(h)
        if not params.alpha < self.alpha_max:
            raise ValueError(
                f"alpha={params.alpha:g} not below alpha_0={self.alpha_max:g} for the declared regularity"
            )
        return params

    @classmethod
    def geometric(cls, sigma: float, x0: float = 1.0, mu: float = 0.0) -> "SdeSpec":
        """``dX = mu X dt + sigma X dB`` in one dimension."""
        return cls(lambda t, x: mu * x, lambda t, x: sigma * x[:, :, None], [x0])

    @classmethod
    def constant(cls, b, sigma, x0) -> "SdeSpec":
        """Constant coefficients ``b`` (d,) and ``sigma`` (d, m)."""
        b = np.atleast_1d(np.asarray(b, dtype=float))
        sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        return cls(lambda t, x: b, lambda t, x: sigma, x0, noise_dim=sigma.shape[1])


@dataclass(frozen=True, eq=False)
class SdePath:
    grid: TimeGrid
    values: np.ndarray = field(repr=False)  # (M, d, N+1)
    alpha: float

    @property
    def terminal(self) -> np.ndarray:
        return self.values[..., -1]


def solve_sde(spec: SdeSpec, driver: GfbmPath) -> SdePath:
    """Explicit left-point solution for every replicate of ``driver``."""
    hurst = driver.hurst
    if hurst.regime is not Regime.HIGH:
        raise ValueError(f"pathwise solver needs H > 1/2, got H={hurst.h}")
    params = spec.check_order(hurst)
    if spec.noise_dim is not None and spec.noise_dim != driver.dim:
        raise ValueError(f"diffusion expects {spec.noise_dim} noise components, driver has {driver.dim}")
    g = driver.grid
    M, d = driver.n_paths, spec.dim
    dB = driver.increments
    out = np.empty((M, d, g.n + 1))
    x = np.broadcast_to(spec.x0, (M, d)).copy()
    out[..., 0] = x
    for k in range(g.n):
        t = g.times[k]
        b = np.broadcast_to(spec.drift(t, x), (M, d))
        s = np.broadcast_to(spec.diffusion(t, x), (M, d, driver.dim))
        x = x + b * g.steps[k] + np.einsum("mij,mj->mi", s, dB[:, :, k])
        if not np.all(np.isfinite(x)):
            bad = int(np.flatnonzero(~np.isfinite(x).all(axis=1))[0])
            raise SolverError(f"non-finite state at step {k + 1} (t={g.times[k + 1]:g}), replicate {bad}")
        out[..., k + 1] = x
    return SdePath(g, out, params.alpha)


def ito_residual(f, df, driver: GfbmPath, i: int = 0, dt_f=None) -> np.ndarray:
    """``sup_k |f(B_{t_k}) - f(0) - sum_{j<k} f'(B_{t_j}) dB_j|`` per path.

    With ``dt_f`` given, ``f``, ``df`` and ``dt_f`` take ``(t, x)`` and the
    time-derivative Riemann sum ``sum_{j<k} dt_f(t_j, B_{t_j}) dt_j`` is
    subtracted as well.
    """
    if driver.hurst.regime is not Regime.HIGH:
        raise ValueError(f"Itô formula check needs H > 1/2, got H={driver.h}")
    g = driver.grid
    x = driver.values[:, i, :]
    dx = np.diff(x, axis=-1)
    if dt_f is None:
        fx, dfx = f(x), df(x[:, :-1])
        terms = dfx * dx
    else:
        t = g.times
        fx = f(t, x)
        terms = df(t[:-1], x[:, :-1]) * dx + dt_f(t[:-1], x[:, :-1]) * g.steps
    fx = np.broadcast_to(fx, x.shape)
    sums = np.concatenate([np.zeros((x.shape[0], 1)), np.cumsum(terms, axis=-1)], axis=-1)
    return np.abs(fx - fx[:, :1] - sums).max(axis=-1)


def residual_refinement(path: GfbmPath, levels: Sequence[int], fn) -> tuple[np.ndarray, np.ndarray, float]:
    """Apply ``fn(coarse_path) -> per-path residuals`` on dyadic coarsenings.

    Returns ``(meshes, residuals (L, M), log-log slope of the mean)``.
    """
    meshes, res = [], []
    for n in levels:
        coarse = path.coarsen(path.grid.n // n)
        meshes.append(coarse.grid.mesh)
        res.append(fn(coarse))
    meshes, res = np.array(meshes), np.array(res)
    return meshes, res, loglog_slope(meshes, res.mean(axis=1))


# ------------------------------------------------------------- arbitrage


def unit_volatility_policy(theta: UncertaintySet) -> ConstantMix:
    """Constant mix of a one-dimensional set with variance exactly 1."""
    if theta.dim != 1:
        raise ValueError("unit-volatility policy is defined for d = 1")
    v = theta.vertices[:, 0, 0]
    lo, hi = int(np.argmin(v)), int(np.argmax(v))
    if not v[lo] <= 1.0 <= v[hi]:
        raise ValueError(f"variance 1 is not in [{v[lo]:g}, {v[hi]:g}]")
    w = np.zeros(v.size)
    if v[hi] == v[lo]:
        w[lo] = 1.0
    else:
        w[lo] = (v[hi] - 1.0) / (v[hi] - v[lo])
        w[hi] = 1.0 - w[lo]
    return ConstantMix(tuple(w), label="unit volatility")


@dataclass
class PolicyWealth:
    """Wealth statistics of the strategy under one scenario policy."""

    policy_id: str
    n_paths: int
    initial_wealth: float
    terminal_mean: float
    terminal_stderr: float
    terminal_quantiles: dict
    min_wealth: float
    fraction_positive: float
    algebra_error: float
    self_financing_residual: float


@dataclass
class WealthReport:
    """Arbitrage experiment summary over all policies.

    ``initial_wealth`` is the largest ``|V_0|`` seen, ``min_wealth`` the
    smallest ``V_t`` over all paths, times and policies.
    """

    h: float
    eps: float
    initial_wealth: float
    min_wealth: float
    per_policy: list
    residual_meshes: list
    residual_means: list
    residual_slope: float

    def policy(self, policy_id: str) -> PolicyWealth:
        for p in self.per_policy:
            if p.policy_id == policy_id:
                return p
        raise KeyError(policy_id)


def _wealth(b: np.ndarray):
    """Holdings and wealth of ``xi = (-B^2 - 2B, 2B)`` in the market ``(1, 1 + B)``."""
    xi0 = -(b**2) - 2.0 * b
    xi1 = 2.0 * b
    return xi1, xi0 + xi1 * (1.0 + b)


def _sf_residual(path: GfbmPath) -> np.ndarray:
    b = path.values[:, 0, :]
    xi1, v = _wealth(b)
    gains = np.sum(xi1[:, :-1] * np.diff(b, axis=-1), axis=-1)
    return np.abs(v[:, -1] - gains)


def arbitrage_experiment(
    theta: UncertaintySet,
    policies: Sequence[ScenarioPolicy],
    grid: TimeGrid,
    h,
    M: int,
    seed: int,
    eps: float = 1e-4,
    levels: Sequence[int] | None = None,
) -> WealthReport:
    """Run the strategy on ``M`` paths per policy.

    ``levels`` are dyadic cell counts for the self-financing residual
    refinement (default: every power of two from 2^5 up to ``grid.n``).
    """
    hurst = HurstIndex.of(h)
    if theta.dim != 1:
        raise ValueError("the market example is one-dimensional")
    if hurst.regime is not Regime.HIGH:
        raise ValueError(f"arbitrage example needs H > 1/2, got H={hurst.h}")
    if levels is None:
        levels = [2**k for k in range(5, int(np.log2(grid.n)) + 1) if grid.n % 2**k == 0]
    table = kernel_weights(hurst, grid)
    per, residual_sets = [], []
    for policy in policies:
        path = simulate_gfbm(theta, policy, table, seed, M)
        b = path.values[:, 0, :]
        _, v = _wealth(b)
        vt = v[:, -1]
        _, res, _ = residual_refinement(path, levels, _sf_residual)
        residual_sets.append(res)
        per.append(
            PolicyWealth(
                policy_id=policy.policy_id,
                n_paths=M,
                initial_wealth=float(np.abs(v[:, 0]).max()),
                terminal_mean=float(vt.mean()),
                terminal_stderr=float(vt.std(ddof=1) / np.sqrt(M)),
                terminal_quantiles={q: float(np.quantile(vt, q)) for q in (0.01, 0.5, 0.99)},
                min_wealth=float(v.min()),
                fraction_positive=float(np.mean(vt > eps)),
                algebra_error=float(np.abs(v - b**2).max()),
                self_financing_residual=float(res[-1].max()),
            )
        )
    meshes = [grid.horizon / n for n in levels]
    means = np.concatenate(residual_sets, axis=1).mean(axis=1)
    return WealthReport(
        h=hurst.h,
        eps=eps,
        initial_wealth=max(p.initial_wealth for p in per),
        min_wealth=min(p.min_wealth for p in per),
        per_policy=per,
        residual_meshes=meshes,
        residual_means=means.tolist(),
        residual_slope=loglog_slope(meshes, means),
    )
