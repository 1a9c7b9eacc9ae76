"""Explicit monotone finite differences for the one-dimensional G-heat equation.

    u_t = G(u_xx),    G(a) = (sigma_high^2 a^+ - sigma_low^2 a^-) / 2,    u(0, .) = phi

The scheme ``u_i += dt G((u_{i+1} - 2u_i + u_{i-1}) / dx^2)`` is monotone
when ``dt <= dx^2 / sigma_high^2``, so it converges to the viscosity
solution.  The truncated domain ``[-L, L]`` keeps the boundary nodes at
``phi(+-L)``; this is exact where the payoff is locally linear beyond the
boundary (``u_xx = 0`` there), and the doubling-``L`` check guards the rest.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .gfbm import simulate_gfbm
from .grid import TimeGrid
from .priors import ScenarioPolicy, UncertaintySet, sigma_bounds
from .report import CheckResult, mc_check
from .volterra import HurstIndex, kernel_weights

__all__ = [
    "GHeatSpec",
    "GHeatSolution",
    "BoundaryError",
    "solve_g_heat",
    "g_heat_value",
    "bachelier_call",
    "heat_kernel_value",
    "PdeMcReport",
    "pde_vs_mc",
]

BOUNDARY_TOL = 1e-6
CFL_SAFETY = 0.9


class BoundaryError(RuntimeError):
    """The value at the query point moved when the domain was doubled."""


@dataclass
class GHeatSpec:
    """Problem data and discretization.

    ``dt=None`` picks the largest step below ``CFL_SAFETY * dx^2 /
    sigma_high_sq`` that divides the horizon; ``L=None`` picks
    ``6 sigma_high sqrt(t) + |x_query| + 1``.
    """

    sigma_low_sq: float
    sigma_high_sq: float
    payoff: Callable[[np.ndarray], np.ndarray]
    horizon: float = 1.0
    L: float | None = None
    dx: float = 0.01
    dt: float | None = None
    x_query: float = 0.0

    def __post_init__(self):
        if not 0 < self.sigma_low_sq <= self.sigma_high_sq:
            raise ValueError("need 0 < sigma_low^2 <= sigma_high^2")
        if self.horizon <= 0 or self.dx <= 0:
            raise ValueError("horizon and dx must be positive")
        reach = 6.0 * math.sqrt(self.sigma_high_sq * self.horizon) + abs(self.x_query)
        if self.L is None:
            self.L = reach + 1.0
        if self.L < reach:
            raise ValueError(f"L={self.L:g} below 6 sigma_high sqrt(t) + |x_query| = {reach:g}")
        limit = self.dx**2 / self.sigma_high_sq
        if self.dt is None:
            steps = math.ceil(self.horizon / (CFL_SAFETY * limit))
            self.dt = self.horizon / steps
        if self.dt > limit * (1 + 1e-12):
            raise ValueError(f"CFL violated: dt={self.dt:g} > dx^2/sigma_high^2 = {limit:g}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def g(self, a: np.ndarray) -> np.ndarray:
        return 0.5 * (self.sigma_high_sq * np.maximum(a, 0.0) - self.sigma_low_sq * np.maximum(-a, 0.0))


@dataclass
class GHeatSolution:
    """``u(t, x)`` on the spatial grid at ``t = spec.horizon``."""

    spec: GHeatSpec
    x: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    boundary_delta: float | None = None

    def value(self, x: float | None = None) -> float:
        """Linear interpolation of the solution at ``x`` (default ``x_query``)."""
        x = self.spec.x_query if x is None else x
        return float(np.interp(x, self.x, self.u))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "u"])
            for a, b in zip(self.x, self.u):
                writer.writerow([repr(float(a)), repr(float(b))])


def _march(spec: GHeatSpec, L: float, steps: int | None = None):
    n = int(round(L / spec.dx))
    x = spec.dx * np.arange(-n, n + 1)
    u = np.asarray(spec.payoff(x), dtype=float).copy()
    if u.shape != x.shape or not np.all(np.isfinite(u)):
        raise ValueError("payoff must return finite values of the grid shape")
    for _ in range(spec.n_steps if steps is None else steps):
        u[1:-1] += spec.dt * spec.g((u[2:] - 2.0 * u[1:-1] + u[:-2]) / spec.dx**2)
    return x, u


def solve_g_heat(spec: GHeatSpec, check_boundary: bool = True, steps: int | None = None) -> GHeatSolution:
    """March to ``spec.horizon`` (or ``steps`` time steps).

    With ``check_boundary`` the solve is repeated on ``[-2L, 2L]`` and
    :class:`BoundaryError` is raised if ``u(x_query)`` moves by
    ``BOUNDARY_TOL`` or more.
    """
    x, u = _march(spec, spec.L, steps)
    sol = GHeatSolution(spec, x, u)
    if check_boundary:
        x2, u2 = _march(spec, 2.0 * spec.L, steps)
        delta = abs(float(np.interp(spec.x_query, x2, u2)) - sol.value())
        sol.boundary_delta = delta
        if delta >= BOUNDARY_TOL:
            raise BoundaryError(f"u(x={spec.x_query:g}) changed by {delta:.3g} when L doubled to {2 * spec.L:g}")
    return sol


def g_heat_value(spec: GHeatSpec, x: float | None = None) -> float:
    return solve_g_heat(spec).value(x)


# ----------------------------------------------------------- closed forms


def bachelier_call(x, strike, var):
    """``E[(x + sqrt(var) Z - strike)^+]`` for standard normal ``Z``."""
    s = math.sqrt(var)
    d = (x - strike) / s
    return (x - strike) * special.ndtr(d) + s * math.exp(-0.5 * d * d) / math.sqrt(2 * math.pi)


def heat_kernel_value(phi, x: float, var: float, n: int = 201) -> float:
    """``E[phi(x + sqrt(var) Z)]`` by Gauss-Hermite quadrature of order ``n`` (smooth ``phi``)."""
    z, w = special.roots_hermitenorm(n)
    return float(np.sum(w * phi(x + math.sqrt(var) * z)) / math.sqrt(2 * math.pi))


# --------------------------------------------------------- PDE vs Monte Carlo


@dataclass
class PdeMcReport:
    h: float
    t: float
    x: float
    pde: float
    mc_upper: float
    mc_stderr: float
    per_policy: dict
    boundary_delta: float | None

    @property
    def discrepancy(self) -> float:
        return self.mc_upper - self.pde

    def check(self, name: str = "pde_vs_mc", n_se: float = 3.0, rel: float = 0.02) -> CheckResult:
        return mc_check(name, self.pde, self.mc_upper, self.mc_stderr, n_se, rel, {"h": self.h})


def pde_vs_mc(
    spec: GHeatSpec,
    theta: UncertaintySet,
    policies: Sequence[ScenarioPolicy],
    h,
    grid: TimeGrid,
    M: int,
    seed: int,
    i: int = 0,
    pde_value: float | None = None,
    boundary_delta: float | None = None,
) -> PdeMcReport:
    """Compare ``u(t, x)`` with the upper MC mean of ``phi(x + t^{1/2-H} B^H_t(i))``.

    ``t`` is ``spec.horizon`` and must be a grid point.  A precomputed
    ``pde_value`` skips the PDE solve (for reuse across ``h``).
    """
    lo, hi = sigma_bounds(theta, i)
    if not (math.isclose(lo, spec.sigma_low_sq, rel_tol=1e-12) and math.isclose(hi, spec.sigma_high_sq, rel_tol=1e-12)):
        raise ValueError(
            f"spec bounds ({spec.sigma_low_sq:g}, {spec.sigma_high_sq:g}) differ from theta bounds ({lo:g}, {hi:g})"
        )
    hurst = HurstIndex.of(h)
    t = spec.horizon
    k = grid.index_of(t)
    if pde_value is None:
        sol = solve_g_heat(spec)
        pde_value, boundary_delta = sol.value(), sol.boundary_delta
    table = kernel_weights(hurst, grid)
    per = {}
    for policy in policies:
        path = simulate_gfbm(theta, policy, table, seed, M)
        y = np.asarray(spec.payoff(spec.x_query + t ** (0.5 - hurst.h) * path.values[:, i, k]), dtype=float)
        per[policy.policy_id] = (float(y.mean()), float(y.std(ddof=1) / math.sqrt(M)))
    best = max(per, key=lambda p: per[p][0])
    return PdeMcReport(hurst.h, t, spec.x_query, float(pde_value), per[best][0], per[best][1], per, boundary_delta)
