"""Volatility uncertainty sets, scenario policies and sublinear Monte Carlo.

A G-Brownian motion is sampled one prior at a time: a scenario policy picks
an instantaneous covariance ``gamma_k`` from the uncertainty set for every
cell and the increment is ``sqrt(gamma_k) sqrt(dt_k) Z_k``.  Upper and lower
expectations are maxima and minima of ordinary Monte Carlo means over a
finite policy family, hence lower bounds of the true suprema.

Component indices are zero-based throughout.
"""

from __future__ import annotations

import json
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .grid import TimeGrid

__all__ = [
    "UncertaintySet",
    "ScenarioPolicy",
    "ConstantVertex",
    "ConstantMix",
    "PiecewiseSwitch",
    "AntitheticPair",
    "PathBundle",
    "PolicyStat",
    "SublinearEstimate",
    "NonFiniteError",
    "sigma_bounds",
    "cross_bounds",
    "g_function",
    "psd_sqrt",
    "replicate_seed",
    "simulate_gbm",
    "simulate_replicates",
    "estimate",
    "estimate_many",
]

SYM_TOL = 1e-12
PSD_TOL = 1e-10
MAX_NONFINITE_FRACTION = 0.01
# floats per simulation chunk (increments plus values)
_CHUNK_FLOATS = 1 << 22


class NonFiniteError(ArithmeticError):
    """Too many replicates produced non-finite payoffs."""


def psd_sqrt(gamma: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via ``eigh``; tiny negative eigenvalues are clipped."""
    gamma = np.asarray(gamma, dtype=float)
    vals, vecs = np.linalg.eigh(0.5 * (gamma + gamma.swapaxes(-1, -2)))
    if np.any(vals < -PSD_TOL):
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {vals.min():.3g})")
    root = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * root[..., None, :]) @ vecs.swapaxes(-1, -2)


@dataclass(frozen=True, eq=False)
class UncertaintySet:
    """Convex hull of symmetric PSD covariance matrices, kept by its vertices.

    Parameters
    ----------
    vertices : array_like, shape (V, d, d)
        Vertex matrices (covariance per unit time).  A 1-D input of
        variances is read as ``d = 1``.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim == 1:
            v = v[:, None, None]
        if v.ndim != 3 or v.shape[1] != v.shape[2] or v.shape[0] == 0:
            raise ValueError(f"vertices must have shape (V, d, d), got {v.shape}")
        for idx, gamma in enumerate(v):
            if not np.all(np.isfinite(gamma)):
                raise ValueError(f"vertex {idx} has non-finite entries")
            asym = np.abs(gamma - gamma.T).max()
            if asym > SYM_TOL:
                raise ValueError(f"vertex {idx} is not symmetric (max asymmetry {asym:.3g})")
            low = np.linalg.eigvalsh(gamma).min()
            if low < -PSD_TOL:
                raise ValueError(
                    f"vertex {idx} is not positive semidefinite (min eigenvalue {low:.6g})"
                )
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        roots = psd_sqrt(v)
        roots.setflags(write=False)
        object.__setattr__(self, "_roots", roots)

    @classmethod
    def interval(cls, low: float, high: float) -> "UncertaintySet":
        """One-dimensional set ``[low, high]`` of variances."""
        if not 0 <= low <= high:
            raise ValueError("need 0 <= low <= high")
        return cls(np.array([low, high], dtype=float))

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def roots(self) -> np.ndarray:
        """Symmetric square roots of the vertices, shape (V, d, d)."""
        return self._roots

    def scaled(self, lam: float) -> "UncertaintySet":
        if lam <= 0:
            raise ValueError("scale must be positive")
        return UncertaintySet(lam * self.vertices)

    def mix(self, weights) -> np.ndarray:
        """Convex combination of vertices."""
        w = np.asarray(weights, dtype=float)
        if w.shape != (self.n_vertices,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixing weights must be non-negative, one per vertex, summing to 1")
        return np.tensordot(w, self.vertices, axes=1)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "vertices": self.vertices.tolist()}

    def __repr__(self) -> str:
        return f"UncertaintySet(dim={self.dim}, n_vertices={self.n_vertices})"


def _check_index(theta: UncertaintySet, i: int) -> int:
    if not 0 <= int(i) < theta.dim:
        raise IndexError(f"component {i} out of range for dimension {theta.dim}")
    return int(i)


def sigma_bounds(theta: UncertaintySet, i: int) -> tuple[float, float]:
    """``(sigma_low^2, sigma_high^2)`` of component ``i``: min/max of ``gamma_ii`` over vertices."""
    i = _check_index(theta, i)
    diag = theta.vertices[:, i, i]
    return float(diag.min()), float(diag.max())


def cross_bounds(theta: UncertaintySet, i: int, j: int) -> tuple[float, float]:
    """Cross-moment bounds ``(sigma_low^2_ij, sigma_high^2_ij)``.

    With ``p = gamma_ii + gamma_jj + 2 gamma_ij`` and
    ``m = gamma_ii + gamma_jj - 2 gamma_ij``, the upper bound is
    ``sup p - inf m`` and the lower bound ``inf p - sup m``.
    """
    i = _check_index(theta, i)
    j = _check_index(theta, j)
    if i == j:
        raise ValueError("cross bounds need two distinct components")
    v = theta.vertices
    base = v[:, i, i] + v[:, j, j]
    plus = base + 2.0 * v[:, i, j]
    minus = base - 2.0 * v[:, i, j]
    return float(plus.min() - minus.max()), float(plus.max() - minus.min())


def g_function(theta: UncertaintySet, a) -> float:
    """``G(A) = 1/2 max_gamma tr(A gamma)`` over the vertices."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape != (theta.dim, theta.dim):
        raise ValueError(f"expected a {theta.dim}x{theta.dim} matrix")
    if np.abs(a - a.T).max() > 1e-10:
        raise ValueError("G is defined on symmetric matrices")
    return 0.5 * float(np.einsum("ij,vji->v", a, theta.vertices).max())


# ---------------------------------------------------------------- policies


class ScenarioPolicy:
    """Adapted rule choosing ``gamma_k`` for each cell.

    Static policies return the whole schedule from :meth:`schedule`;
    path-dependent ones return ``None`` there and answer :meth:`choose` one
    cell at a time from the path values at ``t_k``.
    """

    antithetic = False

    @property
    def policy_id(self) -> str:
        raise NotImplementedError

    @property
    def description(self) -> str:
        return self.policy_id

    def schedule(self, theta: UncertaintySet, grid: TimeGrid):
        """Per-cell square roots, shape (N, d, d), or ``None`` if path-dependent."""
        raise NotImplementedError

    def choose(self, theta: UncertaintySet, k: int, state: np.ndarray) -> np.ndarray:
        """Vertex-hull roots for cell ``k`` given values at ``t_k``, shape (M, d, d)."""
        raise NotImplementedError

    def validate(self, theta: UncertaintySet) -> None:
        pass

    def to_dict(self) -> dict:
        return {"policy_id": self.policy_id, "description": self.description}


@dataclass(frozen=True)
class ConstantVertex(ScenarioPolicy):
    """Always vertex ``index``."""

    index: int
    label: str = ""

    @property
    def policy_id(self) -> str:
        return f"vertex[{self.index}]"

    @property
    def description(self) -> str:
        return self.label or f"constant vertex {self.index}"

    def validate(self, theta):
        if not 0 <= self.index < theta.n_vertices:
            raise IndexError(f"vertex index {self.index} out of range ({theta.n_vertices} vertices)")

    def schedule(self, theta, grid):
        self.validate(theta)
        return np.broadcast_to(theta.roots[self.index], (grid.n, theta.dim, theta.dim))


@dataclass(frozen=True)
class ConstantMix(ScenarioPolicy):
    """Always the convex combination ``sum_v weights[v] * vertex_v``."""

    weights: tuple
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @property
    def policy_id(self) -> str:
        return "mix[" + ",".join(f"{w:g}" for w in self.weights) + "]"

    @property
    def description(self) -> str:
        return self.label or "constant convex mix of vertices"

    def validate(self, theta):
        theta.mix(self.weights)

    def schedule(self, theta, grid):
        root = psd_sqrt(theta.mix(self.weights))
        return np.broadcast_to(root, (grid.n, theta.dim, theta.dim))


@dataclass(frozen=True)
class PiecewiseSwitch(ScenarioPolicy):
    """Switch between vertices along the path.

    ``rule="random"`` draws a vertex for every block of ``every`` cells from
    the policy seed alone.  ``rule="sign"`` picks ``vertices[0]`` while
    component ``component`` of the path is negative at ``t_k`` and
    ``vertices[1]`` otherwise.
    """

    seed: int = 0
    rule: str = "random"
    every: int = 1
    vertices: tuple = (0, 1)
    component: int = 0

    def __post_init__(self):
        if self.rule not in ("random", "sign"):
            raise ValueError(f"unknown switch rule {self.rule!r}")
        if self.every < 1:
            raise ValueError("every must be >= 1")
        object.__setattr__(self, "vertices", tuple(int(v) for v in self.vertices))

    @property
    def policy_id(self) -> str:
        if self.rule == "random":
            return f"switch[random,{self.seed},{self.every}]"
        a, b = self.vertices
        return f"switch[sign,{a},{b},{self.component}]"

    def validate(self, theta):
        if self.rule == "sign":
            for v in self.vertices:
                if not 0 <= v < theta.n_vertices:
                    raise IndexError(f"vertex index {v} out of range")
            _check_index(theta, self.component)

    def schedule(self, theta, grid):
        self.validate(theta)
        if self.rule == "sign":
            return None
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0x5C4ED]))
        n_blocks = -(-grid.n // self.every)
        picks = np.repeat(rng.integers(theta.n_vertices, size=n_blocks), self.every)[: grid.n]
        return theta.roots[picks]

    def choose(self, theta, k, state):
        a, b = self.vertices
        pick = np.where(state[:, self.component] < 0.0, a, b)
        return theta.roots[pick]


@dataclass(frozen=True)
class AntitheticPair(ScenarioPolicy):
    """``base`` with replicates in pairs driven by ``Z`` and ``-Z``."""

    base: ScenarioPolicy
    antithetic = True

    @property
    def policy_id(self) -> str:
        return f"antithetic({self.base.policy_id})"

    @property
    def description(self) -> str:
        return f"antithetic pairs of {self.base.description}"

    def validate(self, theta):
        self.base.validate(theta)

    def schedule(self, theta, grid):
        return self.base.schedule(theta, grid)

    def choose(self, theta, k, state):
        return self.base.choose(theta, k, state)


# ------------------------------------------------------------------ paths


@dataclass(frozen=True, eq=False)
class PathBundle:
    """``M`` sampled G-BM paths of dimension ``d`` on a common grid.

    ``increments`` has shape (M, d, N) and ``values`` (M, d, N+1) with
    ``values[..., 0] = 0``.  ``seeds`` holds one replicate id per path.
    """

    grid: TimeGrid
    increments: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    policy_id: str = ""
    seeds: tuple = ()
    master_seed: int | None = None

    @property
    def dim(self) -> int:
        return self.increments.shape[1]

    @property
    def n_paths(self) -> int:
        return self.increments.shape[0]

    def at(self, t: float) -> np.ndarray:
        """Values at grid time ``t``, shape (M, d)."""
        return self.values[:, :, self.grid.index_of(t)]

    def subset(self, idx) -> "PathBundle":
        idx = np.atleast_1d(np.arange(self.n_paths)[idx])
        seeds = tuple(self.seeds[i] for i in idx) if self.seeds else ()
        return PathBundle(
            self.grid, self.increments[idx], self.values[idx], self.policy_id, seeds, self.master_seed
        )


def _cumulate(increments: np.ndarray) -> np.ndarray:
    values = np.zeros(increments.shape[:-1] + (increments.shape[-1] + 1,))
    np.cumsum(increments, axis=-1, out=values[..., 1:])
    return values


def _increments_from_normals(
    theta: UncertaintySet, policy: ScenarioPolicy, grid: TimeGrid, normals: np.ndarray, record=False
):
    """Increments (M, d, N) from standard normals (M, N, d).

    With ``record=True`` also returns the chosen roots, shape (M, N, d, d).
    """
    m, n, d = normals.shape
    if n != grid.n or d != theta.dim:
        raise ValueError("normals do not match grid and dimension")
    sq = np.sqrt(grid.steps)
    sched = policy.schedule(theta, grid)
    if sched is not None:
        inc = np.einsum("kij,mkj->mik", sched, normals) * sq
        roots = np.broadcast_to(sched, (m, n, d, d)) if record else None
        return (inc, roots) if record else inc
    inc = np.empty((m, d, n))
    state = np.zeros((m, d))
    roots = np.empty((m, n, d, d)) if record else None
    for k in range(n):
        r = policy.choose(theta, k, state)
        step = np.einsum("mij,mj->mi", r, normals[:, k, :]) * sq[k]
        inc[:, :, k] = step
        state = state + step
        if record:
            roots[:, k] = r
    return (inc, roots) if record else inc


def replicate_seed(master_seed: int, policy_id: str, replicate_id: int) -> np.random.SeedSequence:
    """Seed of one replicate, derived from ``(master_seed, policy_id, replicate_id)``."""
    return np.random.SeedSequence([int(master_seed), zlib.crc32(policy_id.encode()), int(replicate_id)])


def _normals(policy, ids, n, d, master_seed):
    out = np.empty((len(ids), n, d))
    for row, rid in enumerate(ids):
        if policy.antithetic:
            rng = np.random.default_rng(replicate_seed(master_seed, policy.policy_id, rid // 2))
            out[row] = rng.standard_normal((n, d)) * (1.0 if rid % 2 == 0 else -1.0)
        else:
            rng = np.random.default_rng(replicate_seed(master_seed, policy.policy_id, rid))
            out[row] = rng.standard_normal((n, d))
    return out


def simulate_replicates(
    theta: UncertaintySet, policy: ScenarioPolicy, grid: TimeGrid, master_seed: int, replicate_ids
) -> PathBundle:
    """Paths for the given replicate ids; each is reproducible on its own."""
    policy.validate(theta)
    ids = [int(r) for r in np.atleast_1d(replicate_ids)]
    normals = _normals(policy, ids, grid.n, theta.dim, master_seed)
    inc = _increments_from_normals(theta, policy, grid, normals)
    return PathBundle(grid, inc, _cumulate(inc), policy.policy_id, tuple(ids), int(master_seed))


def simulate_gbm(
    theta: UncertaintySet, policy: ScenarioPolicy, grid: TimeGrid, seed: int, n_paths: int = 1
) -> PathBundle:
    """Sample ``n_paths`` G-BM paths under ``policy``.

    Deterministic in ``(seed, policy)``: replicate ``r`` uses the seed
    derived by :func:`replicate_seed`, so the first paths of a larger run
    equal a smaller run bit for bit.
    """
    return simulate_replicates(theta, policy, grid, seed, range(n_paths))


# -------------------------------------------------------------- estimation


@dataclass(frozen=True)
class PolicyStat:
    policy_id: str
    mean: float
    stderr: float
    m: int
    n_nonfinite: int = 0


@dataclass(frozen=True)
class SublinearEstimate:
    """Upper/lower Monte Carlo expectation over a finite policy family.

    ``upper`` is the largest and ``lower`` the smallest per-policy mean.  A
    finite family only bounds the true supremum from below.
    """

    payoff: str
    upper: float
    lower: float
    per_policy: tuple
    replicates: int
    master_seed: int
    lower_bound_of_supremum: bool = True

    def _pick(self, best):
        return next(p for p in self.per_policy if p.mean == best)

    @property
    def upper_stat(self) -> PolicyStat:
        return self._pick(self.upper)

    @property
    def lower_stat(self) -> PolicyStat:
        return self._pick(self.lower)

    @property
    def upper_stderr(self) -> float:
        return self.upper_stat.stderr

    @property
    def lower_stderr(self) -> float:
        return self.lower_stat.stderr

    def stat(self, policy_id: str) -> PolicyStat:
        for p in self.per_policy:
            if p.policy_id == policy_id:
                return p
        raise KeyError(policy_id)

    def to_dict(self) -> dict:
        return {
            "payoff": self.payoff,
            "upper": self.upper,
            "lower": self.lower,
            "upper_policy": self.upper_stat.policy_id,
            "lower_policy": self.lower_stat.policy_id,
            "replicates": self.replicates,
            "master_seed": self.master_seed,
            "lower_bound_of_supremum": self.lower_bound_of_supremum,
            "per_policy": [p.__dict__ for p in self.per_policy],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


Payoff = Callable[[PathBundle], np.ndarray]


def _chunks(m: int, n: int, d: int):
    size = max(2, _CHUNK_FLOATS // max(1, 2 * n * d))
    size -= size % 2  # keep antithetic pairs together
    for lo in range(0, m, size):
        yield range(lo, min(lo + size, m))


def _policy_samples(payoffs, theta, policy, grid, m, master_seed):
    cols = {name: [] for name in payoffs}
    for ids in _chunks(m, grid.n, theta.dim):
        bundle = simulate_replicates(theta, policy, grid, master_seed, ids)
        for name, fn in payoffs.items():
            vals = np.asarray(fn(bundle), dtype=float).reshape(-1)
            if vals.size != len(ids):
                raise ValueError(f"payoff {name!r} returned {vals.size} values for {len(ids)} paths")
            cols[name].append(vals)
    return {name: np.concatenate(parts) for name, parts in cols.items()}


def _stat(policy_id: str, name: str, samples: np.ndarray) -> PolicyStat:
    ok = np.isfinite(samples)
    bad = int(samples.size - ok.sum())
    if bad > MAX_NONFINITE_FRACTION * samples.size:
        raise NonFiniteError(
            f"payoff {name!r} under {policy_id}: {bad} of {samples.size} replicates non-finite"
        )
    good = samples[ok]
    mean = float(np.mean(good))
    stderr = float(np.std(good, ddof=1) / np.sqrt(good.size))
    return PolicyStat(policy_id, mean, stderr, int(good.size), bad)


def estimate_many(
    payoffs: Mapping[str, Payoff],
    theta: UncertaintySet,
    policies: Sequence[ScenarioPolicy],
    grid: TimeGrid,
    M: int,
    master_seed: int,
    jobs: int = 1,
    return_samples: bool = False,
):
    """Sublinear estimates of several payoffs on the same replicates.

    Each payoff maps a :class:`PathBundle` to one value per path.  Returns a
    dict of :class:`SublinearEstimate` keyed like ``payoffs`` (and the raw
    per-policy samples when ``return_samples``).
    """
    if M < 2:
        raise ValueError("need at least two replicates")
    if not policies:
        raise ValueError("need at least one policy")
    ids = [p.policy_id for p in policies]
    if len(set(ids)) != len(ids):
        raise ValueError("policy ids must be distinct")
    for p in policies:
        p.validate(theta)

    def run(policy):
        return _policy_samples(payoffs, theta, policy, grid, M, master_seed)

    if jobs > 1 and len(policies) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            samples = list(pool.map(run, policies))
    else:
        samples = [run(p) for p in policies]

    out = {}
    for name in payoffs:
        stats = tuple(_stat(p.policy_id, name, s[name]) for p, s in zip(policies, samples))
        means = [s.mean for s in stats]
        out[name] = SublinearEstimate(
            payoff=name,
            upper=max(means),
            lower=-max(-x for x in means),
            per_policy=stats,
            replicates=int(M),
            master_seed=int(master_seed),
        )
    if return_samples:
        return out, {p.policy_id: s for p, s in zip(policies, samples)}
    return out


def estimate(
    payoff: Payoff,
    theta: UncertaintySet,
    policies: Sequence[ScenarioPolicy],
    grid: TimeGrid,
    M: int,
    master_seed: int,
    name: str | None = None,
    jobs: int = 1,
) -> SublinearEstimate:
    """Upper and lower expectation of ``payoff`` over ``policies``."""
    name = name or getattr(payoff, "__name__", "payoff")
    return estimate_many({name: payoff}, theta, policies, grid, M, master_seed, jobs=jobs)[name]
