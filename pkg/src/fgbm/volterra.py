"""Volterra kernel of fractional Brownian motion.

The fractional process is written as ``B^H_t = int_0^t K_H(t, s) dB_s`` with

* ``H > 1/2``: ``K_H(t,s) = c_H s^{1/2-H} int_s^t (u-s)^{H-3/2} u^{H-1/2} du``
* ``H < 1/2``: ``K_H(t,s) = d_H [(t/s)^{H-1/2} (t-s)^{H-1/2}
  - (H-1/2) s^{1/2-H} int_s^t u^{H-3/2} (u-s)^{H-1/2} du]``
* ``H = 1/2``: ``K(t,s) = 1`` for ``s < t``, so ``B^{1/2} = B``.

Pointwise values come from singularity-weighted adaptive quadrature.  Grid
tables use an exact antiderivative in ``s`` built from regularized
incomplete Beta functions, so they are cheap enough for ``N`` in the
thousands and independent of the pointwise quadrature that checks them.
"""

from __future__ import annotations

import csv
import enum
import functools
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .grid import TimeGrid

__all__ = [
    "Regime",
    "HurstIndex",
    "KernelTable",
    "kernel_constant",
    "eval_kernel",
    "kernel_inner",
    "kernel_inner_quad",
    "kernel_weights",
    "kernel_antiderivative",
]

_QUAD_RTOL = 1e-12


class Regime(enum.Enum):
    LOW = "low"
    HALF = "half"
    HIGH = "high"


@dataclass(frozen=True)
class HurstIndex:
    """Hurst index ``h`` in (0, 1) together with its regime."""

    h: float

    def __post_init__(self):
        h = float(self.h)
        if not 0.0 < h < 1.0:
            raise ValueError(f"Hurst index must lie in (0, 1), got {h!r}")
        object.__setattr__(self, "h", h)

    @classmethod
    def of(cls, h) -> "HurstIndex":
        return h if isinstance(h, HurstIndex) else cls(h)

    @property
    def regime(self) -> Regime:
        if self.h == 0.5:
            return Regime.HALF
        return Regime.HIGH if self.h > 0.5 else Regime.LOW

    def __float__(self) -> float:
        return self.h


def kernel_constant(h, method: str = "beta") -> float:
    """Normalizing constant ``c_H`` (``H > 1/2``) or ``d_H`` (``H < 1/2``).

    ``method="beta"`` uses the Beta-function identities for the denominator
    integrals; ``method="quad"`` integrates them adaptively with the
    algebraic endpoint weights.  Both agree to ~1e-12.
    """
    H = HurstIndex.of(h).h
    if H == 0.5:
        raise ValueError("no kernel constant at H = 1/2 (the kernel is the indicator)")
    if method == "beta":
        if H > 0.5:
            denom = special.beta(H - 0.5, 2.0 - 2.0 * H)
        else:
            denom = special.beta(H + 0.5, 1.0 - 2.0 * H)
    elif method == "quad":
        # int_0^1 (1-x)^a x^b dx with QUADPACK's alg weight x^b (1-x)^a
        if H > 0.5:
            wvar = (H - 1.5, 1.0 - 2.0 * H)
        else:
            wvar = (H - 0.5, -2.0 * H)
        denom, _ = integrate.quad(
            lambda x: 1.0, 0.0, 1.0, weight="alg", wvar=wvar, epsabs=0.0, epsrel=_QUAD_RTOL
        )
    else:
        raise ValueError(f"unknown method {method!r}")
    if H > 0.5:
        return float(np.sqrt(H * (2.0 * H - 1.0) / denom))
    return float(np.sqrt(2.0 * H / ((1.0 - 2.0 * H) * denom)))


def eval_kernel(h, t: float, s: float) -> float:
    """Pointwise ``K_H(t, s)``; zero for ``s >= t``.

    The inner integral is mapped to ``[0, 1]`` by ``u = s + (t-s) v`` and
    integrated against the algebraic weight of its endpoint singularity.
    ``s <= 0`` is rejected: the kernel is singular there for ``H != 1/2``.
    """
    H = HurstIndex.of(h).h
    t = float(t)
    s = float(s)
    if s >= t:
        return 0.0
    if H == 0.5:
        return 1.0
    if s <= 0.0:
        raise ValueError(
            "K_H(t, s) is singular at s = 0; use cell-integrated weights (kernel_weights)"
        )
    width = t - s
    const = kernel_constant(H)
    if H > 0.5:
        inner, _ = integrate.quad(
            lambda v: (s + width * v) ** (H - 0.5),
            0.0,
            1.0,
            weight="alg",
            wvar=(H - 1.5, 0.0),
            epsabs=0.0,
            epsrel=_QUAD_RTOL,
            limit=200,
        )
        return const * s ** (0.5 - H) * width ** (H - 0.5) * inner
    # the integrand peaks near v = s/(t-s); beyond that use log v
    split = min(1.0, s / width)
    inner, _ = integrate.quad(
        lambda v: (s + width * v) ** (H - 1.5),
        0.0,
        split,
        weight="alg",
        wvar=(H - 0.5, 0.0),
        epsabs=0.0,
        epsrel=_QUAD_RTOL,
        limit=200,
    )
    if split < 1.0:
        tail, _ = integrate.quad(
            lambda x: np.exp((H + 0.5) * x) * (s + width * np.exp(x)) ** (H - 1.5),
            np.log(split),
            0.0,
            epsabs=0.0,
            epsrel=_QUAD_RTOL,
            limit=200,
        )
        inner += tail
    inner *= width ** (H + 0.5)
    return const * ((t / s) ** (H - 0.5) * width ** (H - 0.5) - (H - 0.5) * s ** (0.5 - H) * inner)


def kernel_inner(h, s: float, t: float) -> float:
    """Closed form of ``int_0^{s^t} K_H(s,u) K_H(t,u) du``."""
    H = HurstIndex.of(h).h
    if s < 0 or t < 0:
        raise ValueError("times must be non-negative")
    return 0.5 * (t ** (2 * H) + s ** (2 * H) - abs(t - s) ** (2 * H))


def kernel_inner_quad(h, s: float, t: float) -> float:
    """Adaptive quadrature of ``int_0^{s^t} K_H(s,u) K_H(t,u) du``.

    Independent of :func:`kernel_inner`; used to check the closed form.  The
    singular endpoint behaviour (``u^{-|2H-1|}`` at 0, ``(a-u)^{H-1/2}`` per
    kernel whose first argument equals the upper limit ``a``) is moved into
    QUADPACK's algebraic weight.
    """
    H = HurstIndex.of(h).h
    a, b = sorted((float(s), float(t)))
    if a <= 0.0:
        return 0.0
    if H == 0.5:
        return a
    left = -abs(2.0 * H - 1.0)
    right = (2.0 * H - 1.0) if a == b else (H - 0.5)

    def integrand(u):
        # QAWSE samples the endpoints themselves
        u = min(max(u, a * 1e-14), a * (1.0 - 1e-14))
        w = u**left * (a - u) ** right
        return eval_kernel(H, a, u) * eval_kernel(H, b, u) / w

    val, _ = integrate.quad(
        integrand, 0.0, a, weight="alg", wvar=(left, right), epsabs=0.0, epsrel=1e-9, limit=200
    )
    return val


def _unit_antiderivative(H: float, y: np.ndarray) -> np.ndarray:
    """``F(y) = int_0^y K_H(1, x) dx`` for ``y`` in [0, 1], closed form."""
    y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
    const = kernel_constant(H)
    if H > 0.5:
        p, q = 1.5 - H, H - 0.5
        # y^{H+1/2} * int_y^1 r^{-2H} (1-r)^{q-1} dr, after one integration by parts
        tail = (
            y ** (1.5 - H) * (1.0 - y) ** q
            - (0.5 - H)
            * special.beta(2.0 - 2.0 * H, q)
            * y ** (H + 0.5)
            * special.betainc(q, 2.0 - 2.0 * H, 1.0 - y)
        ) / (2.0 * H - 1.0)
        return const / (H + 0.5) * (special.beta(p, q) * special.betainc(p, q, y) + tail)
    p, q = 1.5 - H, H + 0.5
    first = special.beta(p, q) * special.betainc(p, q, y)
    tail = y ** (H + 0.5) * special.beta(1.0 - 2.0 * H, q) * special.betainc(q, 1.0 - 2.0 * H, 1.0 - y)
    return const * (first - (H - 0.5) / (H + 0.5) * (first + tail))


def kernel_antiderivative(h, t, a):
    """``int_0^a K_H(t, s) ds`` (vectorized), using ``K_H(t,s) = t^{H-1/2} K_H(1, s/t)``."""
    H = HurstIndex.of(h).h
    t = np.asarray(t, dtype=float)
    a = np.minimum(np.asarray(a, dtype=float), t)
    if H == 0.5:
        return np.maximum(a, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(t > 0, a / t, 0.0)
    return np.where(t > 0, t ** (H + 0.5) * _unit_antiderivative(H, ratio), 0.0)


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Cell-averaged Volterra weights on a grid.

    ``weights[k, j]`` is the average of ``K_H(t_k, .)`` over cell ``j`` (the
    first column is variance-matched for ``H > 1/2``, see
    :func:`kernel_weights`), i.e. the multiplier of the Brownian increment
    ``dB_j`` in ``B^H_{t_k}``.  Row 0 is zero and entries with ``j >= k``
    vanish.
    """

    grid: TimeGrid
    hurst: HurstIndex
    weights: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return self.hurst.h

    @property
    def table_id(self) -> str:
        return f"K{self.h:g}-{self.grid.n}-{abs(hash(self.grid)) % 10**8:08d}"

    def apply(self, increments: np.ndarray) -> np.ndarray:
        """Map increments of shape ``(..., N)`` to path values ``(..., N+1)``."""
        inc = np.asarray(increments, dtype=float)
        n = self.grid.n
        if inc.shape[-1] != n:
            raise ValueError(f"expected {n} increments on the last axis, got {inc.shape[-1]}")
        lead = inc.shape[:-1]
        if self.hurst.regime is Regime.HALF:
            out = np.zeros(lead + (n + 1,))
            np.cumsum(inc, axis=-1, out=out[..., 1:])
            return out
        flat = inc.reshape(-1, n)
        return (flat @ self.weights.T).reshape(lead + (n + 1,))

    def covariance(self) -> np.ndarray:
        """Discrete ``sum_j w[k,j] w[l,j] dt_j``; approximates :func:`kernel_inner`."""
        w = self.weights
        return (w * self.grid.steps) @ w.T

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "j", "weight"])
            for k in range(1, self.grid.n + 1):
                for j in range(k):
                    writer.writerow([k, j, repr(float(self.weights[k, j]))])


_ROW_CHUNK = 256


@functools.lru_cache(maxsize=4)
def _cached_weights(H: float, grid: TimeGrid) -> KernelTable:
    t = grid.times
    n = grid.n
    w = np.zeros((n + 1, n))
    if H == 0.5:
        w[np.tril_indices(n + 1, -1, n)] = 1.0
    else:
        steps = grid.steps
        for k0 in range(1, n + 1, _ROW_CHUNK):
            k1 = min(k0 + _ROW_CHUNK, n + 1)
            tk = t[k0:k1, None]
            cols = t[None, :k1]
            prim = kernel_antiderivative(H, tk, cols)
            block = np.diff(prim, axis=1) / steps[None, : k1 - 1]
            # zero the upper triangle: cells at or beyond t_k
            block[np.arange(k1 - k0)[:, None] + k0 <= np.arange(k1 - 1)[None, :]] = 0.0
            w[k0:k1, : k1 - 1] = block
        if H > 0.5:
            # Cell averaging discards the within-cell variation of s^{1/2-H} in
            # cell 0, which is nearly the same shape for every row; rescaling
            # that column restores Var B^H_{t_k} = t_k^{2H} row by row.
            rest = (w[1:, 1:] ** 2 * steps[1:]).sum(axis=1)
            w[1:, 0] = np.sqrt((t[1:] ** (2.0 * H) - rest) / steps[0])
        if not np.all(np.isfinite(w)):
            raise FloatingPointError(f"non-finite kernel weights for H={H}, {grid!r}")
    w.setflags(write=False)
    return KernelTable(grid=grid, hurst=HurstIndex(H), weights=w)


def kernel_weights(h, grid: TimeGrid) -> KernelTable:
    """Cell-averaged kernel table on ``grid`` (cached per ``(h, grid)``).

    ``w[k, j] = (1/dt_j) int_{t_j}^{t_{j+1}} K_H(t_k, s) ds`` computed from the
    exact antiderivative, so the ``s^{1/2-H}`` singularity in the first cell
    and the vanishing edge at ``s -> t_k`` need no special quadrature.

    For ``H > 1/2`` the first column is replaced by the variance-matched
    weight ``sqrt((t_k^{2H} - sum_{j>0} w[k,j]^2 dt_j) / dt_0)``.  Plain
    averaging converges like ``N^{2H-2}`` there (a 10% variance deficit at
    ``H=0.9``, ``N=512``); matching brings every covariance entry within 1%
    of the closed form relative to ``max(t_k, t_l)^{2H}``.
    """
    return _cached_weights(HurstIndex.of(h).h, grid)
