"""Fractional integrals, Weyl-Marchaud derivatives and the pathwise integral.

Sampled functions are read as their piecewise-linear interpolants.  Every
singular integral is evaluated exactly for that interpolant (product
integration): on each cell the integrand is ``(p + q u) u^{-gamma-1}`` in
the distance ``u`` to the singular point, which integrates in closed form.
Absolute-value integrands are split at the sign change inside the cell.

The pathwise integral uses the real-valued convention

    int_a^b f dg = -int_a^b D^alpha_{a+} f_{a+}(x) D^{1-alpha}_{b-} g_{b-}(x) dx
                   + f(a) (g(b) - g(a))

with the left derivative normalized by ``1/Gamma(1-alpha)`` and the right
one by ``1/Gamma(alpha)``; it reproduces the Riemann-Stieltjes integral on
Hölder pairs (``int_0^1 t d(t^2) = 2/3``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, special

from .grid import TimeGrid
from .volterra import HurstIndex

__all__ = [
    "SampledFunction",
    "FracParams",
    "AdmissibilityError",
    "rl_integral_left",
    "rl_integral_right",
    "rl_integral_left_all",
    "weyl_left",
    "weyl_right",
    "gls_integral",
    "riemann_stieltjes",
    "norm_alpha_1",
    "norm_one_minus_alpha_inf",
    "norm_alpha_inf",
    "g_tilde",
    "g_tilde_profile",
    "singular_decay_exponent",
    "DIVERGENT",
]

# returned by the norms when the refinement test says the integral diverges
DIVERGENT = math.inf
# minimal decay exponent of the singular integrand near the diagonal
ADMISSIBLE_EXPONENT = 1e-4
_DECAY_LAGS = (1, 2, 4, 8)
_ROW_CHUNK = 512


class AdmissibilityError(ValueError):
    """An input fails the numerical admissibility test of a fractional norm."""


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Values on a grid, read as a piecewise-linear function.

    ``admissible`` and ``decay_exponent`` are filled in by the Weyl
    derivatives (see :func:`singular_decay_exponent`).

    ``singular`` optionally lists power terms ``(c, e)`` with ``e > 0``
    such that ``f(x) - sum c (x - a)^e`` is well represented by its
    interpolant.  ``values`` always hold the full function; only
    :func:`weyl_left` uses the terms, differentiating them in closed form.
    Operations that move the anchor ``a`` (reflection, refinement) drop them.
    """

    grid: TimeGrid
    values: np.ndarray = field(repr=False)
    holder_hint: float | None = None
    admissible: bool = True
    decay_exponent: float | None = None
    singular: tuple = ()

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (len(self.grid),):
            raise ValueError(f"expected {len(self.grid)} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("sampled function has non-finite values")
        terms = tuple((float(c), float(e)) for c, e in self.singular)
        if any(e <= 0 for _, e in terms):
            raise ValueError("singular terms need positive exponents")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "singular", terms)

    def singular_part(self) -> np.ndarray:
        """``sum c (x - a)^e`` at the nodes (zeros without terms)."""
        u = self.grid.times - self.grid.times[0]
        return sum((c * u**e for c, e in self.singular), np.zeros_like(u))

    @classmethod
    def from_callable(cls, fn, grid: TimeGrid, **kw) -> "SampledFunction":
        return cls(grid, fn(grid.times), **kw)

    @classmethod
    def from_path(cls, path, replicate: int = 0, component: int = 0) -> "SampledFunction":
        """Take one replicate and component of a :class:`~fgbm.gfbm.GfbmPath`."""
        return cls(path.grid, path.values[replicate, component], holder_hint=path.h)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / self.grid.steps

    def reflected(self) -> "SampledFunction":
        """``x -> f(a + b - x)`` on the mirrored grid."""
        t = self.grid.times
        return SampledFunction(TimeGrid(t[-1] - t[::-1]), self.values[::-1], self.holder_hint)

    def _combine(self, other, sign):
        terms = self.singular
        if isinstance(other, SampledFunction):
            terms = terms + tuple((sign * c, e) for c, e in other.singular)
        return SampledFunction(self.grid, self.values + sign * _vals(other, self.grid), singular=terms)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, c):
        c = float(c)
        return SampledFunction(self.grid, self.values * c, self.holder_hint,
                               singular=tuple((c * k, e) for k, e in self.singular))

    __rmul__ = __mul__

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "value"])
            for t, v in zip(self.grid.times, self.values):
                writer.writerow([repr(float(t)), repr(float(v))])

    @classmethod
    def from_csv(cls, path) -> "SampledFunction":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(TimeGrid(data[:, 0]), data[:, 1])


def _vals(other, grid):
    if isinstance(other, SampledFunction):
        if other.grid != grid:
            raise ValueError("sampled functions live on different grids")
        return other.values
    return float(other)


@dataclass(frozen=True)
class FracParams:
    """Order ``alpha`` in the window ``1 - H < alpha < 1/2``."""

    alpha: float
    h: HurstIndex

    def __post_init__(self):
        h = HurstIndex.of(self.h)
        object.__setattr__(self, "h", h)
        if not 1.0 - h.h < self.alpha < 0.5:
            raise ValueError(f"alpha={self.alpha} outside the window (1-H, 1/2) = ({1 - h.h:g}, 0.5)")

    @classmethod
    def default(cls, h) -> "FracParams":
        """Midpoint ``(3 - 2H)/4`` of the window."""
        H = HurstIndex.of(h).h
        return cls((3.0 - 2.0 * H) / 4.0, H)


def _check_order(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"order must lie in (0, 1), got {alpha}")


# ------------------------------------------------------------------ kernels


def _pow(u, e):
    with np.errstate(divide="ignore"):
        return np.where(u > 0, np.abs(u) ** e, 0.0)


def _lin_moments(u_lo, u_hi, gamma):
    """``J0 = int u^{-gamma-1}``, ``J1 = int u^{-gamma}`` over ``[u_lo, u_hi]``.

    For ``gamma > 0`` ``J0`` is set to 0 on cells touching ``u = 0``; callers
    guarantee the constant part vanishes there.
    """
    if gamma > 0:
        j0 = np.where(u_lo > 0, (_pow(u_lo, -gamma) - _pow(u_hi, -gamma)) / gamma, 0.0)
    else:
        j0 = (u_hi ** (-gamma) - u_lo ** (-gamma)) / (-gamma)
    j1 = (_pow(u_hi, 1.0 - gamma) - _pow(u_lo, 1.0 - gamma)) / (1.0 - gamma)
    return j0, j1


def _lin_integral(p, q, u_lo, u_hi, gamma, absolute=False):
    """``int_{u_lo}^{u_hi} (p + q u) u^{-gamma-1} du``, optionally of ``|p + q u|``."""
    j0, j1 = _lin_moments(u_lo, u_hi, gamma)
    total = p * j0 + q * j1
    if not absolute:
        return total
    with np.errstate(divide="ignore", invalid="ignore"):
        root = np.where(q != 0, -p / q, -1.0)
    split = (root > u_lo) & (root < u_hi)
    if not np.any(split):
        return np.abs(total)
    r = np.where(split, root, u_hi)
    a0, a1 = _lin_moments(u_lo, r, gamma)
    first = p * a0 + q * a1
    second = total - first
    return np.where(split, np.abs(first) + np.abs(second), np.abs(total))


def _cell_moments(m, h, gamma):
    """Moments over lag cells ``[(m-1)h, mh]`` for a uniform grid."""
    m = np.asarray(m, dtype=float)
    return _lin_moments((m - 1.0) * h, m * h, gamma)


# --------------------------------------------------- Riemann-Liouville parts


def _rl_point(t, f, alpha, x):
    cells = t[:-1] < x
    lo = t[:-1][cells]
    hi = np.minimum(t[1:][cells], x)
    slope = (np.diff(f) / np.diff(t))[cells]
    far = x - lo
    near = x - hi
    # f(y) = f_j + s_j (far - u) with u = x - y
    k0 = (far**alpha - near**alpha) / alpha
    k1 = (far ** (alpha + 1.0) - near ** (alpha + 1.0)) / (alpha + 1.0)
    val = np.sum((f[:-1][cells] + slope * far) * k0 - slope * k1)
    return float(val / special.gamma(alpha))


def rl_integral_left(f: SampledFunction, alpha: float, x: float) -> float:
    """``I^alpha_{a+} f(x) = 1/Gamma(alpha) int_a^x f(y) (x-y)^{alpha-1} dy``.

    Exact for the piecewise-linear interpolant; ``x`` may lie between nodes.
    ``alpha = 1`` gives the ordinary integral.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    t = f.grid.times
    if not t[0] <= x <= t[-1]:
        raise ValueError("x outside the grid range")
    return _rl_point(t, f.values, alpha, float(x))


def rl_integral_right(f: SampledFunction, alpha: float, x: float) -> float:
    """``I^alpha_{b-} f(x) = 1/Gamma(alpha) int_x^b f(y) (y-x)^{alpha-1} dy``."""
    r = f.reflected()
    return rl_integral_left(r, alpha, f.grid.times[-1] + f.grid.times[0] - x)


def rl_integral_left_all(f: SampledFunction, alpha: float) -> SampledFunction:
    """``I^alpha_{a+} f`` at every grid node (FFT convolution on uniform grids)."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    g = f.grid
    t, v = g.times, f.values
    if g.is_uniform():
        h = g.steps[0]
        m = np.arange(1, g.n + 1, dtype=float)
        k0 = h**alpha * (m**alpha - (m - 1.0) ** alpha) / alpha
        k1 = h ** (alpha + 1.0) * (m ** (alpha + 1.0) - (m - 1.0) ** (alpha + 1.0)) / (alpha + 1.0)
        s = np.diff(v) / h
        # cell j at lag m = k - j: (f_j + s_j m h) k0(m) - s_j k1(m)
        conv = signal.fftconvolve(v[:-1], k0)[: g.n] + signal.fftconvolve(s, m * h * k0 - k1)[: g.n]
        out = np.r_[0.0, conv] / special.gamma(alpha)
    else:
        out = np.array([0.0] + [_rl_point(t, v, alpha, x) for x in t[1:]])
    # I^alpha of the constant f(a) is f(a) (x-a)^alpha / Gamma(1+alpha); the
    # rest behaves like (x-a)^{1+alpha} and interpolates well
    terms = ((v[0] / special.gamma(1.0 + alpha), alpha),) if v[0] != 0 else ()
    return SampledFunction(g, out, singular=terms)


# ------------------------------------------------------- Weyl derivatives


def _marchaud_sum(t, F, gamma):
    """``F(x)/(x-a)^gamma + gamma int_a^x (F(x)-F(y))/(x-y)^{gamma+1} dy`` at every node.

    ``F`` must vanish at ``a``.  Returns the bracket without the Gamma factor.
    """
    n = t.size - 1
    out = np.zeros(n + 1)
    steps = np.diff(t)
    s = np.diff(F) / steps
    span = t[1:] - t[0]
    out[1:] = F[1:] / span**gamma
    uniform = np.allclose(steps, steps[0], rtol=1e-10, atol=0.0)
    if uniform:
        h = steps[0]
        m = np.arange(1, n + 1, dtype=float)
        j0, j1 = _cell_moments(m, h, gamma)
        # cell j at lag m = k - j: p = F_k - F_j - s_j m h, q = s_j
        total_j0 = np.cumsum(j0)
        conv_f = signal.fftconvolve(F[:-1], j0)[:n]
        conv_s = signal.fftconvolve(s, m * h * j0)[:n]
        conv_q = signal.fftconvolve(s, j1)[:n]
        integral = F[1:] * total_j0 - conv_f - conv_s + conv_q
    else:
        integral = np.zeros(n)
        for k0 in range(1, n + 1, _ROW_CHUNK):
            k1 = min(k0 + _ROW_CHUNK, n + 1)
            x = t[k0:k1, None]
            far = x - t[None, :-1]
            near = np.maximum(x - t[None, 1:], 0.0)
            inside = far > 0
            p = F[k0:k1, None] - F[None, :-1] - s[None, :] * far
            val = _lin_integral(np.where(near > 0, p, 0.0), s[None, :], near, far, gamma)
            integral[k0 - 1 : k1 - 1] = np.where(inside, val, 0.0).sum(axis=1)
    out[1:] += gamma * integral
    return out


def singular_decay_exponent(values, times, order: float) -> float:
    """Decay exponent of the singular Marchaud integrand near the diagonal.

    The mean increment ``mean_k |F_{k+L} - F_k|`` over the lags ``L`` in
    :data:`_DECAY_LAGS` is regressed on ``L`` in log-log scale; its slope
    ``lambda`` is the sample's Hölder scaling.  The integrand
    ``|F(x) - F(y)| |x - y|^{-order-1}`` is then integrable under refinement
    iff ``lambda - order > 0``, which is the returned value.
    """
    v = np.asarray(values, dtype=float)
    t = np.asarray(times, dtype=float)
    n = v.size - 1
    lags = [L for L in _DECAY_LAGS if 4 * L <= n]
    if len(lags) < 2:
        return math.inf
    h = (t[-1] - t[0]) / n
    means = np.array([np.mean(np.abs(v[L:] - v[:-L])) for L in lags])
    if np.all(means == 0):
        return math.inf
    if np.any(means == 0):
        return -math.inf
    slope = np.polyfit(np.log(np.asarray(lags) * h), np.log(means), 1)[0]
    return float(slope - order)


def _centered(f: SampledFunction) -> np.ndarray:
    return f.values - f.values[0]


def weyl_left(f: SampledFunction, alpha: float) -> SampledFunction:
    """``D^alpha_{a+} f_{a+}`` at every node, with ``f_{a+} = f - f(a)``.

    ``D f(x) = 1/Gamma(1-alpha) [f(x)/(x-a)^alpha
    + alpha int_a^x (f(x)-f(y))/(x-y)^{alpha+1} dy]``; the value at ``a`` is
    set to its limit 0.  The output carries the admissibility flag of
    :func:`singular_decay_exponent`.

    Declared singular terms ``c (x-a)^e`` are differentiated exactly,
    ``c Gamma(e+1)/Gamma(e+1-alpha) (x-a)^{e-alpha}``, and the remainder by
    product integration.  At ``a`` a term with ``e = alpha`` contributes
    its finite limit; for ``e < alpha`` the result is unbounded there and
    the node value omits the term.
    """
    _check_order(alpha)
    F = _centered(f)
    t = f.grid.times
    rest = F - f.singular_part()
    out = _marchaud_sum(t, rest, alpha) / special.gamma(1.0 - alpha)
    u = t[1:] - t[0]
    for c, e in f.singular:
        scale = c * special.gamma(e + 1.0) / special.gamma(e + 1.0 - alpha)
        out[1:] += scale * u ** (e - alpha)
        if math.isclose(e, alpha):
            out[0] += scale
    expo = singular_decay_exponent(F, f.grid.times, alpha)
    return SampledFunction(f.grid, out, None, bool(expo > ADMISSIBLE_EXPONENT), expo)


def weyl_right(g: SampledFunction, one_minus_alpha: float) -> SampledFunction:
    """Real Marchaud form of ``D^{1-alpha}_{b-} g_{b-}`` at every node.

    ``1/Gamma(alpha) [(g(x)-g(b))/(b-x)^{1-alpha}
    + (1-alpha) int_x^b (g(x)-g(y))/(y-x)^{2-alpha} dy]``, computed as the
    left form of the reflected function.
    """
    beta = float(one_minus_alpha)
    _check_order(beta)
    r = g.reflected()
    F = _centered(r)
    out = _marchaud_sum(r.grid.times, F, beta)[::-1] / special.gamma(1.0 - beta)
    expo = singular_decay_exponent(F, r.grid.times, beta)
    return SampledFunction(g.grid, out, None, bool(expo > ADMISSIBLE_EXPONENT), expo)


def _trapezoid(y, t):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


def _refine(f: SampledFunction, r: int) -> SampledFunction:
    """Same interpolant on a grid with ``r`` equal sub-cells per cell."""
    t = f.grid.times
    u = np.arange(r) / r
    tt = np.append((t[:-1, None] + np.diff(t)[:, None] * u).ravel(), t[-1])
    return SampledFunction(TimeGrid(tt), np.interp(tt, t, f.values), f.holder_hint)


def _outer(f, g, alpha, r):
    if r > 1:
        f, g = _refine(f, r), _refine(g, r)
    return -_trapezoid(weyl_left(f, alpha).values * weyl_right(g, 1.0 - alpha).values, f.grid.times)


def _aitken(v0, v1, v2):
    d1, d2 = v1 - v0, v2 - v1
    # geometric error decay is required; otherwise keep the finest value
    if d1 == 0.0 or not 0.0 < d2 / d1 < 0.9:
        return v2
    return v2 - d2 * d2 / (d2 - d1)


def gls_integral(
    f: SampledFunction, g: SampledFunction, params: FracParams | float, oversample=(2, 4, 8)
) -> float:
    """Generalized Lebesgue-Stieltjes integral ``int_a^b f dg``.

    ``params`` is a :class:`FracParams` or a bare order ``alpha``.  Raises
    :class:`AdmissibilityError` when ``f`` fails the ``||.||_{alpha,1}`` test
    or ``g`` the ``||.||_{1-alpha,infty}`` test.

    The fractional derivatives of the interpolants have cusps of order
    ``|x - t_k|^{1-alpha}`` at every node, which limits a node-only
    trapezoid to roughly ``O(N^{-(1-alpha)})`` accuracy on rough paths.
    ``oversample`` lists three sub-cell factors; the outer trapezoid is
    evaluated on each refined grid (same interpolants) and combined by
    Aitken extrapolation.  Pass ``oversample=None`` for the plain rule.
    """
    alpha = params.alpha if isinstance(params, FracParams) else float(params)
    _check_order(alpha)
    if f.grid != g.grid:
        raise ValueError("f and g live on different grids")
    df = weyl_left(f, alpha)
    if not df.admissible:
        raise AdmissibilityError(
            f"||f||_(alpha,1) diverges: decay exponent {df.decay_exponent:.3g} at alpha={alpha}"
        )
    dg = weyl_right(g, 1.0 - alpha)
    if not dg.admissible:
        raise AdmissibilityError(
            f"||g||_(1-alpha,inf) diverges: decay exponent {dg.decay_exponent:.3g} at 1-alpha={1 - alpha}"
        )
    if oversample is None:
        inner = -_trapezoid(df.values * dg.values, f.grid.times)
    else:
        levels = [int(r) for r in oversample]
        if len(levels) != 3 or min(levels) < 1:
            raise ValueError("oversample needs three positive factors")
        inner = _aitken(*(_outer(f, g, alpha, r) for r in levels))
    return inner + float(f.values[0] * (g.values[-1] - g.values[0]))


def riemann_stieltjes(f: SampledFunction, g: SampledFunction) -> float:
    """Left-point sum ``sum_k f(t_k) (g(t_{k+1}) - g(t_k))``."""
    if f.grid != g.grid:
        raise ValueError("f and g live on different grids")
    return float(np.sum(f.values[:-1] * np.diff(g.values)))


# ------------------------------------------------------------------ norms


def _row_integrals(t, v, i, gamma, absolute):
    """Cumulative ``int_{t_i}^{t_k} (v(y) - v(t_i)) (y - t_i)^{-gamma-1} dy`` for ``k > i``."""
    lo = t[i:-1] - t[i]
    hi = t[i + 1 :] - t[i]
    s = np.diff(v[i:]) / np.diff(t[i:])
    # v(y) - v_i = (v_j - v_i - s_j lo_j) + s_j u on cell j
    p = v[i:-1] - v[i] - s * lo
    p[0] = 0.0
    return np.cumsum(_lin_integral(p, s, lo, hi, gamma, absolute))


def norm_alpha_1(f: SampledFunction, alpha: float) -> float:
    """``int_0^T |f(s)|/s^alpha ds + int_0^T int_0^s |f(s)-f(y)|/(s-y)^{alpha+1} dy ds``.

    The first term and the inner integrals are exact for the interpolant;
    the outer integral is trapezoidal.  Returns :data:`DIVERGENT` when the
    decay test fails.
    """
    _check_order(alpha)
    t, v = f.grid.times, f.values
    if np.all(v == 0):
        return 0.0
    if singular_decay_exponent(v, t, alpha) <= ADMISSIBLE_EXPONENT:
        return DIVERGENT
    s = f.slopes
    # |f(y)| on cell j as |p + q u| with u = y - t_0, weight u^{-alpha}
    lo, hi = t[:-1] - t[0], t[1:] - t[0]
    first = np.sum(_lin_integral(v[:-1] - s * lo, s, lo, hi, alpha - 1.0, absolute=True))
    inner = _abs_left_integrals(t, v, alpha)
    return float(first + _trapezoid(inner, t))


def _abs_left_integrals(t, v, alpha):
    """``int_0^{t_k} |v(t_k) - v(y)| (t_k - y)^{-alpha-1} dy`` at every node."""
    n = t.size - 1
    out = np.zeros(n + 1)
    s = np.diff(v) / np.diff(t)
    for k0 in range(1, n + 1, _ROW_CHUNK):
        k1 = min(k0 + _ROW_CHUNK, n + 1)
        x = t[k0:k1, None]
        far = x - t[None, :-1]
        near = np.maximum(x - t[None, 1:], 0.0)
        # v(x) - v(y) = (v_k - v_j - s_j far) + s_j u
        p = np.where(near > 0, v[k0:k1, None] - v[None, :-1] - s[None, :] * far, 0.0)
        val = _lin_integral(p, s[None, :], near, far, alpha, absolute=True)
        out[k0:k1] = np.where(far > 0, val, 0.0).sum(axis=1)
    return out


def norm_alpha_inf(f: SampledFunction, alpha: float) -> float:
    """``sup_t (|f(t)| + int_0^t |f(t)-f(s)|/(t-s)^{alpha+1} ds)`` over grid nodes."""
    _check_order(alpha)
    t, v = f.grid.times, f.values
    if np.all(v == 0):
        return 0.0
    if singular_decay_exponent(v, t, alpha) <= ADMISSIBLE_EXPONENT:
        return DIVERGENT
    return float(np.max(np.abs(v) + _abs_left_integrals(t, v, alpha)))


def norm_one_minus_alpha_inf(g: SampledFunction, alpha: float) -> float:
    """``sup_{s<t} |g(t)-g(s)|/(t-s)^{1-alpha} + int_s^t |g(y)-g(s)|/(y-s)^{2-alpha} dy``.

    The supremum runs over grid pairs; cumulative sums keep the cost O(N^2).
    """
    _check_order(alpha)
    beta = 1.0 - alpha
    t, v = g.grid.times, g.values
    if np.all(v == v[0]):
        return 0.0
    if singular_decay_exponent(v, t, beta) <= ADMISSIBLE_EXPONENT:
        return DIVERGENT
    best = 0.0
    for i in range(t.size - 1):
        gap = t[i + 1 :] - t[i]
        val = np.abs(v[i + 1 :] - v[i]) / gap**beta + _row_integrals(t, v, i, beta, True)
        best = max(best, float(val.max()))
    return best


def g_tilde_profile(path: SampledFunction, alpha: float) -> np.ndarray:
    """``|D^{1-alpha}_{t-} g_{t-}(s)|`` for all grid pairs, as an (N+1, N+1) array (s row, t column)."""
    _check_order(alpha)
    beta = 1.0 - alpha
    t, v = path.grid.times, path.values
    n = t.size
    out = np.zeros((n, n))
    for i in range(n - 1):
        gap = t[i + 1 :] - t[i]
        # real right Marchaud form at s = t_i with endpoint t_k
        val = (v[i] - v[i + 1 :]) / gap**beta - beta * _row_integrals(t, v, i, beta, False)
        out[i, i + 1 :] = np.abs(val) / special.gamma(alpha)
    return out


def g_tilde(path: SampledFunction, alpha: float) -> float:
    """``1/Gamma(1-alpha) sup_{s<t} |D^{1-alpha}_{t-} g_{t-}(s)|`` over grid pairs."""
    _check_order(alpha)
    beta = 1.0 - alpha
    t, v = path.grid.times, path.values
    if np.all(v == v[0]):
        return 0.0
    if singular_decay_exponent(v, t, beta) <= ADMISSIBLE_EXPONENT:
        return DIVERGENT
    best = 0.0
    for i in range(t.size - 1):
        gap = t[i + 1 :] - t[i]
        val = (v[i] - v[i + 1 :]) / gap**beta - beta * _row_integrals(t, v, i, beta, False)
        best = max(best, float(np.abs(val).max()))
    return best / (special.gamma(alpha) * special.gamma(1.0 - alpha))
