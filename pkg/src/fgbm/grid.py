"""Time grids shared by the simulators, kernels and path statistics."""

from __future__ import annotations

import numpy as np

_ON_GRID_TOL = 1e-12


class TimeGrid:
    """Strictly increasing partition ``0 = t_0 < t_1 < ... < t_N = T``.

    The grid is immutable; ``times`` is a read-only float array.
    """

    __slots__ = ("_times",)

    def __init__(self, times):
        times = np.array(times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("a time grid needs at least two points")
        if times[0] != 0.0:
            raise ValueError(f"a time grid must start at 0, got t_0={times[0]!r}")
        if not np.all(np.diff(times) > 0):
            raise ValueError("time grid must be strictly increasing")
        if not np.all(np.isfinite(times)):
            raise ValueError("time grid contains non-finite points")
        times.setflags(write=False)
        self._times = times

    @classmethod
    def uniform(cls, n: int, horizon: float = 1.0) -> "TimeGrid":
        if n < 1:
            raise ValueError("need at least one cell")
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        times = np.arange(n + 1, dtype=float) * (horizon / n)
        times[-1] = horizon
        return cls(times)

    @property
    def times(self) -> np.ndarray:
        return self._times

    @property
    def n(self) -> int:
        """Number of cells."""
        return self._times.size - 1

    @property
    def horizon(self) -> float:
        return float(self._times[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self._times)

    @property
    def mesh(self) -> float:
        return float(self.steps.max())

    def is_uniform(self, rtol: float = 1e-10) -> bool:
        steps = self.steps
        return bool(np.allclose(steps, steps[0], rtol=rtol, atol=0.0))

    def index_of(self, t: float) -> int:
        """Index of grid point ``t``; off-grid times raise ``ValueError``."""
        k = int(np.searchsorted(self._times, t))
        for cand in (k - 1, k):
            if 0 <= cand < self._times.size:
                if abs(self._times[cand] - t) <= _ON_GRID_TOL * max(1.0, abs(t)):
                    return cand
        raise ValueError(f"time {t!r} is not a grid point")

    def coarsen(self, factor: int) -> "TimeGrid":
        """Every ``factor``-th point; ``factor`` must divide the cell count."""
        if factor < 1 or self.n % factor:
            raise ValueError(f"factor {factor} does not divide {self.n} cells")
        return TimeGrid(self._times[::factor])

    def __len__(self) -> int:
        return self._times.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return self._times.shape == other._times.shape and bool(
            np.array_equal(self._times, other._times)
        )

    def __hash__(self) -> int:
        return hash(self._times.tobytes())

    def __repr__(self) -> str:
        return f"TimeGrid(n={self.n}, horizon={self.horizon:g})"
