"""Time partitions and the average-valued projection between them."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp


class TimeGridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Breakpoints ``0 = t_0 < t_1 < ... < t_M = T``; interval m is ``(t_{m-1}, t_m]``."""

    breakpoints: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.breakpoints, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise TimeGridError("a time grid needs at least two breakpoints")
        if t[0] != 0.0:
            raise TimeGridError("time grids start at 0")
        if np.any(np.diff(t) <= 0):
            raise TimeGridError("breakpoints must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "breakpoints", t)

    @classmethod
    def uniform(cls, T: float, steps: int) -> "TimeGrid":
        if steps < 1:
            raise TimeGridError("need at least one time step")
        # (T * k) / M keeps common breakpoints of different grids bit-identical
        t = T * np.arange(steps + 1) / steps
        t[-1] = T
        return cls(t)

    @property
    def T(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def steps(self) -> int:
        return self.breakpoints.size - 1

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def midpoints(self) -> np.ndarray:
        t = self.breakpoints
        return 0.5 * (t[1:] + t[:-1])

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.breakpoints, other.breakpoints)

    def __hash__(self):
        return hash(self.breakpoints.tobytes())

    def refines(self, other: "TimeGrid") -> bool:
        """True if every breakpoint of ``other`` is a breakpoint of ``self``."""
        return bool(np.isin(other.breakpoints, self.breakpoints).all())


@dataclass(frozen=True)
class SpaceTimeTrace:
    """Piecewise constant in time (on ``grid``) and per interface edge.

    ``values[m, e]`` is the edge average on interval m+1 of the grid.
    """

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != self.grid.steps:
            raise TimeGridError(
                f"trace shape {v.shape} does not match {self.grid.steps} time intervals"
            )
        object.__setattr__(self, "values", v)

    @property
    def n_edges(self) -> int:
        return self.values.shape[1]

    def time_integral(self) -> np.ndarray:
        """Per-edge integral over (0, T)."""
        return self.grid.dt @ self.values

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "t_mid", "edge", "value"])
            for m, tm in enumerate(self.grid.midpoints, start=1):
                for e, val in enumerate(self.values[m - 1]):
                    w.writerow([m, f"{tm:.12g}", e, f"{val:.16e}"])


@lru_cache(maxsize=64)
def projection_matrix(source: TimeGrid, target: TimeGrid) -> sp.csr_matrix:
    """Sparse ``(M_target, M_source)`` matrix of the average-valued projection.

    Entry ``(m, l)`` is ``|J_target,m  cap  J_source,l| / dt_target,m``, found
    by a single sweep over the merged breakpoints.
    """
    if abs(source.T - target.T) > 1e-13 * max(source.T, target.T):
        raise TimeGridError(f"time horizons differ: {source.T} vs {target.T}")
    s, t = source.breakpoints, target.breakpoints
    # breakpoints closer than this are the same point (rounding of T * k / M)
    tol = 1e-13 * source.T
    rows, cols, vals = [], [], []
    l = m = 0
    while l < source.steps and m < target.steps:
        lo = max(s[l], t[m])
        hi = min(s[l + 1], t[m + 1])
        overlap = max(hi - lo, 0.0)
        if overlap > tol:
            rows.append(m)
            cols.append(l)
            vals.append(overlap)
        if abs(s[l + 1] - t[m + 1]) <= tol:
            l += 1
            m += 1
        elif s[l + 1] < t[m + 1]:
            l += 1
        else:
            m += 1
    P = sp.coo_matrix((vals, (rows, cols)), shape=(target.steps, source.steps)).tocsr()
    return sp.diags(1.0 / target.dt) @ P


def project(source: SpaceTimeTrace, target_grid: TimeGrid) -> SpaceTimeTrace:
    """Average-valued projection of ``source`` onto ``target_grid``."""
    if source.grid == target_grid:
        return SpaceTimeTrace(target_grid, source.values.copy())
    P = projection_matrix(source.grid, target_grid)
    return SpaceTimeTrace(target_grid, P @ source.values)
