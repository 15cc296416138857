"""Time grids on the half-line and sampled functions living on them."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

SAMPLING_MODES = ("linear", "log")


def vector_norm(x, axis=-1) -> np.ndarray:
    """Euclidean norm that does not overflow for entries near the float limit."""
    x = np.asarray(x, dtype=float)
    scale = np.max(np.abs(x), axis=axis, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    with np.errstate(invalid="ignore", over="ignore"):
        out = np.squeeze(scale, axis=axis) * np.sqrt(np.sum((x / safe) ** 2, axis=axis))
    return out


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Uniform function nodes on ``[0, T_max]`` plus optional sup-only nodes.

    ``points`` carry function values. ``ext`` holds extra nodes in
    ``(T_max, T_sup]`` that only enter look-ahead suprema; they are either
    linearly spaced with the same step or log-spaced (``sampling="log"``).
    """

    points: np.ndarray
    ext: np.ndarray = field(default_factory=lambda: np.empty(0))
    sampling: str = "linear"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        ext = np.asarray(self.ext, dtype=float)
        if pts.ndim != 1 or pts.size < 1:
            raise DomainError("grid needs at least one node")
        if pts[0] != 0.0:
            raise DomainError("grid must start at 0")
        if np.any(np.diff(pts) <= 0) or (ext.size and (ext[0] <= pts[-1] or np.any(np.diff(ext) <= 0))):
            raise DomainError("grid points must be strictly increasing")
        if self.sampling not in SAMPLING_MODES:
            raise DomainError(f"unknown sampling mode {self.sampling!r}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "ext", ext)
        object.__setattr__(self, "all_points", np.concatenate([pts, ext]))

    @classmethod
    def uniform(cls, T_max, h, T_sup=None, sampling="linear", log_points=4000):
        if not h > 0:
            raise DomainError("step h must be positive")
        if T_max < 0:
            raise DomainError("T_max must be nonnegative")
        n = int(round(T_max / h))
        if n == 0:
            pts = np.zeros(1)
        else:
            pts = np.arange(n + 1) * (T_max / n)
            pts[-1] = T_max
        T_sup = T_max if T_sup is None else float(T_sup)
        if T_sup < T_max:
            raise DomainError("T_sup must be >= T_max")
        ext = np.empty(0)
        if T_sup > T_max:
            if sampling == "log":
                ext = np.geomspace(T_max, T_sup, log_points + 1)[1:]
            else:
                step = pts[1] - pts[0] if n else h
                m = int(np.ceil((T_sup - T_max) / step - 1e-9))
                ext = T_max + step * np.arange(1, m + 1)
                ext[-1] = T_sup
        return cls(pts, ext, sampling)

    @property
    def T_max(self) -> float:
        return float(self.points[-1])

    @property
    def T_sup(self) -> float:
        return float(self.all_points[-1])

    @property
    def nf(self) -> int:
        """Number of function nodes."""
        return self.points.size

    @property
    def h(self) -> float:
        """Uniform step of the function nodes (0 for a one-node grid)."""
        if self.points.size < 2:
            return 0.0
        return float(self.points[1] - self.points[0])

    def index(self, t, tol=1e-9) -> int:
        """Index of the function node equal to ``t``; off-grid is an error."""
        i, err = self.snap(t)
        if err > tol * max(1.0, self.h):
            raise DomainError(f"t={t} is not a grid node")
        return i

    def snap(self, t):
        """Nearest function node to ``t`` and the snapping error."""
        if not (0 <= t <= self.T_max * (1 + 1e-12) + 1e-12):
            raise DomainError(f"t={t} outside [0, {self.T_max}]")
        i = int(np.clip(np.searchsorted(self.points, t), 1, self.nf - 1)) if self.nf > 1 else 0
        if self.nf > 1 and abs(self.points[i - 1] - t) <= abs(self.points[i] - t):
            i -= 1
        return i, abs(float(self.points[i]) - t)

    def steps_for(self, t) -> int:
        """Shift ``t`` expressed as a whole number of steps."""
        if t == 0:
            return 0
        if self.h == 0:
            raise DomainError("cannot shift on a one-node grid")
        k = int(round(t / self.h))
        if abs(k * self.h - t) > 1e-9 * max(1.0, t):
            raise DomainError(f"shift {t} is not a multiple of the grid step {self.h}")
        return k

    def refine(self) -> "TimeGrid":
        """Same horizon and sup extension at half the step."""
        pts = np.empty(2 * self.nf - 1)
        pts[0::2] = self.points
        pts[1::2] = 0.5 * (self.points[:-1] + self.points[1:])
        ext = self.ext
        if ext.size and self.sampling == "linear":
            e = np.concatenate([[self.T_max], ext])
            mids = 0.5 * (e[:-1] + e[1:])
            ext = np.sort(np.concatenate([mids, ext]))
        return TimeGrid(pts, ext, self.sampling)

    def same_as(self, other: "TimeGrid") -> bool:
        return self is other or (
            self.points.shape == other.points.shape
            and np.array_equal(self.all_points, other.all_points)
        )


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A function ``[0, T_max] -> R^n`` stored by node values.

    Between nodes the function is the piecewise-linear interpolant.
    """

    grid: TimeGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.nf:
            raise DomainError("values length does not match grid")
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid, dim=1):
        return cls(grid, np.zeros((grid.nf, dim)))

    @classmethod
    def from_callable(cls, grid, fn, dim=None):
        vals = np.asarray(fn(grid.points), dtype=float)
        if vals.ndim == 1 and dim not in (None, 1):
            raise DomainError("callable returned scalar values for a vector function")
        return cls(grid, vals)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def t(self) -> np.ndarray:
        return self.grid.points

    def norms(self) -> np.ndarray:
        return vector_norm(self.values, axis=1)

    def interp(self, t) -> np.ndarray:
        if not (0 <= t <= self.grid.T_max):
            raise DomainError(f"t={t} outside [0, {self.grid.T_max}]")
        return np.array([np.interp(t, self.t, self.values[:, k]) for k in range(self.dim)])

    def _check(self, other):
        if not self.grid.same_as(other.grid):
            raise DomainError("grid mismatch")
        if self.dim != other.dim:
            raise DomainError("dimension mismatch")

    def __add__(self, other):
        self._check(other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, a):
        return GridFunction(self.grid, self.values * float(a))

    __rmul__ = __mul__

    def truncated_after(self, t) -> "GridFunction":
        """Copy that vanishes on nodes strictly beyond ``t``."""
        v = self.values.copy()
        v[self.t > t] = 0.0
        return GridFunction(self.grid, v)

    def to_csv(self, path, index_label="t"):
        write_csv(path, [index_label] + [f"v{k}" for k in range(self.dim)],
                  np.column_stack([self.t, self.values]))


def fmt(x) -> str:
    """Full double precision, 17 significant digits."""
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else fmt(c) for c in row])
