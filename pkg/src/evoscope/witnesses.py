"""Special grid functions: cutoffs, stability witnesses and random bumps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, DegenerateInputError, DomainError
from .family import propagate_rows
from .grid import GridFunction, TimeGrid


def theta(n) -> float:
    """Ramp width ``ln(e^n / (e^n - 1))`` of the n-th cutoff."""
    return -math.log1p(-math.exp(-n))


@dataclass(frozen=True)
class PlateauSpec:
    rise_start: float
    rise_width: float
    fall_start: float
    fall_width: float

    def __post_init__(self):
        if self.rise_width <= 0 or self.fall_width <= 0:
            raise DomainError("ramp widths must be positive")
        if self.rise_start < 0:
            raise DomainError("rise_start must be nonnegative")
        if self.rise_start + self.rise_width > self.fall_start + 1e-12:
            raise DomainError("need rise_start + rise_width <= fall_start")

    @property
    def end(self):
        return self.fall_start + self.fall_width

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        up = np.clip((t - self.rise_start) / self.rise_width, 0.0, 1.0)
        down = np.clip((self.end - t) / self.fall_width, 0.0, 1.0)
        return np.minimum(up, down)


def make_plateau(spec: PlateauSpec, grid: TimeGrid) -> GridFunction:
    if spec.end > grid.T_max * (1 + 1e-12):
        raise DomainError("plateau extends beyond the horizon")
    return GridFunction(grid, spec(grid.points))


def witness_cutoff(s, n) -> PlateauSpec:
    th = theta(n)
    return PlateauSpec(s, th, n, th)


def _transport(family, grid, s, x):
    """``U(xi, s) x`` on function nodes; zero for ``xi < s``."""
    i, err = grid.snap(s)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (family.dim,):
        raise DomainError("direction has the wrong dimension")
    cache = propagate_rows(family, grid)
    vals = np.zeros((grid.nf, family.dim))
    vals[i:] = cache.apply_row(i, x)[: grid.nf - i]
    return vals, i, err


def make_witness_f(family, alpha, s, x, n, grid) -> GridFunction:
    """``alpha_n(xi) exp(-alpha (xi - s)) U(xi, s) x`` with the n-th cutoff."""
    i, err = grid.snap(s)
    s = float(grid.points[i])
    cut = witness_cutoff(s, n)
    if s + theta(n) > n or cut.end > grid.T_max:
        raise DomainError(f"horizon too short or n too small for s={s}, n={n}")
    vals, _, _ = _transport(family, grid, s, x)
    w = cut(grid.points) * np.exp(-alpha * np.clip(grid.points - s, 0, None))
    return GridFunction(grid, w[:, None] * vals, {"s": s, "n": n, "snap_error": err})


def make_witness_g(family, s, x, k, n, grid) -> GridFunction:
    """``alpha_n(xi) (xi - s)^k U(xi, s) x``."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    i, err = grid.snap(s)
    s = float(grid.points[i])
    cut = witness_cutoff(s, n)
    if s + theta(n) > n or cut.end > grid.T_max:
        raise DomainError(f"horizon too short or n too small for s={s}, n={n}")
    vals, _, _ = _transport(family, grid, s, x)
    w = cut(grid.points) * np.clip(grid.points - s, 0, None) ** k
    return GridFunction(grid, w[:, None] * vals, {"s": s, "n": n, "k": k, "snap_error": err})


def make_u_tilde(family, nu, s, x, grid) -> GridFunction:
    """``x`` on ``[0, s]`` and ``exp(nu (xi - s)) U(xi, s) x`` afterwards."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.any(x):
        raise DegenerateInputError("x must be nonzero")
    vals, i, err = _transport(family, grid, s, x)
    s = float(grid.points[i])
    vals[i:] *= np.exp(nu * (grid.points[i:] - s))[:, None]
    vals[:i] = x
    return GridFunction(grid, vals, {"s": s, "nu": nu, "snap_error": err})


@dataclass(frozen=True)
class PsiProfile:
    """C^1 profile: 0, quadratic patch, tangent line, then ``exp((t-s)/n)``."""

    n: float
    s: float
    t_n: float

    def __post_init__(self):
        if not self.s + self.n < self.t_n < self.s + 2 * self.n:
            raise ConstructionError(
                "patch needs t_n in (s + n, s + 2n) so that delta_n lies in (0, t_n - s)"
            )

    @property
    def K(self):
        return math.exp((self.t_n - self.s) / self.n)

    @property
    def delta(self):
        # value and slope matching of a (t-s)^2 against the tangent line at s+delta
        return 2.0 * (self.t_n - self.s - self.n)

    @property
    def a(self):
        return self.K / (2.0 * self.n * self.delta)

    def coefficients(self):
        """``(a_n, b_n, c_n)`` of the patch written as ``a t^2 + b t + c``."""
        a, s = self.a, self.s
        return a, -2 * a * s, a * s * s

    def value(self, t):
        t = np.asarray(t, dtype=float)
        n, s, tn, K = self.n, self.s, self.t_n, self.K
        out = np.zeros_like(t)
        patch = (t > s) & (t <= s + self.delta)
        line = (t > s + self.delta) & (t <= tn)
        tail = t > tn
        out[patch] = self.a * (t[patch] - s) ** 2
        out[line] = K * (1 + (t[line] - tn) / n)
        out[tail] = np.exp((t[tail] - s) / n)
        return out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        n, s, tn, K = self.n, self.s, self.t_n, self.K
        out = np.zeros_like(t)
        patch = (t > s) & (t <= s + self.delta)
        line = (t > s + self.delta) & (t <= tn)
        tail = t > tn
        out[patch] = 2 * self.a * (t[patch] - s)
        out[line] = K / n
        out[tail] = np.exp((t[tail] - s) / n) / n
        return out


def make_psi_ratio_witness(family, alpha, n, s_n, x_n, t_n, grid):
    """Pair ``(u_n, f_n)`` with ``u_n = psi U(., s_n) x_n`` and ``f_n = psi' U(., s_n) x_n``.

    ``u_n`` solves the generator equation with right-hand side ``-f_n``; its
    admissible norm is ``n`` times that of ``f_n`` when ``t_n`` sits before the
    maximizer of ``phi(., u_tilde)``. ``alpha`` is carried as metadata.
    """
    x_n = np.atleast_1d(np.asarray(x_n, dtype=float))
    if not np.any(x_n):
        raise DegenerateInputError("x_n must be nonzero")
    i, err = grid.snap(s_n)
    s = float(grid.points[i])
    j, err_t = grid.snap(t_n)
    psi = PsiProfile(float(n), s, float(grid.points[j]))
    vals, _, _ = _transport(family, grid, s, x_n)
    t = grid.points
    meta = {"s": s, "t_n": psi.t_n, "n": n, "alpha": alpha, "psi": psi,
            "snap_error": max(err, err_t)}
    u = GridFunction(grid, psi.value(t)[:, None] * vals, meta)
    f = GridFunction(grid, psi.derivative(t)[:, None] * vals, meta)
    return u, f


def scale_truncate(u: GridFunction, plateau: GridFunction) -> GridFunction:
    if not u.grid.same_as(plateau.grid):
        raise DomainError("grid mismatch")
    if plateau.dim != 1:
        raise DomainError("plateau must be scalar")
    return GridFunction(u.grid, plateau.values * u.values)


def triangle_bump(grid, center, half_width, x=1.0) -> GridFunction:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = np.clip(1.0 - np.abs(grid.points - center) / half_width, 0.0, None)
    return GridFunction(grid, w[:, None] * x)


def random_bumps(grid, dim, count, seed=0x5EED, t_lo=None, t_hi=None, max_width=None):
    """Seeded trapezoid bumps vanishing at 0 with compact support inside the horizon."""
    rng = np.random.default_rng(seed)
    t_lo = grid.h if t_lo is None else t_lo
    t_hi = grid.T_max if t_hi is None else t_hi
    span = t_hi - t_lo
    max_width = span / 2 if max_width is None else max_width
    out = []
    for _ in range(count):
        width = rng.uniform(min(4 * grid.h, max_width), max_width)
        start = rng.uniform(t_lo, max(t_lo, t_hi - width))
        ramp = rng.uniform(0.05, 0.5) * width
        x = rng.standard_normal(dim)
        x *= rng.uniform(0.2, 2.0) / np.linalg.norm(x)
        spec = PlateauSpec(start, ramp, start + width - ramp, ramp)
        out.append(GridFunction(grid, spec(grid.points)[:, None] * x))
    return out
