"""Evolution families ``U(t, s)`` on R^n and their evaluation caches.

Every family exposes ``evaluate(t, s)``. Families whose transition has the
form ``U(t, s) = exp(g(s) - g(t)) * I`` additionally expose the potential
``g``; this keeps all look-ahead suprema exact and in the log domain.
"""

from __future__ import annotations

import functools
import math
from abc import ABC, abstractmethod

import numpy as np

from .errors import DomainError, PropagationError
from .grid import TimeGrid, vector_norm

COND_LIMIT = 1e8
SQRT2 = math.sqrt(2.0)


def spectral_norm(m) -> np.ndarray:
    """Largest singular value of a matrix or a stack of matrices."""
    m = np.asarray(m, dtype=float)
    if m.shape[-1] == 1 and m.shape[-2] == 1:
        return np.abs(m[..., 0, 0])
    return np.linalg.norm(m, ord=2, axis=(-2, -1))


def _check_times(t, s):
    if not (np.isfinite(t) and np.isfinite(s)):
        raise DomainError("times must be finite")
    if s < 0:
        raise DomainError(f"s={s} is negative")
    if t < s:
        raise DomainError(f"need t >= s, got t={t}, s={s}")


class EvolutionFamily(ABC):
    dim: int = 1
    horizon: float | None = None

    @abstractmethod
    def evaluate(self, t, s) -> np.ndarray:
        """Transition matrix ``U(t, s)`` for ``t >= s >= 0``."""

    def potential(self, t):
        """``g`` with ``U(t,s) = exp(g(s)-g(t)) I``, or ``None``."""
        return None

    @property
    def has_potential(self) -> bool:
        return False

    def log_norm(self, t, s) -> float:
        return float(np.log(spectral_norm(self.evaluate(t, s))))

    def cocycle_residual(self, t, tau, s) -> float:
        if not (t >= tau >= s >= 0):
            raise DomainError("need t >= tau >= s >= 0")
        lhs = self.evaluate(t, tau) @ self.evaluate(tau, s)
        return float(spectral_norm(lhs - self.evaluate(t, s)))

    def rescale(self, lam) -> "Rescaled":
        return Rescaled(self, lam)

    def _check_horizon(self, t):
        if self.horizon is not None and t > self.horizon * (1 + 1e-12):
            raise DomainError(f"t={t} beyond horizon {self.horizon}")


class PotentialFamily(EvolutionFamily):
    """Scalar-multiple-of-identity families given by a potential ``g``."""

    @property
    def has_potential(self):
        return True

    @abstractmethod
    def potential(self, t):
        ...

    def exponent(self, t, s):
        return self.potential(s) - self.potential(t)

    def evaluate(self, t, s):
        _check_times(t, s)
        self._check_horizon(t)
        return math.exp(self.exponent(t, s)) * np.eye(self.dim)

    def log_norm(self, t, s):
        _check_times(t, s)
        return float(self.exponent(t, s))


class ScalarExponent(EvolutionFamily):
    """``U(t,s) = exp(E(t,s))`` on R.

    Pass ``potential`` when ``E(t,s) = g(s) - g(t)``; the generic ``E`` path
    is kept for exponents without that structure.
    """

    def __init__(self, exponent=None, potential=None, name="scalar"):
        if exponent is None and potential is None:
            raise DomainError("need an exponent or a potential")
        self._E = exponent
        self._g = potential
        self.name = name
        self.dim = 1

    @property
    def has_potential(self):
        return self._g is not None

    def potential(self, t):
        return None if self._g is None else self._g(t)

    def exponent(self, t, s):
        if self._g is not None:
            return self._g(s) - self._g(t)
        return self._E(t, s)

    def evaluate(self, t, s):
        _check_times(t, s)
        return np.array([[math.exp(self.exponent(t, s))]])

    def log_norm(self, t, s):
        _check_times(t, s)
        return float(self.exponent(t, s))

    def __repr__(self):
        return f"ScalarExponent({self.name})"


def example1_potential(t):
    t = np.asarray(t, dtype=float)
    return t * (2.0 + np.sin(t))


def example2_potential(t):
    """``t (sqrt 2 + sin ln t)`` extended by its limit 0 at ``t = 0``."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = t * (SQRT2 + np.sin(np.log(t)))
    return np.where(t > 0, out, 0.0)


def example1() -> ScalarExponent:
    return ScalarExponent(potential=example1_potential, name="scalar_example1")


def example2() -> ScalarExponent:
    return ScalarExponent(potential=example2_potential, name="scalar_example2")


class ConstantDecay(PotentialFamily):
    """``U(t,s) = exp(-rate (t-s)) I_n``."""

    def __init__(self, rate=1.0, dim=1):
        if rate < 0:
            raise DomainError("decay rate must be nonnegative")
        self.rate = float(rate)
        self.dim = int(dim)

    def potential(self, t):
        return self.rate * np.asarray(t, dtype=float)

    def __repr__(self):
        return f"ConstantDecay(rate={self.rate}, dim={self.dim})"


class Rescaled(EvolutionFamily):
    """``U_lam(t,s) = exp(-lam (t-s)) U(t,s)``."""

    def __init__(self, inner: EvolutionFamily, shift):
        if not np.isfinite(shift):
            raise DomainError("shift must be finite")
        self.inner = inner
        self.shift = float(shift)
        self.dim = inner.dim
        self.horizon = inner.horizon

    @property
    def has_potential(self):
        return self.inner.has_potential

    def potential(self, t):
        g = self.inner.potential(t)
        return None if g is None else g + self.shift * np.asarray(t, dtype=float)

    def evaluate(self, t, s):
        _check_times(t, s)
        return math.exp(-self.shift * (t - s)) * self.inner.evaluate(t, s)

    def log_norm(self, t, s):
        return self.inner.log_norm(t, s) - self.shift * (t - s)

    def rescale(self, lam):
        # collapse nested shifts so rescale(rescale(F, a), b) == rescale(F, a+b)
        return Rescaled(self.inner, self.shift + lam)

    def __repr__(self):
        return f"Rescaled({self.inner!r}, {self.shift})"


def rescale(family: EvolutionFamily, lam) -> EvolutionFamily:
    return family.rescale(lam)


def rk4_step_matrix(A, t, h) -> np.ndarray:
    """One classical RK4 step for ``Y' = A(t) Y`` as a propagator matrix."""
    a0 = np.asarray(A(t), dtype=float)
    am = np.asarray(A(t + 0.5 * h), dtype=float)
    a1 = np.asarray(A(t + h), dtype=float)
    eye = np.eye(a0.shape[0])
    k1 = a0
    k2 = am @ (eye + 0.5 * h * k1)
    k3 = am @ (eye + 0.5 * h * k2)
    k4 = a1 @ (eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


BUILTIN_MATRICES = {
    "rotation": lambda t: np.array([[0.0, 1.0], [-1.0, 0.0]]),
    "damped_rotation": lambda t: np.array([[-0.5, 1.0], [-1.0, -0.5]]),
    "periodic_shear": lambda t: np.array([[-0.5, 1.0 + 0.5 * np.sin(t)], [-1.0, -0.5]]),
}


class MatrixODE(EvolutionFamily):
    """Transition matrix of ``x' = A(t) x`` by fixed-step RK4."""

    def __init__(self, coefficient, step=0.01, horizon=None, name="matrix_ode"):
        if isinstance(coefficient, str):
            try:
                coefficient = BUILTIN_MATRICES[coefficient]
            except KeyError:
                raise DomainError(f"unknown built-in matrix {coefficient!r}") from None
        elif not callable(coefficient):
            const = np.asarray(coefficient, dtype=float)
            if const.ndim != 2 or const.shape[0] != const.shape[1]:
                raise DomainError("coefficient table must be square")
            coefficient = lambda t, _c=const: _c  # noqa: E731
        self.A = coefficient
        self.step = float(step)
        if not self.step > 0:
            raise DomainError("integrator step must be positive")
        self.horizon = horizon
        self.name = name
        self.dim = np.asarray(self.A(0.0)).shape[0]

    @property
    def tolerance(self) -> float:
        """Nominal integrator accuracy scale ``step**4``."""
        return self.step ** 4

    def propagate(self, t, s):
        nsteps = max(1, int(math.ceil((t - s) / self.step - 1e-9)))
        h = (t - s) / nsteps
        Y = np.eye(self.dim)
        for k in range(nsteps):
            Y = rk4_step_matrix(self.A, s + k * h, h) @ Y
        if not np.all(np.isfinite(Y)):
            raise PropagationError(f"non-finite transition matrix on [{s}, {t}]")
        return Y

    def evaluate(self, t, s):
        _check_times(t, s)
        self._check_horizon(t)
        if t == s:
            return np.eye(self.dim)
        return self.propagate(t, s)

    def cell_propagators(self, nodes) -> np.ndarray:
        """Propagators over each cell ``[nodes[k], nodes[k+1]]``."""
        out = np.empty((len(nodes) - 1, self.dim, self.dim))
        for k in range(len(nodes) - 1):
            a, b = nodes[k], nodes[k + 1]
            m = max(1, int(math.ceil((b - a) / self.step - 1e-9)))
            hh = (b - a) / m
            P = np.eye(self.dim)
            for j in range(m):
                P = rk4_step_matrix(self.A, a + j * hh, hh) @ P
            out[k] = P
        if not np.all(np.isfinite(out)):
            raise PropagationError("non-finite cell propagator")
        return out

    def __repr__(self):
        return f"MatrixODE({self.name}, step={self.step})"


# ---------------------------------------------------------------------------
# caches


class FamilyEvalCache(ABC):
    """Transition lookups ``U(t_j, t_i)`` for nodes of a grid.

    Indices run over ``grid.all_points``; the first ``grid.nf`` of them are
    function nodes.
    """

    def __init__(self, family, grid: TimeGrid):
        self.family = family
        self.grid = grid
        self.t = grid.all_points
        self.N = self.t.size
        self.nf = grid.nf
        self.dim = family.dim

    @abstractmethod
    def log_norm_row(self, i) -> np.ndarray:
        """``ln ||U(t_j, t_i)||`` for ``j >= i`` over all nodes."""

    @abstractmethod
    def apply_row(self, i, X) -> np.ndarray:
        """``U(t_j, t_i) X`` for ``j >= i``; ``X`` is ``(n,)`` or ``(n, d)``."""

    @abstractmethod
    def lookup(self, j, i) -> np.ndarray:
        ...

    @abstractmethod
    def shift_transfers(self, k) -> np.ndarray:
        """``U(t_j, t_{j-k})`` for function nodes ``j = k..nf-1``."""

    def log_weight(self, alpha) -> np.ndarray:
        """``ln W_alpha(t_i)`` over all nodes (truncated at ``T_sup``); read-only, memoized per rate."""
        memo = self.__dict__.setdefault("_log_weight_memo", {})
        key = float(alpha)
        if key not in memo:
            out = np.empty(self.N)
            for i in range(self.N):
                out[i] = np.max(self.log_norm_row(i) - alpha * (self.t[i:] - self.t[i]))
            out.flags.writeable = False
            memo[key] = out
        return memo[key]

    def log_phi(self, alpha, values) -> np.ndarray:
        """``ln phi_alpha(t_i, u)`` for function nodes (``-inf`` where u = 0)."""
        out = np.full(self.nf, -np.inf)
        for i in range(self.nf):
            x = values[i]
            if not np.any(x):
                continue
            y = self.apply_row(i, x)
            with np.errstate(divide="ignore"):
                ln = np.log(vector_norm(y, axis=-1))
            out[i] = np.max(ln - alpha * (self.t[i:] - self.t[i]))
        return out


class PotentialCache(FamilyEvalCache):
    def __init__(self, family, grid):
        super().__init__(family, grid)
        g = np.asarray(family.potential(self.t), dtype=float)
        if not np.all(np.isfinite(g)):
            raise PropagationError("non-finite potential on grid")
        self.g = g

    def log_norm_row(self, i):
        return self.g[i] - self.g[i:]

    def apply_row(self, i, X):
        X = np.asarray(X, dtype=float)
        f = np.exp(self.g[i] - self.g[i:])
        return f.reshape((-1,) + (1,) * X.ndim) * X

    def lookup(self, j, i):
        if j < i:
            raise DomainError("need j >= i")
        return math.exp(self.g[i] - self.g[j]) * np.eye(self.dim)

    def shift_transfers(self, k):
        g = self.g[: self.nf]
        f = np.exp(g[: self.nf - k] - g[k:])
        return f[:, None, None] * np.eye(self.dim)

    def shifted_potential(self, alpha):
        return self.g + alpha * self.t

    def log_weight(self, alpha):
        hh = self.shifted_potential(alpha)
        suffix_min = np.minimum.accumulate(hh[::-1])[::-1]
        return hh - suffix_min

    def log_phi(self, alpha, values):
        lw = self.log_weight(alpha)[: self.nf]
        with np.errstate(divide="ignore"):
            return lw + np.log(vector_norm(values, axis=1))


class ExponentRowCache(FamilyEvalCache):
    """Scalar families with a general exponent ``E(t, s)``."""

    def log_norm_row(self, i):
        return np.asarray(self.family.exponent(self.t[i:], self.t[i]), dtype=float)

    def apply_row(self, i, X):
        X = np.asarray(X, dtype=float)
        f = np.exp(self.log_norm_row(i))
        return f.reshape((-1,) + (1,) * X.ndim) * X

    def lookup(self, j, i):
        return np.array([[math.exp(self.family.exponent(self.t[j], self.t[i]))]])

    def shift_transfers(self, k):
        t = self.t[: self.nf]
        e = np.asarray(self.family.exponent(t[k:], t[: self.nf - k]), dtype=float)
        return np.exp(e)[:, None, None]


class MatrixCache(FamilyEvalCache):
    """Fundamental matrices ``Phi(t_i) = U(t_i, 0)`` with guarded inversion."""

    def __init__(self, family: MatrixODE, grid):
        super().__init__(family, grid)
        self.P = family.cell_propagators(self.t)
        Phi = np.empty((self.N, self.dim, self.dim))
        Phi[0] = np.eye(self.dim)
        for k in range(self.N - 1):
            Phi[k + 1] = self.P[k] @ Phi[k]
        if not np.all(np.isfinite(Phi)):
            raise PropagationError("fundamental matrix overflowed")
        self.Phi = Phi
        self.cond = np.linalg.cond(Phi)
        self._inv = {}

    def _phi_inv(self, i):
        if i not in self._inv:
            self._inv[i] = np.linalg.inv(self.Phi[i])
        return self._inv[i]

    def row_matrices(self, i) -> np.ndarray:
        if self.cond[i] < COND_LIMIT:
            return self.Phi[i:] @ self._phi_inv(i)
        out = np.empty((self.N - i, self.dim, self.dim))
        out[0] = np.eye(self.dim)
        for k in range(i, self.N - 1):
            out[k - i + 1] = self.P[k] @ out[k - i]
        return out

    def log_norm_row(self, i):
        with np.errstate(divide="ignore"):
            return np.log(spectral_norm(self.row_matrices(i)))

    def apply_row(self, i, X):
        return self.row_matrices(i) @ np.asarray(X, dtype=float)

    def lookup(self, j, i):
        if j < i:
            raise DomainError("need j >= i")
        if self.cond[i] < COND_LIMIT:
            return self.Phi[j] @ self._phi_inv(i)
        M = np.eye(self.dim)
        for k in range(i, j):
            M = self.P[k] @ M
        return M

    def log_phi(self, alpha, values, block=256) -> np.ndarray:
        # U(t_j, t_i) x_i = Phi(t_j) z_i with z_i = Phi(t_i)^{-1} x_i, blocked over i
        values = np.asarray(values, dtype=float)
        out = np.full(self.nf, -np.inf)
        live = np.any(values != 0, axis=1)
        good = live & (self.cond[: self.nf] < COND_LIMIT)
        idx = np.nonzero(good)[0]
        for lo in range(0, idx.size, block):
            rows = idx[lo: lo + block]
            z = np.linalg.solve(self.Phi[rows], values[rows][:, :, None])[:, :, 0]
            start = rows[0]
            Y = np.einsum("jab,ib->ija", self.Phi[start:], z)
            with np.errstate(divide="ignore"):
                ln = np.log(vector_norm(Y, axis=-1))
            gap = self.t[None, start:] - self.t[rows][:, None]
            ln = np.where(gap >= 0, ln - alpha * gap, -np.inf)
            out[rows] = np.max(ln, axis=1)
        for i in np.nonzero(live & ~good)[0]:
            with np.errstate(divide="ignore"):
                ln = np.log(vector_norm(self.apply_row(i, values[i]), axis=-1))
            out[i] = np.max(ln - alpha * (self.t[i:] - self.t[i]))
        return out

    def shift_transfers(self, k):
        nf = self.nf
        if k == 0:
            return np.broadcast_to(np.eye(self.dim), (nf, self.dim, self.dim)).copy()
        out = np.empty((nf - k, self.dim, self.dim))
        good = self.cond[: nf - k] < COND_LIMIT
        idx = np.nonzero(good)[0]
        if idx.size:
            inv = np.linalg.inv(self.Phi[idx])
            out[idx] = self.Phi[idx + k] @ inv
        for i in np.nonzero(~good)[0]:
            out[i] = self.lookup(i + k, i)
        return out


class RescaledCache(FamilyEvalCache):
    def __init__(self, family: Rescaled, grid):
        super().__init__(family, grid)
        self.inner = propagate_rows(family.inner, grid)
        self.lam = family.shift

    def log_norm_row(self, i):
        return self.inner.log_norm_row(i) - self.lam * (self.t[i:] - self.t[i])

    def apply_row(self, i, X):
        y = self.inner.apply_row(i, X)
        f = np.exp(-self.lam * (self.t[i:] - self.t[i]))
        return f.reshape((-1,) + (1,) * (y.ndim - 1)) * y

    def lookup(self, j, i):
        return math.exp(-self.lam * (self.t[j] - self.t[i])) * self.inner.lookup(j, i)

    def shift_transfers(self, k):
        t = self.t[: self.nf]
        f = np.exp(-self.lam * (t[k:] - t[: self.nf - k]))
        return f[:, None, None] * self.inner.shift_transfers(k)


@functools.lru_cache(maxsize=64)
def propagate_rows(family: EvolutionFamily, grid: TimeGrid) -> FamilyEvalCache:
    """Build (and memoize) the evaluation cache of ``family`` on ``grid``."""
    if family.horizon is not None and grid.T_sup > family.horizon * (1 + 1e-12):
        raise DomainError(f"grid reaches {grid.T_sup} beyond family horizon {family.horizon}")
    if family.has_potential:
        return PotentialCache(family, grid)
    if isinstance(family, Rescaled):
        return RescaledCache(family, grid)
    if isinstance(family, MatrixODE):
        return MatrixCache(family, grid)
    if isinstance(family, ScalarExponent):
        return ExponentRowCache(family, grid)
    raise DomainError(f"no cache for {family!r}")


def evaluate(family: EvolutionFamily, t, s) -> np.ndarray:
    return family.evaluate(t, s)


def cocycle_residual(family: EvolutionFamily, t, tau, s) -> float:
    return family.cocycle_residual(t, tau, s)
