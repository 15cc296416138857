"""The look-ahead functional phi, admissible norms, weight envelopes.

All suprema run over grid nodes ``tau in [t, T_sup]``; values are handled in
the log domain and exponentiated only at the end (``inf`` on overflow).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .family import PotentialCache, propagate_rows
from .grid import GridFunction, TimeGrid, vector_norm

TOL_TAIL = 1e-3
TOL_GROWTH = 0.05
PROBE_SEED = 0x5EED


def _exp(x):
    with np.errstate(over="ignore"):
        return np.exp(x)


@dataclass
class PhiProfile:
    alpha: float
    grid: TimeGrid
    log_phi: np.ndarray
    phi_values: np.ndarray = field(init=False)
    norm: float = field(init=False)
    argmax_t: float = field(init=False)

    def __post_init__(self):
        self.phi_values = _exp(self.log_phi)
        i = int(np.argmax(self.log_phi))  # smallest maximizer
        self.norm = float(self.phi_values[i])
        self.argmax_t = float(self.grid.points[i])

    @property
    def log_norm(self) -> float:
        return float(np.max(self.log_phi))

    def to_csv(self, path, u: GridFunction):
        from .grid import write_csv
        write_csv(path, ["t", "phi", "norm_u"],
                  np.column_stack([self.grid.points, self.phi_values, u.norms()]))


@dataclass
class WeightProfile:
    alpha: float
    grid: TimeGrid
    log_w: np.ndarray  # over all nodes, including the sup extension

    @property
    def w_values(self) -> np.ndarray:
        return _exp(self.log_w[: self.grid.nf])

    def to_csv(self, path):
        from .grid import write_csv
        write_csv(path, ["s", "W_alpha"], np.column_stack([self.grid.points, self.w_values]))


def phi_profile(family, alpha, u: GridFunction) -> PhiProfile:
    cache = propagate_rows(family, u.grid)
    if u.dim != family.dim:
        raise DomainError("function dimension does not match family")
    return PhiProfile(float(alpha), u.grid, cache.log_phi(alpha, u.values))


def phi(family, alpha, t, u: GridFunction) -> float:
    """``phi_alpha(t, u)`` at a function node ``t``."""
    i = u.grid.index(t)
    cache = propagate_rows(family, u.grid)
    x = u.values[i]
    if not np.any(x):
        return 0.0
    y = cache.apply_row(i, x)
    tt = cache.t[i:] - cache.t[i]
    with np.errstate(divide="ignore"):
        return float(_exp(np.max(np.log(vector_norm(y, axis=-1)) - alpha * tt)))


def admissible_norm(family, alpha, u) -> float:
    return phi_profile(family, alpha, u).norm


def weight_profile(family, alpha, grid: TimeGrid) -> WeightProfile:
    cache = propagate_rows(family, grid)
    return WeightProfile(float(alpha), grid, cache.log_weight(alpha))


def _rel_excess(a, b):
    """``(a - b) / max(1, |b|)`` with ``inf - inf`` treated as 0."""
    with np.errstate(invalid="ignore"):
        d = (a - b) / np.maximum(1.0, np.abs(b))
    return np.where(np.isnan(d), 0.0, d)


def sandwich_check(family, alpha, u: GridFunction) -> float:
    """Largest violation of ``|u(t)| <= phi(t,u) <= W(t)|u(t)|``, relative to phi's scale."""
    prof = phi_profile(family, alpha, u)
    w = weight_profile(family, alpha, u.grid).w_values
    nu = u.norms()
    lower = _rel_excess(nu, prof.phi_values)
    with np.errstate(invalid="ignore"):
        upper_b = np.where(nu > 0, w * nu, 0.0)
    upper = _rel_excess(prof.phi_values, upper_b)
    return float(max(np.max(lower), np.max(upper), 0.0) if nu.any() else 0.0)


def monotonicity_check(family, alpha, beta, u: GridFunction) -> float:
    """Largest ``phi_beta - phi_alpha`` (relative to phi_alpha's scale); needs ``beta >= alpha``."""
    if beta < alpha:
        raise DomainError("need beta >= alpha")
    pa = phi_profile(family, alpha, u).phi_values
    pb = phi_profile(family, beta, u).phi_values
    return float(max(np.max(_rel_excess(pb, pa)), 0.0))


@dataclass
class Membership:
    member: bool
    phi_at_zero: float
    tail_max: float
    norm: float

    def __bool__(self):
        return self.member


def membership_C(family, alpha, u: GridFunction, tol_tail=TOL_TAIL, tol_zero=None) -> Membership:
    """Truncated check of ``phi(0,u) = 0`` and ``phi(t,u) -> 0`` on ``[0.8 T, T]``."""
    prof = phi_profile(family, alpha, u)
    norm = prof.norm
    tz = 1e-9 * (1 + norm) if tol_zero is None else tol_zero
    tail = prof.phi_values[u.grid.points >= 0.8 * u.grid.T_max]
    tail_max = float(np.max(tail)) if tail.size else 0.0
    ok = prof.phi_values[0] <= tz and tail_max <= tol_tail * norm
    return Membership(bool(ok), float(prof.phi_values[0]), tail_max, norm)


def stabilizes(values, points, split, tol_growth=TOL_GROWTH, log=False) -> bool:
    """``sup`` on ``points >= split`` at most ``(1 + tol)`` times the ``sup`` before it."""
    first = values[points < split]
    second = values[points >= split]
    if not first.size or not second.size:
        return True
    if log:
        return bool(np.max(second) <= np.max(first) + np.log1p(tol_growth))
    return bool(np.max(second) <= (1 + tol_growth) * np.max(first))


@dataclass
class EquivalenceReport:
    alpha: float
    nu: float
    K_measured: float
    log_K: float
    equivalent: bool
    probes: str
    log_ratio: np.ndarray = field(repr=False, default=None)

    @property
    def verdict(self):
        return "equivalent" if self.equivalent else "diverging"

    def as_text(self) -> str:
        lines = [
            f"alpha = {self.alpha:.17g}",
            f"nu = {self.nu:.17g}",
            f"K_measured = {self.K_measured:.17g}",
            f"verdict = {self.verdict}",
            f"probes = {self.probes}",
        ]
        return "\n".join(lines) + "\n"


def probe_directions(dim, n_dirs=4, seed=PROBE_SEED) -> np.ndarray:
    rng = np.random.default_rng(seed)
    rand = rng.standard_normal((n_dirs, dim))
    rand /= np.linalg.norm(rand, axis=1, keepdims=True)
    return np.vstack([np.eye(dim), rand])


def _log_phi_directions(cache, alphas, dirs):
    """``ln phi_alpha(t_i, x)`` for constant directions, for each alpha."""
    nf = cache.nf
    out = np.empty((len(alphas), nf, len(dirs)))
    if isinstance(cache, PotentialCache):
        ln_x = np.log(vector_norm(dirs, axis=1))
        for a, al in enumerate(alphas):
            out[a] = cache.log_weight(al)[:nf, None] + ln_x[None, :]
        return out
    for i in range(nf):
        y = cache.apply_row(i, dirs.T)  # (m, n, d)
        ln = np.log(vector_norm(y, axis=1))
        dt = (cache.t[i:] - cache.t[i])[:, None]
        for a, al in enumerate(alphas):
            out[a, i] = np.max(ln - al * dt, axis=0)
    return out


def quasi_negativity_test(family, alpha, nu, grid: TimeGrid, n_dirs=4, seed=PROBE_SEED,
                          tol_growth=TOL_GROWTH, admissibility=None) -> EquivalenceReport:
    """Direction-sampled test of ``C(U, alpha) = C(U, -nu)``.

    ``admissibility`` is an optional callable ``alpha -> bool``; when given,
    a non-admissible ``-nu`` raises :class:`DomainError`.
    """
    if nu <= 0:
        raise DomainError("nu must be positive")
    if -nu > alpha:
        raise DomainError("need -nu <= alpha")
    if admissibility is not None and not admissibility(-nu):
        raise DomainError(f"-nu = {-nu} is not admissible")
    cache = propagate_rows(family, grid)
    dirs = probe_directions(family.dim, n_dirs, seed)
    lp = _log_phi_directions(cache, [-nu, alpha], dirs)
    with np.errstate(invalid="ignore"):
        log_ratio = np.max(lp[0] - lp[1], axis=1)
    log_ratio = np.where(np.isnan(log_ratio), 0.0, log_ratio)
    pts = grid.points
    # a bounded ratio may still creep toward its sup; allow growth by a
    # fraction tol_growth of the log level reached in the first half
    first = log_ratio[pts < grid.T_max / 2]
    second = log_ratio[pts >= grid.T_max / 2]
    eq = True
    if first.size and second.size:
        lead = float(np.max(first))
        eq = float(np.max(second)) <= lead + max(np.log1p(tol_growth), tol_growth * abs(lead))
    log_K = float(np.max(log_ratio))
    desc = f"{family.dim} coordinate + {n_dirs} random directions (seed {seed:#x}) at {grid.nf} nodes"
    return EquivalenceReport(float(alpha), float(nu), float(_exp(log_K)), log_K, eq, desc, log_ratio)
