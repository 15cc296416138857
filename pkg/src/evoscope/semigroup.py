"""Nonuniform evolution semigroup acting on grid functions.

``(T_alpha(t) u)(s) = U(s, s - t) u(s - t)`` for ``s > t`` and ``0`` otherwise.
Shifts are whole multiples of the grid step, so nodes map onto nodes and no
interpolation enters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .family import propagate_rows
from .grid import GridFunction
from .norms import phi_profile


@dataclass(frozen=True)
class SemigroupAction:
    family: object
    alpha: float
    shift: float

    def __post_init__(self):
        if self.shift < 0:
            raise DomainError("shift must be nonnegative")

    def __call__(self, u: GridFunction) -> GridFunction:
        return apply(self, u)


def apply(action: SemigroupAction, u: GridFunction) -> GridFunction:
    k = u.grid.steps_for(action.shift)
    if k == 0:
        return u
    out = np.zeros_like(u.values)
    nf = u.grid.nf
    if k < nf:
        M = propagate_rows(action.family, u.grid).shift_transfers(k)
        # node s = t itself belongs to the zero branch; u(0) sits there
        out[k:] = np.einsum("jab,jb->ja", M, u.values[: nf - k])
        out[k] = 0.0
    return GridFunction(u.grid, out)


def transport(family, alpha, t, u):
    return apply(SemigroupAction(family, alpha, t), u)


def semigroup_law_residual(family, alpha, t, s, u: GridFunction) -> float:
    """``||T(t) T(s) u - T(t+s) u||`` relative to ``max(1, ||u||)``."""
    two = transport(family, alpha, t, transport(family, alpha, s, u))
    one = transport(family, alpha, t + s, u)
    diff = two - one
    if not np.any(diff.values):
        return 0.0
    scale = max(1.0, phi_profile(family, alpha, u).norm)
    return phi_profile(family, alpha, diff).norm / scale


def growth_bound_check(family, alpha, t, u: GridFunction) -> float:
    """``e^{alpha t} ||u|| - ||T(t) u||`` in the admissible norm."""
    nu = phi_profile(family, alpha, u).norm
    nt = phi_profile(family, alpha, transport(family, alpha, t, u)).norm
    return float(np.exp(alpha * t) * nu - nt)


def shifted_phi_domination(family, alpha, t, u: GridFunction) -> float:
    """Largest ``ln phi(s, T(t)u) - alpha t - ln phi(s-t, u)`` over nodes ``s > t``."""
    k = u.grid.steps_for(t)
    a = phi_profile(family, alpha, transport(family, alpha, t, u)).log_phi[k + 1:]
    b = phi_profile(family, alpha, u).log_phi[1: u.grid.nf - k]
    live = np.isfinite(b)
    if not live.any():
        return 0.0
    return float(np.max(a[live] - alpha * t - b[live]))


def strong_continuity_probe(family, alpha, u: GridFunction, shifts):
    """Rows ``(t, ||T(t) u - u||)`` for each shift."""
    rows = []
    for t in shifts:
        d = transport(family, alpha, t, u) - u
        rows.append((float(t), phi_profile(family, alpha, d).norm if np.any(d.values) else 0.0))
    return rows


def rescaling_invariance_check(family, alpha, lam, u: GridFunction) -> float:
    """``max |phi_{U_lam, alpha-lam} - phi_{U, alpha}|`` normalized by ``1 + ||u||``."""
    base = phi_profile(family, alpha, u)
    resc = phi_profile(family.rescale(lam), alpha - lam, u)
    with np.errstate(invalid="ignore"):
        d = np.abs(resc.phi_values - base.phi_values)
    d = np.where(np.isnan(d), 0.0, d)
    return float(np.max(d) / (1.0 + base.norm))
