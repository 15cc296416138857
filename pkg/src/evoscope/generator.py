"""Inverse generator as a Volterra operator, resolvent estimates, certification.

``u_f(t) = int_0^t U(t, xi) f(xi) dxi`` is evaluated by the composite
trapezoid rule on grid cells, marched forward with one-cell propagators.
When the generator is invertible, ``G^{-1} f = -u_f``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, DomainError, PropagationError
from .family import PotentialCache, propagate_rows
from .grid import GridFunction, TimeGrid, vector_norm
from .norms import PROBE_SEED, phi_profile, weight_profile
from .witnesses import (
    PlateauSpec, make_plateau, make_psi_ratio_witness, make_witness_f, make_witness_g, random_bumps, theta,
)

log = logging.getLogger(__name__)

C_SAFETY = 1.1
GROWTH_PER_DOUBLING = 1.8
DELTA_SWEEP = (0.25, 0.5, 0.75)


def apply_inverse(family, f: GridFunction) -> GridFunction:
    grid = f.grid
    nf = grid.nf
    dt = np.diff(grid.points)
    cache = propagate_rows(family, grid)
    if nf == 1:
        return GridFunction(grid, np.zeros_like(f.values))
    fv = f.values
    if isinstance(cache, PotentialCache) and family.dim == 1:
        g = cache.g[:nf]
        p = np.exp(g[:-1] - g[1:]).tolist()
        fl = fv[:, 0].tolist()
        h2 = (0.5 * dt).tolist()
        out = [0.0] * nf
        u = 0.0
        for j in range(nf - 1):
            u = p[j] * (u + h2[j] * fl[j]) + h2[j] * fl[j + 1]
            out[j + 1] = u
        vals = np.array(out)[:, None]
    else:
        P = cache.shift_transfers(1)
        vals = np.zeros_like(fv)
        u = np.zeros(family.dim)
        for j in range(nf - 1):
            u = P[j] @ (u + 0.5 * dt[j] * fv[j]) + 0.5 * dt[j] * fv[j + 1]
            vals[j + 1] = u
    if not np.all(np.isfinite(vals)):
        j = int(np.argmax(~np.all(np.isfinite(vals), axis=1)))
        raise PropagationError(f"quadrature overflow at t={grid.points[j]}")
    return GridFunction(grid, vals)


def _column(cache, j):
    """``U(t_j, t_k)`` for ``k = 0..j``."""
    if isinstance(cache, PotentialCache):
        f = np.exp(cache.g[: j + 1] - cache.g[j])
        return f[:, None, None] * np.eye(cache.dim)
    return np.stack([cache.lookup(j, k) for k in range(j + 1)])


def volterra_direct(family, f: GridFunction, t, s=0.0) -> np.ndarray:
    """Trapezoid sum of ``int_s^t U(t, xi) f(xi) dxi`` evaluated column-wise."""
    grid = f.grid
    j, i = grid.index(t), grid.index(s)
    if j < i:
        raise DomainError("need t >= s")
    if j == i:
        return np.zeros(f.dim)
    col = _column(propagate_rows(family, grid), j)[i:]
    terms = np.einsum("kab,kb->ka", col, f.values[i: j + 1])
    return np.trapezoid(terms, grid.points[i: j + 1], axis=0)


def inverse_consistency_check(family, f: GridFunction, pairs, u=None) -> float:
    """Largest ``||u_f(t) - U(t,s) u_f(s) - int_s^t U(t,xi) f(xi) dxi||`` over ``(s, t)`` pairs."""
    u = apply_inverse(family, f) if u is None else u
    cache = propagate_rows(family, f.grid)
    worst = 0.0
    for s, t in pairs:
        i, j = f.grid.index(s), f.grid.index(t)
        r = u.values[j] - cache.lookup(j, i) @ u.values[i] - volterra_direct(family, f, t, s)
        worst = max(worst, float(np.linalg.norm(r)))
    return worst


def resolvent_bound_check(family, alpha, f: GridFunction) -> float:
    """``(-1/alpha) ||f|| - ||u_f||``; nonnegative for negative admissible alpha."""
    if alpha >= 0:
        raise DomainError("the bound needs alpha < 0")
    nf_ = phi_profile(family, alpha, f).norm
    nu = phi_profile(family, alpha, apply_inverse(family, f)).norm
    return float(-nf_ / alpha - nu)


# ---------------------------------------------------------------------------
# resolvent norm


@dataclass
class BatteryMember:
    label: str
    f: GridFunction
    group: str | None = None
    n: int | None = None
    u: GridFunction | None = None  # known u_f, otherwise computed


@dataclass
class ResolventEstimate:
    alpha: float
    c: float
    witness_f: str
    n_tests: int
    ratio_history: list = field(default_factory=list)
    unbounded: bool = False
    group_maxima: dict = field(default_factory=dict)

    def as_text(self) -> str:
        return "".join([
            f"alpha = {self.alpha:.17g}\n",
            f"c = {self.c:.17g}\n",
            f"battery_size = {self.n_tests}\n",
            f"witness = {self.witness_f}\n",
            f"inverse_unbounded = {str(self.unbounded).lower()}\n",
        ])


def _u_tilde_log_phi(cache, alpha, nu, i, x):
    """``ln phi_alpha(t, u_tilde)`` for function nodes ``t >= t_i`` without overflow."""
    nf = cache.nf
    with np.errstate(divide="ignore"):
        r = np.log(vector_norm(cache.apply_row(i, x), axis=-1)) - alpha * cache.t[i:]
    suffix = np.maximum.accumulate(r[::-1])[::-1][: nf - i]
    tt = cache.t[i:nf]
    return nu * (tt - tt[0]) + suffix + alpha * tt


def psi_witness_search(family, alpha, n, grid: TimeGrid, x=None, max_candidates=200):
    """Find ``(s_n, t_n)`` where ``phi(., u_tilde)`` peaks beyond ``s_n + n``.

    Returns the witness pair with the largest norm ratio, or ``None`` when no
    candidate start ``s`` satisfies the peak condition.
    """
    cache = propagate_rows(family, grid)
    x = np.eye(family.dim)[0] if x is None else np.asarray(x, dtype=float)
    if not isinstance(cache, PotentialCache):
        max_candidates = min(max_candidates, 24)
    pts = grid.points
    cand = np.nonzero(pts <= grid.T_max - 2 * n - grid.h)[0]
    if not cand.size:
        return None
    cand = np.unique(cand[np.linspace(0, cand.size - 1, min(max_candidates, cand.size)).astype(int)])
    best = None
    for i in cand:
        lp = _u_tilde_log_phi(cache, alpha, 1.0 / n, i, x)
        k = int(np.argmax(lp))
        s, t_peak = pts[i], pts[i + k]
        if t_peak <= s + n + 2 * grid.h or i + k >= grid.nf - 1:
            continue
        t_n = s + n + 0.5 * min(n, t_peak - s - n)
        try:
            u, f = make_psi_ratio_witness(family, alpha, n, s, x, t_n, grid)
        except Exception:  # noqa: BLE001 - snapping can push t_n out of range
            continue
        nu_ = phi_profile(family, alpha, u).norm
        nf_ = phi_profile(family, alpha, f).norm
        if not (np.isfinite(nu_) and np.isfinite(nf_)) or nf_ == 0:
            continue
        ratio = nu_ / nf_
        if best is None or ratio > best[0]:
            best = (ratio, u, f)
    return best


def default_battery(family, alpha, grid: TimeGrid, n_values=(4, 8, 16), start_fractions=(0.0, 0.25, 0.5, 0.75),
                    powers=(1, 2), n_bumps=20, seed=PROBE_SEED, psi=True):
    """Witness functions for the resolvent estimate.

    Starts ``s`` are taken at fixed fractions of ``n``; ``powers`` adds the
    polynomially weighted cutoffs ``g_{n,k}`` at the same starts.
    """
    members = []
    dirs = np.eye(family.dim)
    for n in n_values:
        if n + theta(n) > grid.T_max:
            continue
        for fr in start_fractions:
            s = float(grid.points[grid.snap(fr * n)[0]])
            if s + theta(n) > n:
                continue
            for d, x in enumerate(dirs):
                f = make_witness_f(family, alpha, s, x, n, grid)
                members.append(BatteryMember(f"f_n(s={s:g},x=e{d},n={n})", f, "f_n", n))
                for k in powers:
                    g = make_witness_g(family, s, x, k, n, grid)
                    members.append(BatteryMember(f"g_nk(s={s:g},x=e{d},n={n},k={k})", g))
        if psi:
            hit = psi_witness_search(family, alpha, n, grid)
            if hit is not None:
                _, u, f = hit
                members.append(BatteryMember(
                    f"psi(n={n},s={u.meta['s']:g},t_n={u.meta['t_n']:g})", f, "psi", n, u))
    T = grid.T_max
    if T >= 4:
        spec = PlateauSpec(1.0, 1.0, T / 2, 1.0)
        plate = make_plateau(spec, grid)
        for d, x in enumerate(dirs):
            members.append(BatteryMember(f"plateau(x=e{d})", GridFunction(grid, plate.values * x)))
    for k, b in enumerate(random_bumps(grid, family.dim, n_bumps, seed)):
        members.append(BatteryMember(f"bump[{k}]", b))
    return members


def _ratio(family, alpha, m: BatteryMember) -> float:
    nf_ = phi_profile(family, alpha, m.f).norm
    if nf_ == 0:
        return 0.0
    u = m.u if m.u is not None else apply_inverse(family, m.f)
    return phi_profile(family, alpha, u).norm / nf_


def _diverging(maxima: dict) -> bool:
    ns = sorted(maxima)
    if len(ns) < 3:
        return False
    r = [maxima[n] for n in ns]
    steps = [r[k + 1] / r[k] >= GROWTH_PER_DOUBLING ** math.log2(ns[k + 1] / ns[k])
             for k in range(len(r) - 1)]
    return all(steps) and r[-1] > 2 * r[0]


def estimate_resolvent_norm(family, alpha, grid: TimeGrid, battery=None, **kw) -> ResolventEstimate:
    members = default_battery(family, alpha, grid, **kw) if battery is None else battery
    if not members or all(not np.any(m.f.values) for m in members):
        raise DegenerateInputError("battery has no nonzero function")
    ratios = []
    groups: dict = {}
    for m in members:
        r = _ratio(family, alpha, m)
        ratios.append(r)
        if m.group is not None:
            g = groups.setdefault(m.group, {})
            g[m.n] = max(g.get(m.n, 0.0), r)
    k = int(np.argmax(ratios))
    unbounded = any(_diverging(v) for v in groups.values())
    return ResolventEstimate(float(alpha), float(ratios[k]), members[k].label, len(members),
                             ratios, unbounded, groups)


# ---------------------------------------------------------------------------
# certification


@dataclass
class StabilityVerdict:
    alpha: float
    c: float
    delta: float
    rate: float
    log_prefactor_const: float  # ln((c alpha + 1)/(1 - delta)); prefactor(s) adds ln W(s)
    verdict: str
    reason: str = ""
    measured_margin: float = float("nan")
    uniform_bound_ok: bool | None = None
    power_bounds_ok: dict = field(default_factory=dict)
    samples: np.ndarray | None = field(default=None, repr=False)  # t, s, measured, predicted
    grid: TimeGrid | None = field(default=None, repr=False)
    log_w: np.ndarray | None = field(default=None, repr=False)

    @property
    def certified(self) -> bool:
        return self.verdict == "certified_stable"

    def prefactor(self, s) -> float:
        i = self.grid.index(s)
        return float(math.exp(self.log_prefactor_const + self.log_w[i]))

    def as_text(self) -> str:
        return "".join([
            f"alpha = {self.alpha:.17g}\n",
            f"c = {self.c:.17g}\n",
            f"delta = {self.delta:.17g}\n",
            f"rate = {self.rate:.17g}\n",
            f"prefactor_const = {math.exp(self.log_prefactor_const):.17g}\n",
            f"margin = {self.measured_margin:.17g}\n",
            f"verdict = {self.verdict}\n",
            f"reason = {self.reason}\n",
        ])


def _row_sample(grid, max_rows):
    idx = np.arange(grid.nf)
    if idx.size > max_rows:
        idx = np.unique(idx[np.linspace(0, idx.size - 1, max_rows).astype(int)])
    return idx


def certify_stability(family, alpha, resolvent: ResolventEstimate, delta=0.5, grid=None,
                      c_safety=C_SAFETY, max_rows=256, max_samples=2000) -> StabilityVerdict:
    """Check ``||U(t,s)|| <= (c alpha + 1)/(1 - delta) W(s) exp(-(delta/c)(t - s))``.

    ``c`` is the battery estimate times ``c_safety``. The intermediate bounds
    ``||U|| <= (c alpha + 1) W(s)`` and the factorial bounds for k = 1, 2, 3
    are reported alongside.
    """
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    if alpha < 0:
        raise DomainError("certification is stated for alpha >= 0")
    if grid is None:
        raise DomainError("a grid is required")
    if resolvent.unbounded or not math.isfinite(resolvent.c) or resolvent.c <= 0:
        return StabilityVerdict(alpha, resolvent.c, delta, 0.0, math.nan, "not_certified",
                                "resolvent estimate flags an unbounded inverse")
    c = c_safety * resolvent.c
    rate = delta / c
    base = math.log(c * alpha + 1.0)
    lpc = base - math.log1p(-delta)
    cache = propagate_rows(family, grid)
    lw = cache.log_weight(alpha)[: grid.nf]
    nf = grid.nf
    pts = grid.points
    slack = math.log1p(1e-9)
    certified = True
    uniform_ok = True
    power_ok = {k: True for k in (1, 2, 3)}
    min_margin = math.inf
    keep = []
    for i in _row_sample(grid, max_rows):
        m = cache.log_norm_row(i)[: nf - i]
        d = pts[i:] - pts[i]
        pred = lpc + lw[i] - rate * d
        gap = pred - m
        certified &= bool(np.all(gap >= -slack))
        uniform_ok &= bool(np.all(m <= base + lw[i] + slack))
        pos = d > 0
        for k in power_ok:
            bound = k * math.log(c) + math.lgamma(k + 1) - k * np.log(d[pos]) + base + lw[i]
            power_ok[k] &= bool(np.all(m[pos] <= bound + slack))
        with np.errstate(over="ignore"):
            min_margin = min(min_margin, float(np.min(-np.expm1(-gap))))
        sel = np.linspace(0, d.size - 1, min(d.size, 8)).astype(int)
        keep.append(np.column_stack([pts[i:][sel], np.full(sel.size, pts[i]),
                                     np.exp(m[sel]), np.exp(pred[sel])]))
    samples = np.vstack(keep)
    if samples.shape[0] > max_samples:
        samples = samples[np.linspace(0, samples.shape[0] - 1, max_samples).astype(int)]
    verdict = "certified_stable" if certified and rate > 0 else "not_certified"
    reason = "" if certified else "measured norm exceeds the predicted envelope"
    return StabilityVerdict(alpha, c, delta, rate, lpc, verdict, reason, min_margin,
                            uniform_ok, power_ok, samples, grid, lw)


def certify_best(family, alpha, resolvent, grid, deltas=DELTA_SWEEP, **kw) -> StabilityVerdict:
    """Largest certified rate over a sweep of ``delta`` (or the last failure)."""
    best = None
    last = None
    for d in deltas:
        v = certify_stability(family, alpha, resolvent, d, grid, **kw)
        last = v
        if v.certified and (best is None or v.rate > best.rate):
            best = v
    return best if best is not None else last


def recheck_on_refined(family, verdict: StabilityVerdict) -> StabilityVerdict:
    """Re-run the envelope comparison at half the step with the same ``c``."""
    fine = verdict.grid.refine()
    fake = ResolventEstimate(verdict.alpha, verdict.c, "refinement", 0)
    return certify_stability(family, verdict.alpha, fake, verdict.delta, fine, c_safety=1.0)


__all__ = [
    "apply_inverse", "volterra_direct", "inverse_consistency_check", "resolvent_bound_check",
    "estimate_resolvent_norm", "certify_stability", "certify_best", "recheck_on_refined",
    "ResolventEstimate", "StabilityVerdict", "BatteryMember", "psi_witness_search",
    "weight_profile",
]
