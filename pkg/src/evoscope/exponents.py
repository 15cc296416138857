"""Lyapunov/Bohl exponent estimates and admissibility of growth rates.

A rate ``alpha`` is judged admissible when every sampled row
``tau -> ln||U(tau, s)|| - alpha (tau - s)`` stops growing: its sup over the
later half of ``[s, T_sup]`` does not exceed the sup over the earlier half by
more than ``ln(1 + tol_growth)`` (nor by ``ln(threshold)``). Halves are
linear, or geometric on log-augmented grids.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .family import PotentialCache, propagate_rows, spectral_norm
from .grid import TimeGrid
from .norms import TOL_GROWTH, stabilizes

log = logging.getLogger(__name__)

THRESHOLD = 1e12
MAX_ROWS = 512


@dataclass
class Admissibility:
    alpha: float
    admissible: bool
    growth: float  # largest log-growth of a row between its halves
    evidence: tuple | None = None  # (t, s) where the later sup was reached

    def __bool__(self):
        return self.admissible


def _row_indices(grid: TimeGrid, max_rows=MAX_ROWS) -> np.ndarray:
    log_mode = grid.sampling == "log" and grid.ext.size
    t_row = grid.T_max if log_mode else grid.T_max / 2
    cand = np.nonzero(grid.points <= t_row)[0]
    if cand.size <= max_rows:
        return cand
    lin = cand[np.linspace(0, cand.size - 1, max_rows // 2).astype(int)]
    pos = grid.points[cand]
    first = pos[1] if pos.size > 1 else 1.0
    targets = np.geomspace(first, pos[-1], max_rows // 2)
    geo = cand[np.clip(np.searchsorted(pos, targets), 0, cand.size - 1)]
    return np.unique(np.concatenate([[0], lin, geo]))


def _split_point(grid, s):
    if grid.sampling == "log" and grid.ext.size:
        lo = max(s, grid.h if grid.h > 0 else 1.0)
        return math.sqrt(lo * grid.T_sup)
    return 0.5 * (s + grid.T_sup)


def is_admissible(family, alpha, grid: TimeGrid, threshold=THRESHOLD,
                  tol_growth=TOL_GROWTH, max_rows=MAX_ROWS) -> Admissibility:
    cache = propagate_rows(family, grid)
    t = cache.t
    worst = -np.inf
    evidence = None
    bound = min(math.log1p(tol_growth), math.log(threshold))
    for i in _row_indices(grid, max_rows):
        row = cache.log_norm_row(i) - alpha * (t[i:] - t[i])
        if np.any(np.isnan(row)) or np.any(row == np.inf):
            return Admissibility(float(alpha), False, math.inf, (float(t[i]), float(t[i])))
        tt = t[i:]
        m = _split_point(grid, t[i])
        early, late = row[tt < m], row[tt >= m]
        if not early.size or not late.size:
            continue
        g = float(np.max(late) - np.max(early))
        if g > worst:
            worst = g
            evidence = (float(tt[tt >= m][np.argmax(late)]), float(t[i]))
    ok = worst <= bound
    return Admissibility(float(alpha), bool(ok), float(worst), None if ok else evidence)


def _weight_for_strictness(family, alpha, grid):
    cache = propagate_rows(family, grid)
    lw = cache.log_weight(alpha)
    if grid.sampling == "log" and grid.ext.size:
        return lw, cache.t, grid.T_max
    return lw[: grid.nf], grid.points, grid.T_max / 2


def is_strict(family, alpha, grid: TimeGrid, tol_growth=TOL_GROWTH, **kw) -> bool:
    """Whether the minimal envelope ``W_alpha(s)`` stays bounded in ``s``."""
    if not is_admissible(family, alpha, grid, tol_growth=tol_growth, **kw):
        raise DomainError(f"alpha={alpha} is not admissible")
    lw, pts, split = _weight_for_strictness(family, alpha, grid)
    return stabilizes(lw, pts, split, tol_growth, log=True)


def lyapunov_exponent(family, grid: TimeGrid) -> float:
    """Max of ``ln||U(t,0)||/t`` over ``[T/2, T]`` (``[sqrt T, T]`` on log grids)."""
    cache = propagate_rows(family, grid)
    T = grid.T_max
    lo = math.sqrt(T) if (grid.sampling == "log" and T > 1) else T / 2
    pts = grid.points
    sel = (pts >= lo) & (pts > 0)
    row = cache.log_norm_row(0)[: grid.nf]
    return float(np.max(row[sel] / pts[sel]))


@dataclass
class BohlEstimate:
    value: float  # +inf when diverging
    window_value: float
    gap: float
    diverging: bool


def bohl_exponent(family, grid: TimeGrid, gap=None, tol_growth=TOL_GROWTH, **kw) -> BohlEstimate:
    """Sup over ``s`` of ``ln||U(s+gap, s)||/gap`` with a divergence flag.

    The estimate is declared divergent (``+inf``) when no strict rate exists
    just above the window value: the envelope at ``window + 1`` still grows.
    """
    T = grid.T_max
    gap = T / 10 if gap is None else gap
    if not (T / 10 - 1e-9 <= gap <= T / 2 + 1e-9):
        raise DomainError("gap must lie in [T_max/10, T_max/2]")
    k = max(1, int(round(gap / grid.h)))
    gap = k * grid.h
    cache = propagate_rows(family, grid)
    if isinstance(cache, PotentialCache):
        g = cache.g[: grid.nf]
        ln = g[: grid.nf - k] - g[k:]
    else:
        with np.errstate(divide="ignore"):
            ln = np.log(spectral_norm(cache.shift_transfers(k)))
    window = float(np.max(ln) / gap)
    probe = window + 1.0
    adm = is_admissible(family, probe, grid, tol_growth=tol_growth, **kw)
    diverging = not adm or not stabilizes(*_weight_for_strictness(family, probe, grid),
                                          tol_growth, log=True)
    return BohlEstimate(math.inf if diverging else window, window, gap, diverging)


def inf_admissible(family, grid: TimeGrid, bracket, tol=0.02, history=None, **kw) -> float:
    """Bisection on the admissibility verdict; returns the final midpoint."""
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise DomainError("bracket must satisfy lo < hi")
    if not is_admissible(family, hi, grid, **kw):
        raise DomainError(f"upper bracket end {hi} is not admissible")
    if is_admissible(family, lo, grid, **kw):
        raise DomainError(f"lower bracket end {lo} is admissible")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        ok = is_admissible(family, mid, grid, **kw).admissible
        if history is not None:
            history.append((mid, ok))
        log.debug("bisect alpha=%g admissible=%s", mid, ok)
        if ok:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


UNIFORM_EXP_BOUNDED = "uniform_exp_bounded"
NONUNIFORM_EXP_BOUNDED = "nonuniform_exp_bounded"
NONUNIFORM_EXP_STABLE = "nonuniform_exp_stable"
UNIFORM_EXP_STABLE = "uniform_exp_stable"


@dataclass
class ExponentReport:
    K_L_estimate: float
    K_B_estimate: float
    inf_A_estimate: float
    alpha_tested: list = field(default_factory=list)  # (alpha, admissible, strict)
    classification: frozenset = frozenset()

    def as_text(self) -> str:
        return "".join([
            f"K_L = {self.K_L_estimate:.17g}\n",
            f"K_B = {self.K_B_estimate:.17g}\n",
            f"inf_A = {self.inf_A_estimate:.17g}\n",
            f"classification = {','.join(sorted(self.classification))}\n",
        ])

    def rows(self):
        return [(a, str(ad).lower(), str(st).lower()) for a, ad, st in self.alpha_tested]


def _find_bracket(family, grid, start, **kw):
    hi = start + 1.0
    step = 1.0
    for _ in range(40):
        if is_admissible(family, hi, grid, **kw):
            break
        step *= 2
        hi += step
    else:
        raise DomainError("no admissible rate found; family is not exponentially bounded on the grid")
    lo = start - 1.0
    step = 1.0
    for _ in range(12):
        if not is_admissible(family, lo, grid, **kw):
            return lo, hi
        step *= 2
        lo -= step
    return None, hi


def classify(family, grid: TimeGrid, bracket=None, tol=0.02, alphas=(), **kw) -> ExponentReport:
    K_L = lyapunov_exponent(family, grid)
    bohl = bohl_exponent(family, grid, **kw)
    if bracket is None:
        lo, hi = _find_bracket(family, grid, K_L, **kw)
    else:
        lo, hi = bracket
    history: list = []
    inf_A = -math.inf if lo is None else inf_admissible(family, grid, (lo, hi), tol, history, **kw)
    # smallest rate actually verified admissible; the midpoint itself may not be
    verified = min([hi] + [a for a, ok in history if ok])

    probes = set(float(a) for a in alphas)
    probes.update([0.0, inf_A + 1.0 if math.isfinite(inf_A) else hi])
    if math.isfinite(bohl.value):
        probes.add(bohl.value + 0.05)
    if math.isfinite(inf_A) and inf_A < 0:
        probes.update(inf_A * f for f in (0.75, 0.5, 0.25))
    tested = []
    for a in sorted(probes):
        adm = bool(is_admissible(family, a, grid, **kw))
        strict = False
        if adm:
            lw, pts, split = _weight_for_strictness(family, a, grid)
            strict = stabilizes(lw, pts, split, kw.get("tol_growth", TOL_GROWTH), log=True)
        tested.append((a, adm, strict))

    labels = set()
    stable = verified < 0 or lo is None
    if any(st for _, _, st in tested):
        labels.add(UNIFORM_EXP_BOUNDED)
    else:
        labels.add(NONUNIFORM_EXP_BOUNDED)
    if stable:
        labels.add(NONUNIFORM_EXP_STABLE)
    if stable and any(st and a < 0 for a, _, st in tested):
        labels.add(UNIFORM_EXP_STABLE)
    # uniform rates dominate trajectory rates; a fixed-gap window can under-read
    K_B = bohl.value if bohl.diverging else max(bohl.value, K_L)
    return ExponentReport(K_L, K_B, inf_A, tested, frozenset(labels))
