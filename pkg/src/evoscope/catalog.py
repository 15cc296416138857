"""Built-in example families with checkable facts and recommended grids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import exponents, generator, norms
from .errors import DomainError
from .family import ConstantDecay, MatrixODE, example1, example2
from .grid import GridFunction, TimeGrid
from .witnesses import random_bumps


@dataclass(frozen=True)
class GridSpec:
    T_max: float
    h: float
    sampling: str = "linear"
    T_sup: float | None = None
    log_points: int = 4000

    def build(self) -> TimeGrid:
        return TimeGrid.uniform(self.T_max, self.h, self.T_sup, self.sampling, self.log_points)


@dataclass(frozen=True)
class KnownFact:
    """One checkable statement: ``measure(family, grid)`` compared to ``expected``.

    ``relation`` is ``"approx"`` (``|m - e| <= tol``), ``"le"`` (``m <= e + tol``),
    ``"ge"`` (``m >= e - tol``), ``"gt"`` (``m > e``) or ``"is"`` (``m == e``).
    """

    fact_id: str
    description: str
    expected: object
    tol: float
    basis: str
    measure: Callable = field(repr=False, compare=False)
    relation: str = "approx"

    def check(self, family, grid):
        m = self.measure(family, grid)
        if self.relation == "is":
            ok = m == self.expected
        elif self.relation == "le":
            ok = m <= self.expected + self.tol
        elif self.relation == "ge":
            ok = m >= self.expected - self.tol
        elif self.relation == "gt":
            ok = m > self.expected
        else:
            ok = abs(m - self.expected) <= self.tol
        return m, bool(ok)


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    build: Callable = field(repr=False, compare=False)
    grid: GridSpec
    facts: tuple = ()
    alphas: tuple = ()  # admissible rates used by the property suites
    oracle_grid: GridSpec = GridSpec(40.0, 0.01)


# --- fact measurements -------------------------------------------------------


def _inf_a(bracket, tol=0.02):
    return lambda fam, grid: exponents.inf_admissible(fam, grid, bracket, tol)


def _strict(alpha):
    return lambda fam, grid: exponents.is_strict(fam, alpha, grid)


def _bohl(fam, grid):
    return exponents.bohl_exponent(fam, grid).value


def _lyap(fam, grid):
    return exponents.lyapunov_exponent(fam, grid)


def _log_weight_at(alpha, s):
    def run(fam, grid):
        prof = norms.weight_profile(fam, alpha, grid)
        return float(prof.log_w[grid.snap(s)[0]])
    return run


def _max_weight(alpha):
    return lambda fam, grid: float(np.max(norms.weight_profile(fam, alpha, grid).w_values))


def _qn_verdict(alpha, nu):
    return lambda fam, grid: norms.quasi_negativity_test(fam, alpha, nu, grid).verdict


def _qn_constant(alpha, nu):
    return lambda fam, grid: norms.quasi_negativity_test(fam, alpha, nu, grid).K_measured


def _phi_identity(fam, grid):
    """Largest relative gap between ``phi_0(t, u)`` and ``||u(t)||`` over seeded bumps."""
    worst = 0.0
    for b in random_bumps(grid, fam.dim, 10):
        p = norms.phi_profile(fam, 0.0, b).phi_values
        nu = b.norms()
        worst = max(worst, float(np.max(np.abs(p - nu)) / max(1.0, np.max(nu))))
    return worst


def _resolvent_c(alpha):
    return lambda fam, grid: generator.estimate_resolvent_norm(fam, alpha, grid).c


def _resolvent_unbounded(alpha, grid_spec=None):
    def run(fam, grid):
        g = grid if grid_spec is None else grid_spec.build()
        return generator.estimate_resolvent_norm(fam, alpha, g).unbounded
    return run


def _certified_rate(alpha, delta=0.5):
    def run(fam, grid):
        r = generator.estimate_resolvent_norm(fam, alpha, grid)
        v = generator.certify_stability(fam, alpha, r, delta, grid)
        return v.rate if v.certified else 0.0
    return run


def _potential_at_zero(fam, grid):
    return float(fam.potential(np.array([0.0]))[0])


def _closed_form_gap(t, s):
    def run(fam, grid):
        d = t - s
        c, sn = math.cos(d), math.sin(d)
        exact = math.exp(-0.5 * d) * np.array([[c, sn], [-sn, c]])
        return float(np.max(np.abs(fam.evaluate(t, s) - exact)))
    return run


def _cocycle(fam, grid):
    return fam.cocycle_residual(3.0, 1.7, 0.4)


def _zero_at_origin(alpha):
    def run(fam, grid):
        f = GridFunction.zeros(grid, fam.dim)
        return float(np.max(np.abs(generator.apply_inverse(fam, f).values)))
    return run


# --- entries -----------------------------------------------------------------

EX1_GRID = GridSpec(200.0, 0.01)
EX2_GRID = GridSpec(1e4, 0.05, "log", 1e8)
MODEST = GridSpec(200.0, 0.01)

CATALOG = {
    "scalar_example1": CatalogEntry(
        "scalar_example1", example1, EX1_GRID,
        (
            KnownFact("ex1.inf_A", "left end of the admissible set", -1.0, 0.05,
                      "analytic: A = [-1, inf)", _inf_a((-2.0, 0.0))),
            KnownFact("ex1.lyapunov", "Lyapunov exponent", -1.0, 0.05,
                      "analytic: limsup of -(2+sin t)", _lyap),
            KnownFact("ex1.bohl_infinite", "Bohl exponent is infinite", math.inf, 0.0,
                      "analytic: not uniformly exponentially bounded", _bohl, "is"),
            KnownFact("ex1.nonstrict_-1", "rate -1 is not strict", False, 0.0,
                      "analytic: envelope exp(s(1+sin s)) unbounded", _strict(-1.0), "is"),
            KnownFact("ex1.nonstrict_0", "rate 0 is not strict", False, 0.0,
                      "analytic: envelope unbounded", _strict(0.0), "is"),
            KnownFact("ex1.nonstrict_5", "rate 5 is not strict", False, 0.0,
                      "analytic: envelope unbounded", _strict(5.0), "is"),
            # pi/2 is snapped to the nearest node; f1 has slope ~2 there
            KnownFact("ex1.sup_E1_at_pi/2", "ln W_{-1}(pi/2) equals pi", math.pi, 0.01,
                      "closed form s(1+sin s) at s=pi/2", _log_weight_at(-1.0, math.pi / 2)),
            KnownFact("ex1.quasi_negative", "C(U,0) = C(U,-1)", "equivalent", 0.0,
                      "analytic: norm ratio at most exp(2 pi)", _qn_verdict(0.0, 1.0), "is"),
            KnownFact("ex1.equivalence_constant", "norm-equivalence constant", math.exp(2 * math.pi),
                      0.01 * math.exp(2 * math.pi), "analytic: exp(2 pi (1 + alpha)) at alpha=0",
                      _qn_constant(0.0, 1.0), "le"),
            KnownFact("ex1.certified_at_0", "rate 0 certifies stability", 0.0, 0.0,
                      "analytic: every admissible rate is quasi-negative", _certified_rate(0.0), "gt"),
        ),
        alphas=(-0.5, 0.0, 1.0),
    ),
    "scalar_example2": CatalogEntry(
        "scalar_example2", example2, EX2_GRID,
        (
            KnownFact("ex2.inf_A", "left end of the admissible set", 1 - math.sqrt(2), 0.05,
                      "analytic: A = [1 - sqrt 2, inf)", _inf_a((-1.0, 0.0))),
            KnownFact("ex2.uniform_bound", "max_s W_0(s)", 1.0, 1e-9,
                      "analytic: ||U(t,s)|| <= 1", _max_weight(0.0), "le"),
            KnownFact("ex2.potential_at_0", "t sin ln t extended by 0 at t=0", 0.0, 0.0,
                      "continuity extension", _potential_at_zero),
            KnownFact("ex2.strict_0", "rate 0 is strict", True, 0.0,
                      "analytic: uniformly bounded", _strict(0.0), "is"),
            KnownFact("ex2.not_quasi_negative", "C(U,0) != C(U,-0.2)", "diverging", 0.0,
                      "analytic: only negative rates are quasi-negative",
                      _qn_verdict(0.0, 0.2), "is"),
            KnownFact("ex2.inverse_unbounded", "resolvent flags unbounded inverse at 0", True, 0.0,
                      "analytic: ratio witnesses grow like n",
                      _resolvent_unbounded(0.0, MODEST), "is"),
        ),
        alphas=(-0.3, 0.0, 1.0),
    ),
    "constant_decay": CatalogEntry(
        "constant_decay", lambda: ConstantDecay(1.0), GridSpec(200.0, 0.01),
        (
            KnownFact("cd.inf_A", "left end of the admissible set", -1.0, 0.05,
                      "closed form exp(-(t-s))", _inf_a((-2.0, 0.0))),
            KnownFact("cd.strict_0", "rate 0 is strict", True, 0.0,
                      "closed form", _strict(0.0), "is"),
            KnownFact("cd.phi_identity", "phi_0(t,u) = ||u(t)||", 0.0, 1e-12,
                      "closed form: decay makes the look-ahead trivial", _phi_identity, "le"),
            KnownFact("cd.resolvent_c", "resolvent norm at 0", 1.0, 0.1,
                      "closed form convolution with exp(-t)", _resolvent_c(0.0)),
            KnownFact("cd.certified_rate", "certified decay rate at 0", 0.45, 0.0,
                      "closed form comparison", _certified_rate(0.0), "ge"),
            KnownFact("cd.zero_map", "zero input gives zero output", 0.0, 0.0,
                      "linearity", _zero_at_origin(0.0), "le"),
        ),
        alphas=(-0.5, 0.0, 1.0),
    ),
    "matrix_ode": CatalogEntry(
        "matrix_ode", lambda: MatrixODE("damped_rotation", step=0.02, name="damped_rotation"),
        GridSpec(20.0, 0.02),
        (
            KnownFact("mo.inf_A", "left end of the admissible set", -0.5, 0.05,
                      "closed form exp(-(t-s)/2) rotation", _inf_a((-1.0, 0.0))),
            KnownFact("mo.closed_form", "RK4 versus the exact rotation at (2, 1)", 0.0, 10 * 0.02 ** 4,
                      "closed form", _closed_form_gap(2.0, 1.0), "le"),
            KnownFact("mo.cocycle", "cocycle residual", 0.0, 10 * 0.02 ** 4,
                      "composition law", _cocycle, "le"),
            KnownFact("mo.strict_0", "rate 0 is strict", True, 0.0,
                      "closed form", _strict(0.0), "is"),
        ),
        alphas=(-0.3, 0.0, 1.0),
        oracle_grid=GridSpec(20.0, 0.02),
    ),
}


def get_entry(name) -> CatalogEntry:
    try:
        return CATALOG[name]
    except KeyError:
        raise DomainError(f"unknown catalog entry {name!r}; known: {', '.join(CATALOG)}") from None


def catalog_facts(name) -> list:
    return list(get_entry(name).facts)


@dataclass
class FactResult:
    entry: str
    fact: KnownFact
    measured: object
    passed: bool
    error: str = ""


def check_entry(name, grid=None) -> list:
    entry = get_entry(name)
    family = entry.build()
    grid = entry.grid.build() if grid is None else grid
    out = []
    for fact in entry.facts:
        try:
            m, ok = fact.check(family, grid)
            out.append(FactResult(name, fact, m, ok))
        except Exception as exc:  # noqa: BLE001 - every failure is reported with its id
            out.append(FactResult(name, fact, None, False, f"{type(exc).__name__}: {exc}"))
    return out
