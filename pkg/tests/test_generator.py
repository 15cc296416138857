import math

import numpy as np
import pytest

from evoscope import oracle
from evoscope.errors import DegenerateInputError, DomainError, PropagationError
from evoscope.family import ScalarExponent
from evoscope.generator import (
    BatteryMember, ResolventEstimate, apply_inverse, certify_best, certify_stability,
    estimate_resolvent_norm, inverse_consistency_check, psi_witness_search, recheck_on_refined,
    resolvent_bound_check,
)
from evoscope.grid import GridFunction, TimeGrid
from evoscope.norms import phi_profile
from evoscope.witnesses import (
    PlateauSpec, make_plateau, make_psi_ratio_witness, make_witness_f, random_bumps, triangle_bump,
)


@pytest.fixture(scope="module")
def g20():
    return TimeGrid.uniform(20.0, 0.01)


def test_zero_in_zero_out(cd, g20):
    assert not np.any(apply_inverse(cd, GridFunction.zeros(g20)).values)


def test_closed_form_volterra(cd, g20):
    f = GridFunction(g20, g20.points * np.exp(-g20.points))
    u = apply_inverse(cd, f)
    # int_0^t e^{xi - t} xi e^{-xi} dxi = e^{-t} t^2 / 2
    assert u.values[g20.index(2.0), 0] == pytest.approx(2 * math.exp(-2), abs=10 * g20.h ** 2)
    assert u.values[g20.index(2.0), 0] == pytest.approx(0.27067, abs=1e-4)


def test_plateau_response(cd, g20):
    spec = PlateauSpec(1.0, 0.1, 20.0 - 0.1, 0.1)
    f = make_plateau(spec, g20)
    u = apply_inverse(cd, f)
    fn = lambda t: np.atleast_1d(spec(t))  # noqa: E731
    for t in (2.0, 5.0, 10.0):
        assert u.values[g20.index(t), 0] == pytest.approx(oracle.brute_volterra(cd, fn, t, 0.001)[0], abs=1e-4)
        assert u.values[g20.index(t), 0] == pytest.approx(1 - math.exp(-(t - 1)), abs=0.06)


def test_linearity_and_causality(ex1, g20):
    f, g = random_bumps(g20, 1, 2)
    lhs = apply_inverse(ex1, f * 2.5 + g * -0.75).values
    rhs = (apply_inverse(ex1, f) * 2.5 + apply_inverse(ex1, g) * -0.75).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))
    j = g20.index(9.0)
    full = apply_inverse(ex1, f).values[j]
    cut = apply_inverse(ex1, f.truncated_after(9.0)).values[j]
    assert np.array_equal(full, cut)


def test_overflow_is_reported():
    fam = ScalarExponent(potential=lambda t: -np.asarray(t) ** 2, name="blowup")
    g = TimeGrid.uniform(40.0, 0.01)
    with pytest.raises(PropagationError, match="t="):
        apply_inverse(fam, GridFunction(g, np.ones(g.nf)))


def test_resolvent_bound(cd, ex1, g20):
    assert resolvent_bound_check(cd, -0.5, GridFunction.zeros(g20)) == 0.0
    for f in random_bumps(g20, 1, 20):
        assert resolvent_bound_check(cd, -0.5, f) >= 0
    w = make_witness_f(ex1, -0.5, 1.0, [1.0], 8, g20)
    assert resolvent_bound_check(ex1, -0.5, w) >= 0
    with pytest.raises(DomainError):
        resolvent_bound_check(cd, 0.0, w)


def test_decay_transfer(ex1, g20):
    alpha = -0.5
    for f in random_bumps(g20, 1, 5):
        pu = phi_profile(ex1, alpha, apply_inverse(ex1, f)).phi_values
        pf = phi_profile(ex1, alpha, f).phi_values
        t = g20.points
        # int_0^t e^{alpha (t - xi)} phi(xi, f) dxi by cumulative trapezoid
        w = np.exp(-alpha * t) * pf
        cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (w[1:] + w[:-1]))])
        bound = np.exp(alpha * t) * cum
        assert np.all(pu <= bound + 1e-3 * np.max(bound))


def test_resolvent_estimates(cd, g20, grid200):
    est = estimate_resolvent_norm(cd, 0.0, grid200)
    assert 0.9 <= est.c <= 1.1
    assert est.c == max(est.ratio_history)
    assert all(r <= est.c for r in est.ratio_history)
    assert estimate_resolvent_norm(cd, -0.5, grid200).c <= 2.05
    with pytest.raises(DegenerateInputError):
        estimate_resolvent_norm(cd, 0.0, g20, battery=[BatteryMember("zero", GridFunction.zeros(g20))])


def test_example2_inverse_unbounded(ex2, grid200):
    est = estimate_resolvent_norm(ex2, 0.0, grid200)
    assert est.unbounded
    assert "inverse_unbounded = true" in est.as_text()


@pytest.mark.parametrize("n", [4, 8, 16])
def test_psi_ratio_near_n(ex2, grid200, n):
    ratio, u, f = psi_witness_search(ex2, 0.0, n, grid200)
    assert 0.9 * n <= ratio <= 1.1 * n
    direct = phi_profile(ex2, 0.0, u).norm / phi_profile(ex2, 0.0, f).norm
    assert direct == pytest.approx(ratio, rel=1e-12)


def test_psi_witness_explicit_parameters(ex2, grid200):
    # a start in the flat stretch of the potential around t = 50.75
    u, f = make_psi_ratio_witness(ex2, 0.0, 8, 44.0, [1.0], 56.0, grid200)
    ratio = phi_profile(ex2, 0.0, u).norm / phi_profile(ex2, 0.0, f).norm
    assert 0.9 * 8 <= ratio <= 1.1 * 8


def test_certify_constant_decay(cd, grid200):
    est = estimate_resolvent_norm(cd, 0.0, grid200)
    v = certify_stability(cd, 0.0, est, 0.5, grid200)
    assert v.certified and v.rate >= 0.45 and v.measured_margin >= 0
    assert v.prefactor(0.0) <= 2.1
    assert v.uniform_bound_ok and all(v.power_bounds_ok.values())
    assert recheck_on_refined(cd, v).certified
    best = certify_best(cd, 0.0, est, grid200)
    assert best.rate >= v.rate and best.delta == 0.75


def test_certify_example1(ex1, grid200):
    est = estimate_resolvent_norm(ex1, 0.0, grid200)
    assert not est.unbounded
    v = certify_stability(ex1, 0.0, est, 0.5, grid200)
    assert v.certified and v.rate > 0 and v.measured_margin >= -1e-9
    assert v.uniform_bound_ok


def test_certify_refuses_unbounded(ex2, grid200):
    est = estimate_resolvent_norm(ex2, 0.0, grid200)
    v = certify_stability(ex2, 0.0, est, 0.5, grid200)
    assert v.verdict == "not_certified" and "unbounded" in v.reason


def test_certify_domain(cd, grid200):
    est = ResolventEstimate(0.0, 1.0, "given", 1)
    for d in (0.0, 1.0, -0.1):
        with pytest.raises(DomainError):
            certify_stability(cd, 0.0, est, d, grid200)
    with pytest.raises(DomainError):
        certify_stability(cd, -0.5, est, 0.5, grid200)


def test_underestimated_c_is_caught(cd, grid200):
    # a far too small c predicts decay faster than the family has
    est = ResolventEstimate(0.0, 0.2, "given", 1)
    v = certify_stability(cd, 0.0, est, 0.9, grid200)
    assert not v.certified


def test_inverse_consistency(cd, ex1, g20):
    assert inverse_consistency_check(cd, GridFunction.zeros(g20), [(1.0, 3.0)]) == 0.0
    bump = triangle_bump(g20, 2.0, 1.5)
    assert inverse_consistency_check(cd, bump, [(1.0, 3.0)]) <= 10 * g20.h ** 2
    for s, t in [(1.0, 3.0), (4.0, 9.0)]:
        scale = max(1.0, float(np.max(np.abs(apply_inverse(ex1, bump).values))))
        assert inverse_consistency_check(ex1, bump, [(s, t)]) <= 10 * g20.h ** 2 * scale


def test_matrix_inverse_against_oracle(damped):
    g = TimeGrid.uniform(10.0, 0.02)
    spec = PlateauSpec(1.0, 1.0, 5.0, 1.0)
    x = np.array([0.6, -0.8])
    f = GridFunction(g, spec(g.points)[:, None] * x)
    u = apply_inverse(damped, f)
    for t in (2.0, 6.0):
        ref = oracle.brute_volterra(damped, lambda s: spec(s) * x, t, 0.005)
        assert np.max(np.abs(u.values[g.index(t)] - ref)) <= 1e-3 * np.max(np.abs(ref))
