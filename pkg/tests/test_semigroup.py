import math

import numpy as np
import pytest

from evoscope.errors import DomainError
from evoscope.family import MatrixODE
from evoscope.grid import GridFunction, TimeGrid
from evoscope.norms import membership_C
from evoscope.semigroup import (
    SemigroupAction, apply, growth_bound_check, rescaling_invariance_check, semigroup_law_residual,
    shifted_phi_domination, strong_continuity_probe, transport,
)
from evoscope.witnesses import PlateauSpec, make_plateau, random_bumps, triangle_bump

SHIFTS = (0.32, 0.16, 0.08, 0.04, 0.02, 0.01)


@pytest.fixture(scope="module")
def g20():
    return TimeGrid.uniform(20.0, 0.01)


def test_zero_shift_is_identity(ex1, g20):
    u = random_bumps(g20, 1, 1)[0]
    assert np.array_equal(transport(ex1, 0.0, 0.0, u).values, u.values)


def test_zero_branch_and_transport(cd, g20):
    u = GridFunction(g20, np.ones(g20.nf))
    out = transport(cd, 0.0, 1.0, u)
    assert not np.any(out.values[: g20.index(1.0) + 1])
    bump = triangle_bump(g20, 2.0, 0.5, [3.0])
    moved = transport(cd, 0.0, 1.0, bump)
    assert moved.values[g20.index(3.0), 0] == pytest.approx(3.0 * math.exp(-1), rel=1e-14)


def test_misaligned_shift(cd, g20):
    u = GridFunction.zeros(g20)
    with pytest.raises(DomainError):
        transport(cd, 0.0, 0.005, u)
    with pytest.raises(DomainError):
        SemigroupAction(cd, 0.0, -1.0)


@pytest.mark.parametrize("fam", ["cd", "ex1", "ex2"])
def test_law_scalar_families(fam, g20, request):
    f = request.getfixturevalue(fam)
    for u in random_bumps(g20, 1, 10):
        assert semigroup_law_residual(f, 0.0, 0.0, 1.0, u) == 0.0
        assert semigroup_law_residual(f, 0.0, 0.37, 1.21, u) <= 1e-12


def test_law_rotation():
    rot = MatrixODE("rotation", step=0.01)
    g = TimeGrid.uniform(10.0, 0.01)
    for u in random_bumps(g, 2, 3):
        assert semigroup_law_residual(rot, 0.0, 0.5, 0.5, u) <= 10 * rot.tolerance


def test_growth_bound(cd, ex1, g20):
    for u in random_bumps(g20, 1, 10):
        assert growth_bound_check(cd, 0.0, 1.0, u) >= 0
        assert growth_bound_check(cd, 0.0, 0.0, u) == 0.0
    bump = make_plateau(PlateauSpec(2.0, 0.5, 3.5, 0.5), g20)
    assert growth_bound_check(ex1, -1.0, 2.0, bump) >= 0


def test_strong_continuity(cd, ex1, g20):
    zero = strong_continuity_probe(cd, 0.0, GridFunction.zeros(g20), SHIFTS)
    assert all(r == 0 for _, r in zero)
    tri = triangle_bump(g20, 5.0, 1.0)
    res = [r for _, r in strong_continuity_probe(cd, 0.0, tri, SHIFTS)]
    assert all(a > b for a, b in zip(res, res[1:]))
    plate = make_plateau(PlateauSpec(2.0, 0.5, 3.5, 0.5), g20)
    res = [r for _, r in strong_continuity_probe(ex1, -1.0, plate, SHIFTS)]
    assert res[-1] < res[0]
    # O(t): residual over shift roughly constant
    ratios = [r / t for t, r in zip(SHIFTS, res)]
    assert max(ratios) <= 4 * min(ratios)


def test_rescaling_invariance(cd, ex1, g20):
    u = random_bumps(g20, 1, 1)[0]
    assert rescaling_invariance_check(ex1, 0.0, 0.0, u) == 0.0
    assert rescaling_invariance_check(ex1, 0.0, 0.7, u) <= 1e-9
    assert rescaling_invariance_check(cd, -0.5, -0.5, u) <= 1e-9


def test_membership_preserved(ex1, g20):
    for u in random_bumps(g20, 1, 10, t_hi=12.0):
        before = membership_C(ex1, 0.0, u).member
        after = membership_C(ex1, 0.0, transport(ex1, 0.0, 1.0, u)).member
        assert before == after


@pytest.mark.parametrize("fam,alpha", [("cd", 0.0), ("ex1", -1.0), ("ex1", 0.5), ("ex2", -0.2)])
def test_shifted_phi_domination(fam, alpha, g20, request):
    f = request.getfixturevalue(fam)
    for u in random_bumps(g20, 1, 5):
        assert shifted_phi_domination(f, alpha, 1.5, u) <= 1e-12


def test_apply_via_action(cd, g20):
    u = random_bumps(g20, 1, 1)[0]
    act = SemigroupAction(cd, 0.0, 0.5)
    assert np.array_equal(act(u).values, apply(act, u).values)
