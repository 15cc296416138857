import math

import numpy as np
import pytest

from evoscope.errors import DomainError
from evoscope.exponents import (
    NONUNIFORM_EXP_STABLE, UNIFORM_EXP_BOUNDED, UNIFORM_EXP_STABLE, bohl_exponent, classify,
    inf_admissible, is_admissible, is_strict, lyapunov_exponent,
)
from evoscope.family import rescale
from evoscope.grid import TimeGrid

EX2_END = 1 - math.sqrt(2)


def test_lyapunov(cd, ex1, ex2, grid200, grid_ex2_log):
    assert lyapunov_exponent(cd, grid200) == pytest.approx(-1.0, abs=0.01)
    assert lyapunov_exponent(ex1, grid200) == pytest.approx(-1.0, abs=0.05)
    assert lyapunov_exponent(ex2, grid_ex2_log) == pytest.approx(EX2_END, abs=0.05)


def test_bohl(cd, ex1, ex2, grid200, grid_ex2_log):
    assert bohl_exponent(cd, grid200).value == pytest.approx(-1.0, abs=0.01)
    b1 = bohl_exponent(ex1, grid200)
    assert b1.value == math.inf and b1.diverging
    assert bohl_exponent(ex2, grid_ex2_log).value <= 0.05
    with pytest.raises(DomainError):
        bohl_exponent(cd, grid200, gap=1.0)


def test_admissibility_verdicts(cd, ex1, grid200):
    assert is_admissible(ex1, -1.0, grid200)
    bad = is_admissible(ex1, -1.2, grid200)
    assert not bad and bad.evidence is not None
    t, s = bad.evidence
    assert t > s
    assert is_admissible(cd, -1.0, grid200)


def test_strictness(ex1, ex2, grid200, grid_ex2_log):
    assert is_strict(ex2, 0.0, grid_ex2_log)
    assert not is_strict(ex2, -0.2, grid_ex2_log)
    for a in (-1.0, 0.0, 5.0):
        assert not is_strict(ex1, a, grid200)
    with pytest.raises(DomainError):
        is_strict(ex1, -1.5, grid200)


def test_inf_admissible(cd, ex1, ex2, grid200, grid_ex2_log):
    assert inf_admissible(ex1, grid200, (-2.0, 0.0), 0.02) == pytest.approx(-1.0, abs=0.05)
    assert inf_admissible(ex2, grid_ex2_log, (-1.0, 0.0), 0.02) == pytest.approx(EX2_END, abs=0.05)
    assert inf_admissible(cd, grid200, (-3.0, 0.0), 0.02) == pytest.approx(-1.0, abs=0.05)


def test_bracket_errors(cd, grid200):
    with pytest.raises(DomainError):
        inf_admissible(cd, grid200, (0.0, -1.0))
    with pytest.raises(DomainError):
        inf_admissible(cd, grid200, (-3.0, -2.0))  # upper end inadmissible
    with pytest.raises(DomainError):
        inf_admissible(cd, grid200, (-0.5, 0.0))  # lower end admissible


def test_example2_needs_log_sampling(ex2):
    # without the log-spaced sup nodes the finite horizon hides the ln t oscillation
    linear = TimeGrid.uniform(1e4, 0.05)
    try:
        est = inf_admissible(ex2, linear, (-1.0, 0.0), 0.02)
    except DomainError:
        est = None
    assert est is None or abs(est - EX2_END) > 0.05


def test_classification(cd, ex1, ex2, grid200, grid_ex2_log):
    assert UNIFORM_EXP_STABLE in classify(cd, grid200).classification
    r1 = classify(ex1, grid200)
    assert NONUNIFORM_EXP_STABLE in r1.classification and r1.K_B_estimate == math.inf
    assert UNIFORM_EXP_BOUNDED not in r1.classification
    r2 = classify(ex2, grid_ex2_log)
    assert {NONUNIFORM_EXP_STABLE, UNIFORM_EXP_BOUNDED} <= r2.classification
    assert UNIFORM_EXP_STABLE not in r2.classification
    assert r2.K_L_estimate <= r2.K_B_estimate
    assert "classification = " in r2.as_text()


def test_report_invariants(ex1, grid200):
    rep = classify(ex1, grid200, alphas=(-1.5, -0.5, 2.0))
    assert rep.inf_A_estimate >= rep.K_L_estimate - 0.02
    for a, adm, strict in rep.alpha_tested:
        assert adm or not strict


@pytest.mark.parametrize("fam", ["cd", "ex1"])
def test_interval_property(fam, grid200, request):
    f = request.getfixturevalue(fam)
    verdicts = [is_admissible(f, a, grid200).admissible for a in np.linspace(-2, 2, 21)]
    first = verdicts.index(True)
    assert all(verdicts[first:])


@pytest.mark.parametrize("fam", ["cd", "ex1"])
def test_inf_matches_lyapunov(fam, grid200, request):
    f = request.getfixturevalue(fam)
    est = inf_admissible(f, grid200, (-2.0, 0.0), 0.02)
    assert abs(est - lyapunov_exponent(f, grid200)) <= 0.02


@pytest.mark.parametrize("lam", [-1.0, 0.7])
def test_rescale_shifts_inf(ex1, grid200, lam):
    base = inf_admissible(ex1, grid200, (-2.0, 0.0), 0.02)
    shifted = inf_admissible(rescale(ex1, lam), grid200, (-2.0 - lam, -lam), 0.02)
    assert shifted == pytest.approx(base - lam, abs=2 * 0.02)


def test_matrix_family_exponents(damped):
    g = TimeGrid.uniform(20.0, 0.02)
    assert inf_admissible(damped, g, (-1.0, 0.0), 0.02) == pytest.approx(-0.5, abs=0.05)
    assert is_strict(damped, 0.0, g)
