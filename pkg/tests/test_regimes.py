import csv
import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sncpnet import regimes
from sncpnet.errors import InvalidParameterError

WORKED = [
    # alpha, gamma, nu, delta, e_C, regime
    (2.5, 0.2, 0.3, 2.5, 1.0, "I"),
    (2.5, 0.6, 0.3, 2.5, 0.5, "I"),
    (4.0, 0.3, 0.3, 2.5, 0.9, "II"),
    (4.0, 0.5, 0.3, 2.5, 0.15, "III"),
    (4.0, 0.48, 0.9, 2.1, 0.5355, "IV"),
    # first max-term is 2 - 1.68 + 0.2 = 0.52 > 0.48
    (3.5, 0.48, 0.8, 2.5, 0.52, "III"),
    (5.0, 0.5, 0.3, 2.5, -0.025, "V"),
]


def test_beta_examples():
    assert regimes.beta(4, 0.5, 2.5, 0.3) == pytest.approx(-0.175, abs=1e-12)
    assert regimes.beta(4, 0.2, 3.0, 0.4) == pytest.approx(0.6, abs=1e-12)
    assert regimes.beta(4, 0.48, 2.1, 0.9) == pytest.approx(0.037, abs=1e-12)


@pytest.mark.parametrize("alpha,gamma,nu,delta,e_c,regime", WORKED)
def test_worked_examples(alpha, gamma, nu, delta, e_c, regime):
    rep = regimes.scaling_exponent(alpha, gamma, delta, nu)
    assert rep.e_C == pytest.approx(e_c, abs=1e-12)
    assert rep.regime == regime


def test_max_terms_of_worked_examples():
    bv = regimes.branch_values(4.0, 0.5, 2.5, 0.3)
    assert (bv["first"], bv["second_neg"]) == pytest.approx((0.15, 0.0625), abs=1e-12)
    bv = regimes.branch_values(4.0, 0.48, 2.1, 0.9)
    assert (bv["first"], bv["second_pos"]) == pytest.approx((0.53, 0.5355), abs=1e-12)
    bv = regimes.branch_values(3.5, 0.48, 2.5, 0.8)
    assert (bv["first"], bv["second_neg"]) == pytest.approx((0.52, 0.48), abs=1e-12)
    bv = regimes.branch_values(5.0, 0.5, 2.5, 0.3)
    assert (bv["first"], bv["second_neg"]) == pytest.approx((-0.2, -0.025), abs=1e-12)


def test_branch_trace_consistent():
    rep = regimes.scaling_exponent(4.0, 0.48, 2.1, 0.9)
    labels = [c.label for c in rep.branch_trace]
    assert labels[:4] == ["alpha*gamma <= 1", "alpha <= 3", "(1-2gamma)/(alpha-2) >= gamma-nu/2", "beta > 0"]
    assert [c.holds for c in rep.branch_trace] == [False, False, False, True, False]
    assert rep.branch_trace[-1].margin == pytest.approx(0.53 - 0.5355)


def test_tie_is_regime_three():
    # choose gamma so that both max-terms agree exactly for beta <= 0
    alpha, delta, nu = 4.0, 2.5, 0.3
    # first - second_neg is linear in gamma; solve it
    f = lambda g: (lambda b: b["first"] - b["second_neg"])(regimes.branch_values(alpha, g, delta, nu))
    g0, g1 = 0.5, 0.6
    g = g0 - f(g0) * (g1 - g0) / (f(g1) - f(g0))
    rep = regimes.scaling_exponent(alpha, g, delta, nu)
    assert rep.branch_trace[-1].margin == pytest.approx(0, abs=1e-12)
    if rep.branch_trace[-1].margin == 0:
        assert rep.regime == "III"


@pytest.mark.parametrize("args", [(2.0, 0.3, 2.5, 0.3), (4, -0.1, 2.5, 0.3), (4, 0.3, 2.0, 0.3),
                                  (4, 0.3, 2.5, 0.0), (4, 0.3, 2.5, 1.0), (float("nan"), 0.3, 2.5, 0.3)])
def test_out_of_range(args):
    with pytest.raises(InvalidParameterError):
        regimes.scaling_exponent(*args)


alpha_s = st.floats(2.001, 8)
gamma_s = st.floats(0, 1.5)
delta_s = st.floats(2.001, 6)
nu_s = st.floats(0.001, 0.999)


@given(alpha_s, gamma_s, delta_s, nu_s)
def test_exponent_at_most_one(alpha, gamma, delta, nu):
    rep = regimes.scaling_exponent(alpha, gamma, delta, nu)
    assert rep.e_C <= 1.0
    assert (rep.e_C == 1.0) == (alpha * gamma <= 1.0) or rep.e_C == pytest.approx(1.0)
    assert rep.regime in regimes.REGIMES


@given(alpha_s, alpha_s, gamma_s, delta_s, nu_s)
def test_non_increasing_in_alpha(a1, a2, gamma, delta, nu):
    lo, hi = sorted((a1, a2))
    assert regimes.scaling_exponent(lo, gamma, delta, nu).e_C >= regimes.scaling_exponent(hi, gamma, delta, nu).e_C


@given(alpha_s, nu_s, nu_s, gamma_s, delta_s)
def test_non_decreasing_in_nu(alpha, n1, n2, gamma, delta):
    lo, hi = sorted((n1, n2))
    assert regimes.scaling_exponent(alpha, gamma, delta, lo).e_C <= regimes.scaling_exponent(alpha, gamma, delta, hi).e_C


def test_regime_map_structure():
    grid = regimes.regime_map((2, 6), (0, 1), 60, nu=0.3, delta=2.5)
    assert len(grid) == 60 and all(len(r) == 60 for r in grid)
    for row in grid:
        for r in row:
            in_one = r.alpha * r.gamma <= 1 or r.alpha <= 3
            assert (r.regime == "I") == in_one
            row3 = (1 - 2 * r.gamma) / (r.alpha - 2) >= r.gamma - r.nu / 2
            if not in_one:
                assert (r.regime == "II") == row3
            assert r.e_C <= 1


def test_regime_map_avoids_open_bound():
    grid = regimes.regime_map((2, 6), (0, 1), 2, nu=0.3, delta=2.5)
    assert grid[0][0].alpha == 3.0


def test_regime_map_rejects_bad_input():
    with pytest.raises(ValueError):
        regimes.regime_map((2, 6), (0, 1), 1, 0.3, 2.5)
    with pytest.raises(ValueError):
        regimes.regime_map((6, 2), (0, 1), 3, 0.3, 2.5)


def test_row_one_and_two_agree_on_boundary():
    for alpha in np.linspace(2.1, 3.0, 10):
        bv = regimes.branch_values(alpha, 1 / alpha, 2.5, 0.3)
        assert bv["row2"] == pytest.approx(bv["row1"], abs=1e-12)


def test_regime_map_csv():
    grid = regimes.regime_map((2, 6), (0, 1), 4, nu=0.3, delta=2.5)
    text = regimes.regime_map_csv(grid)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["alpha", "gamma", "beta", "e_C", "regime"]
    assert len(rows) == 17 and all(len(r) == 5 for r in rows)
