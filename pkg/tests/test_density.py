import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sncpnet import density, sncp
from sncpnet.density import Condition
from sncpnet.params import ModelParams


def test_compute_dc_examples():
    assert density.compute_dc(ModelParams(1e4, 0.25, 0.6)) == pytest.approx(10**-0.2)
    assert density.compute_dc(ModelParams(1e4, 0.25, 0.3)) == pytest.approx(10**0.4)
    for n in (10.0, 1e3, 1e6):
        assert density.compute_dc(ModelParams(n, 0.15, 0.3)) == 1.0


def test_classification_examples():
    assert density.classify_density_condition(ModelParams(1e4, 0.25, 0.6)) is Condition.DENSE
    assert density.classify_density_condition(ModelParams(1e4, 0.25, 0.3)) is Condition.SPARSE
    assert density.classify_density_condition(ModelParams(1e4, 0.15, 0.3)) is Condition.CRITICAL


@given(st.floats(2, 1e8), st.floats(0, 1), st.floats(0.01, 0.99))
def test_classification_matches_sign_of_log_dc(n, gamma, nu):
    p = ModelParams(n, gamma, nu)
    cond = density.classify_density_condition(p)
    expo = gamma - nu / 2
    if expo < 0:
        assert cond is Condition.DENSE
    elif expo > 0:
        assert cond is Condition.SPARSE
    else:
        assert cond is Condition.CRITICAL


def test_eta_is_exact():
    p = ModelParams(1e4, 0.25, 0.3)
    assert density.compute_eta(p) == p.d_c * math.sqrt(math.log(p.m))


def test_extrema_single_centre_on_grid():
    p = ModelParams(1e4, 0.25, 0.3)
    t = sncp.from_points(p, [(5.0, 5.0)])
    lo, hi = density.intensity_extrema(t, 0.1)
    assert hi == pytest.approx(p.q)
    assert 0 < lo < hi


def test_extrema_refinement_is_monotone():
    p = ModelParams(4096, 0.3, 0.3)
    t = sncp.sample_topology(p, 4)
    coarse = density.intensity_extrema(t, 0.2)
    fine = density.intensity_extrema(t, 0.1)
    assert fine[1] >= coarse[1]
    assert fine[0] <= coarse[0]


def test_extrema_empty_and_bad_resolution():
    p = ModelParams(100, 0.5, 0.5)
    assert density.intensity_extrema(sncp.from_points(p, np.zeros((0, 2))), 0.5) == (0.0, 0.0)
    with pytest.raises(ValueError):
        density.intensity_extrema(sncp.from_points(p, [(1, 1)]), 0.0)
    with pytest.raises(ValueError):
        density.intensity_extrema(sncp.from_points(p, [(1, 1)]), 11.0)


def test_default_resolution():
    assert density.default_grid_resolution(ModelParams(1e4, 0.25, 0.3)) == 0.1
    p = ModelParams(1e4, 0.25, 0.6)
    assert density.default_grid_resolution(p) == pytest.approx(p.d_c / 10)


def test_dense_constants_bounded_and_stable():
    reports = [density.verify_lemma1(ModelParams(n, 0.2, 0.6), 5) for n in (1e5, 2e5)]
    ratios = [r.fitted_constants["G1"] / r.fitted_constants["g1"] for r in reports]
    assert all(r <= 8 for r in ratios)
    assert max(ratios) / min(ratios) <= 2
    for r in reports:
        assert r.condition is Condition.DENSE and r.verifiable
        assert r.phi_inf <= r.phi_sup


def test_sparse_upper_constant_stable():
    params = [ModelParams(n, 0.4, 0.3, delta=2.5) for n in (1e5, 2e5)]
    reports = [density.verify_lemma1(p, 5) for p in params]
    g2 = [r.fitted_constants["G2"] for r in reports]
    assert max(g2) / min(g2) <= 2
    scale = density.lemma1_reference(params[1])["sparse_upper"]
    assert reports[1].phi_sup <= 2 * g2[0] * scale


def test_single_cluster_degenerate_fit():
    p = ModelParams(1e4, 0.25, 0.3)
    t = sncp.from_points(p, [(5, 5)])
    lo, hi = density.intensity_extrema(t, 0.1)
    rep = density.lemma1_report(p, [(lo, hi)], 0.1)
    assert rep.replicas == 1
    ref = density.lemma1_reference(p)
    assert rep.fitted_constants["G2"] == pytest.approx(hi / ref["sparse_upper"])
    assert rep.fitted_constants["g2"] == pytest.approx(lo / ref["sparse_lower"])
    assert "degenerate-fit" not in rep.flags


def test_lemma1_critical_is_unverifiable():
    rep = density.verify_lemma1(ModelParams(4096, 0.15, 0.3), 1)
    assert not rep.verifiable
    assert "critical-condition-unverifiable" in rep.flags
    assert rep.to_dict()["condition"] == "critical"


def test_plateau_flag():
    p = ModelParams(100, 0.101, 0.2)
    rep = density.lemma1_report(p, [(1.0, 2.0)], 0.1)
    assert density.compute_eta(p) < 1
    assert "lower-expression-on-kernel-plateau" in rep.flags
