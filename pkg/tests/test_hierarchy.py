import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sncpnet import hierarchy as h
from sncpnet import sncp
from sncpnet.errors import SupercriticalMuError, WrongConditionError
from sncpnet.params import ModelParams

SMALL = ModelParams(1e4, 0.25, 0.3, delta=2.5, mu=0.5)
MID = ModelParams(2.0**14, 0.4, 0.3, delta=2.5, alpha=4.0, mu=0.5)


def bfs_components(pts, d, L):
    m = len(pts)
    diff = np.abs(pts[:, None, :] - pts[None, :, :])
    diff = np.minimum(diff, L - diff)
    adj = np.hypot(diff[..., 0], diff[..., 1]) <= 2 * d
    seen = np.zeros(m, bool)
    out = []
    for s in range(m):
        if seen[s]:
            continue
        comp, queue = [], deque([s])
        seen[s] = True
        while queue:
            v = queue.popleft()
            comp.append(v)
            for w in np.flatnonzero(adj[v] & ~seen):
                seen[w] = True
                queue.append(w)
        out.append(sorted(comp))
    return sorted(out)


def build(params, seed, samples=10_000):
    stream = sncp.replica_stream(0, seed)
    topo = sncp.sample_topology(params, stream)
    return topo, h.build_hierarchy(topo, params, sncp.substream(stream, 6), area_samples=samples)


# radii and depth

def test_radii_example():
    d = h.layer_radii(SMALL, count=3)
    assert SMALL.d_c == pytest.approx(2.512, abs=1e-3)
    assert d[0] == pytest.approx(1.256, abs=1e-3)
    assert d[1] == d[0] * 2**-0.4
    # the quoted 0.9520 was rounded from d_1 = 1.256
    assert d[1] == pytest.approx(0.9520, rel=5e-4)


def test_radii_ratio_constant():
    d = h.layer_radii(SMALL, count=8)
    ratios = [a / b for a, b in zip(d, d[1:])]
    assert np.allclose(ratios, 2 ** (1 / 2.5), rtol=1e-12)
    assert (d[0] / d[1]) ** 2 == pytest.approx(1.741, abs=1e-3)


def test_supercritical_mu():
    with pytest.raises(SupercriticalMuError):
        h.layer_radii(SMALL, mu=0.6)
    with pytest.raises(SupercriticalMuError):
        ModelParams(1e4, 0.25, 0.3, mu=0.7)


def test_kmax_example():
    d1 = 0.5 * SMALL.d_c
    lam1 = SMALL.q * d1**-2.5
    assert lam1 == pytest.approx(357, rel=2e-3)
    assert h.k_max(SMALL, lam1) == 3


def test_kmax_unit_ratio():
    assert h.k_max(SMALL, SMALL.q * math.log(SMALL.m)) == 1


@settings(max_examples=200)
@given(st.floats(1e-6, 1e12))
def test_kmax_bounds(lam):
    assert 1 <= h.k_max(SMALL, lam) <= 64


def test_kmax_grows_like_log_n():
    c = []
    for e in range(12, 22, 2):
        p = ModelParams(2.0**e, 0.4, 0.3, delta=2.5, mu=0.5)
        d1 = p.mu * p.d_c
        c.append(h.k_max(p, p.q * d1**-p.delta) / math.log2(p.n))
    assert max(c) / min(c) <= 2


def test_intensities_double_exactly():
    lams = h.layer_intensities(MID, h.layer_radii(MID, count=10))
    for a, b in zip(lams, lams[1:]):
        assert b / a == pytest.approx(2.0, rel=1e-12)
    assert lams[0] == pytest.approx(MID.q * (MID.mu * MID.d_c) ** -MID.delta, rel=1e-12)


# components

def test_two_far_centres_two_components():
    assert len(h.components_at_radius([[0, 0], [3, 0]], 1.0, 20.0)) == 2


def test_two_close_centres_one_component():
    assert len(h.components_at_radius([[0, 0], [1.5, 0]], 1.0, 20.0)) == 1


def test_components_wrap_around():
    assert len(h.components_at_radius([[0.2, 5], [19.5, 5]], 1.0, 20.0)) == 1


def test_no_centres():
    assert h.components_at_radius(np.empty((0, 2)), 1.0, 20.0) == []


@settings(max_examples=20)
@given(st.integers(1, 500), st.floats(0.1, 3.0), st.integers(0, 10**6))
def test_components_match_bfs(m, d, seed):
    L = 40.0
    pts = np.random.default_rng(seed).uniform(0, L, (m, 2))
    got = sorted(g.tolist() for g in h.components_at_radius(pts, d, L))
    assert got == bfs_components(pts, d, L)


# areas

def test_single_centre_area():
    a, z = h.area_estimates([[5.0, 5.0]], 1.2, 20.0, 100_000, 0)
    assert a == pytest.approx(math.pi * 1.44, rel=0.02)
    assert z == pytest.approx(1.0)


def test_merged_chain_zeta_below_one():
    a, z = h.area_estimates([[5.0, 5.0], [8.0, 5.0], [6.5, 5.0]], 1.0, 20.0, 100_000, 1)
    assert 0 < z < 1
    assert math.pi <= a <= 3 * math.pi


def test_area_matches_box_sampling():
    rng = np.random.default_rng(2)
    pts = rng.uniform(40, 46, (6, 2))
    d = 1.3
    lo, hi = pts.min(0) - d, pts.max(0) + d
    x = rng.uniform(lo, hi, (400_000, 2))
    hit = (np.hypot(*(x[:, None, :] - pts[None]).transpose(2, 0, 1)) <= d).any(1)
    box = hit.mean() * np.prod(hi - lo)
    a, _ = h.area_estimates(pts, d, 100.0, 200_000, 3)
    assert a == pytest.approx(box, rel=0.02)


def test_area_across_wrap_equals_unwrapped():
    pts = np.array([[0.5, 10.0], [19.8, 10.4], [1.4, 11.0]])
    shifted = np.mod(pts + [5.0, 0.0], 20.0)
    a, _ = h.area_estimates(pts, 1.0, 20.0, 100_000, 4)
    b, _ = h.area_estimates(shifted, 1.0, 20.0, 100_000, 4)
    assert a == pytest.approx(b, rel=1e-12)


# hierarchy structure

def test_hierarchy_requires_sparse():
    p = ModelParams(1e4, 0.25, 0.6)
    with pytest.raises(WrongConditionError):
        h.build_hierarchy(sncp.sample_topology(p, 1), p)


@pytest.fixture(scope="module")
def mid_hierarchies():
    return [build(MID, s) for s in range(5)]


def test_layer_zero_is_whole_area(mid_hierarchies):
    topo, hier = mid_hierarchies[0]
    lay0 = hier.layers[0]
    assert lay0.d_k is None
    assert lay0.infrastructure.kind == "sparse"
    assert lay0.components[0].size == topo.n_centres
    assert lay0.lambda_k == lay0.infrastructure.target_intensity


def test_domains_nest(mid_hierarchies):
    for _, hier in mid_hierarchies:
        doms = [layer.domain for layer in hier.layers]
        for outer, inner in zip(doms, doms[1:]):
            assert not np.any(inner & ~outer)


def test_layer_members_inside_domain(mid_hierarchies):
    for _, hier in mid_hierarchies:
        for layer in hier.layers[1:]:
            assert np.all(layer.domain[layer.infrastructure.members])


def test_radii_decrease_and_intensities_double(mid_hierarchies):
    for _, hier in mid_hierarchies:
        lay = hier.layers[1:]
        assert all(a.d_k > b.d_k for a, b in zip(lay, lay[1:]))
        assert all(b.lambda_k / a.lambda_k == pytest.approx(2, rel=1e-12) for a, b in zip(lay, lay[1:]))
        assert hier.k_max >= 1


def test_components_partition_and_children_partition(mid_hierarchies):
    for topo, hier in mid_hierarchies:
        for layer in hier.layers:
            ids = np.sort(np.concatenate([c.centre_indices for c in layer.components]))
            assert np.array_equal(ids, np.arange(topo.n_centres))
            assert all(0 < c.zeta <= 1 for c in layer.components)
        for parent, child in zip(hier.layers, hier.layers[1:]):
            for comp in parent.components:
                got = np.sort(np.concatenate(
                    [child.components[i].centre_indices for i in comp.nested_children]
                    or [np.zeros(0, np.int64)]))
                assert np.array_equal(got, comp.centre_indices)


def test_zeta_rises_on_average(mid_hierarchies):
    ok = 0
    for _, hier in mid_hierarchies:
        z = [np.mean([c.zeta for c in layer.components]) for layer in hier.layers[1:]]
        ok += len(z) < 2 or np.mean(np.diff(z)) >= 0
    assert ok / len(mid_hierarchies) >= 0.9


def test_layer_one_size_scale_stable():
    ratios = []
    for n in (2.0**14, 2.0**15):
        p = MID.with_n(n)
        sizes = [max(c.size for c in build(p, s)[1].layers[1].components) for s in range(5)]
        ratios.append(np.median(sizes) / math.log(n))
    assert max(ratios) / min(ratios) <= 2


def test_hierarchy_deterministic():
    _, a = build(MID, 3)
    _, b = build(MID, 3)
    assert a.layer_table() == b.layer_table()
    for la, lb in zip(a.layers, b.layers):
        assert np.array_equal(la.infrastructure.members, lb.infrastructure.members)


# bottleneck

def test_single_domain_layer_vacuous(mid_hierarchies):
    _, hier = mid_hierarchies[0]
    short = h.Hierarchy(hier.layers[:2], 1, hier.mu)
    rep = h.bottleneck_check(short, MID)
    assert rep.checked == 0 and rep.fraction_ok == 1.0
    assert "single-domain-layer" in rep.flags


def test_children_carry_more_nodes(mid_hierarchies):
    for _, hier in mid_hierarchies:
        for parent, child in zip(hier.layers[1:], hier.layers[2:]):
            for comp in parent.components:
                kids = sum(child.lambda_k * child.components[i].area for i in comp.nested_children)
                assert kids >= parent.lambda_k * comp.area


def test_bottleneck_monotone_on_small_sweep(mid_hierarchies):
    reps = [h.bottleneck_check(hier, MID) for _, hier in mid_hierarchies]
    checked = sum(r.checked for r in reps)
    bad = sum(len(r.violations) for r in reps)
    assert checked > 0
    assert 1 - bad / checked >= 0.9
    assert all(r.layer0_is_min for r in reps)
    for r in reps:
        for v in r.violations:
            assert v["children_capacity"] < v["capacity"]
