"""Nested-domain hierarchy over cluster centres.

Layer 0 is the whole torus carrying the sparse infrastructure.  Layer
``k >= 1`` is the domain ``O_k`` of nodes within ``d_k`` of some centre,
``d_k = mu d_c 2**(-(k-1)/delta)``, thinned to ``lambda_k = q d_k**-delta``
so that intensities double from one layer to the next.

``lambda_k`` is reported in the unnormalized units of
``sncp.local_intensity``; the thinning itself runs at ``lambda_k / Z`` in
true units (``Z = sncp.kernel_normalizer``).

Random sub-streams of the ``stream`` given to ``build_hierarchy``:
``(0,)`` layer-0 thinning, ``(1, k)`` layer-k thinning, ``(2, k, j)`` area
samples of component ``j`` at layer ``k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import DisjointSet
from scipy.spatial import cKDTree

from . import density, infrastructure as infra_mod, sncp
from .density import Condition
from .errors import InvalidParameterError, SupercriticalMuError, WrongConditionError
from .hpp import HppParams, hpp_capacity
from .params import MU_PERCOLATION, ModelParams
from .sncp import Topology

K_MAX_CAP = 64
BOTTLENECK_EPSILON = 0.01


@dataclass
class Component:
    centre_indices: np.ndarray
    area: float
    zeta: float
    nested_children: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return int(self.centre_indices.size)

    def to_dict(self) -> dict:
        return {"centre_indices": self.centre_indices.tolist(), "area": self.area,
                "zeta": self.zeta, "nested_children": list(self.nested_children)}


@dataclass
class DomainLayer:
    k: int
    d_k: float | None
    lambda_k: float
    components: list
    infrastructure: infra_mod.Infrastructure | None
    domain: np.ndarray | None = None
    thinning_intensity: float | None = None

    @property
    def n_components(self) -> int:
        return len(self.components)


@dataclass
class Hierarchy:
    layers: list
    k_max: int
    mu: float
    flags: list = field(default_factory=list)

    def layer_table(self) -> list:
        """Rows ``(k, d_k, lambda_k, J_k, max_centres, min_area, max_area)``."""
        rows = []
        for layer in self.layers:
            sizes = [c.size for c in layer.components] or [0]
            areas = [c.area for c in layer.components] or [math.nan]
            rows.append((layer.k, layer.d_k if layer.d_k is not None else math.nan, layer.lambda_k,
                         layer.n_components, max(sizes), min(areas), max(areas)))
        return rows


def layer_radii(params: ModelParams, count: int | None = None, mu: float | None = None) -> list:
    """``[d_1, ..., d_count]`` with ``d_1 = mu d_c`` and ratio ``2**(-1/delta)``.

    ``count`` defaults to ``k_max`` for these parameters.
    """
    mu = params.mu if mu is None else mu
    if not mu < MU_PERCOLATION:
        raise SupercriticalMuError(f"mu={mu} is at or above the percolation threshold {MU_PERCOLATION}")
    if not mu > 0:
        raise InvalidParameterError("mu must be > 0")
    d1 = mu * params.d_c
    if count is None:
        count = k_max(params, params.q * d1**-params.delta)
    return [d1 * 2.0 ** (-(k - 1) / params.delta) for k in range(1, count + 1)]


def layer_intensities(params: ModelParams, radii) -> list:
    """``lambda_k`` built as ``lambda_1 * 2**(k-1)`` so the doubling is exact."""
    if not radii:
        return []
    lam1 = params.q * radii[0] ** -params.delta
    return [lam1 * 2.0 ** (k - 1) for k in range(1, len(radii) + 1)]


def k_max(params: ModelParams, lambda1: float) -> int:
    """``1 + floor(log2(q ln(m) / lambda1))`` clamped to ``[1, 64]``."""
    if not lambda1 > 0:
        raise ValueError("lambda1 must be > 0")
    top = params.q * math.log(params.m) if params.m > 1 else 0.0
    if top <= 0:
        return 1
    ratio = top / lambda1
    k = 1 + math.floor(math.log2(ratio)) if ratio > 0 else 1
    return int(min(max(k, 1), K_MAX_CAP))


def components_at_radius(centres, d_k: float, L: float) -> list:
    """Connected components of the disc graph with edges at distance ``<= 2 d_k``.

    Candidate pairs come from a periodic k-d tree; components are merged
    with a disjoint-set forest.  Returns sorted index arrays, ordered by
    their smallest member.
    """
    if not d_k > 0:
        raise ValueError("d_k must be > 0")
    pts = np.asarray(centres, dtype=float).reshape(-1, 2)
    m = pts.shape[0]
    if m == 0:
        return []
    ds = DisjointSet(range(m))
    if m > 1:
        tree = cKDTree(np.mod(pts, L), boxsize=L)
        pairs = tree.query_pairs(2.0 * d_k, output_type="ndarray")
        for a, b in pairs:
            ds.merge(int(a), int(b))
    groups = [np.array(sorted(s), dtype=np.int64) for s in ds.subsets()]
    groups.sort(key=lambda g: int(g[0]))
    return groups


def area_estimates(centres, d_k: float, L: float, samples: int = 100_000, stream=None):
    """Area of the union of discs of radius ``d_k`` and its overlap ratio ``zeta``.

    Points are drawn uniformly from a uniformly chosen disc, so the density
    at ``x`` is ``c(x) / (M pi d_k**2)`` with ``c(x)`` the number of discs
    covering ``x``; the mean of ``1 / c`` then estimates ``zeta`` without
    bias.  This keeps ``pi d_k**2 <= area <= M pi d_k**2`` for every draw.
    """
    pts = np.asarray(centres, dtype=float).reshape(-1, 2)
    m = pts.shape[0]
    disc = math.pi * d_k**2
    if m == 0:
        return 0.0, math.nan
    if m == 1:
        return disc, 1.0
    rng = sncp._generator(sncp.as_stream(stream))
    pick = rng.integers(0, m, size=samples)
    r = d_k * np.sqrt(rng.random(samples))
    t = 2.0 * math.pi * rng.random(samples)
    x = np.mod(pts[pick] + np.column_stack((r * np.cos(t), r * np.sin(t))), L)
    tree = cKDTree(np.mod(pts, L), boxsize=L)
    cover = tree.query_ball_point(x, d_k, return_length=True)
    cover = np.maximum(cover, 1)
    zeta = float(np.mean(1.0 / cover))
    return m * disc * zeta, zeta


def domain_membership(topology: Topology, radii) -> np.ndarray:
    """Boolean ``(K, N)`` matrix, row ``k-1`` marks nodes within ``d_k`` of a centre."""
    if topology.n_centres == 0 or topology.n_nodes == 0:
        return np.zeros((len(radii), topology.n_nodes), dtype=bool)
    tree = cKDTree(topology.centres, boxsize=topology.edge)
    dmin, _ = tree.query(np.mod(topology.nodes, topology.edge))
    return np.array([dmin <= d for d in radii], dtype=bool).reshape(len(radii), -1)


def build_hierarchy(topology: Topology, params: ModelParams | None = None, stream=None, *,
                    area_samples: int = 100_000, phi_inf: float | None = None) -> Hierarchy:
    """Layers ``0..K_max`` with domains, components, areas and thinned members.

    A layer whose intensity exceeds the minimum density at its own domain
    members cannot be thinned; building stops there and the truncation is
    flagged.
    """
    params = topology.params if params is None else params
    cond = density.classify_density_condition(params)
    if cond is not Condition.SPARSE:
        raise WrongConditionError(f"hierarchy needs the cluster-sparse condition, got {cond.value}")
    stream = sncp.as_stream(stream)
    L = topology.edge
    radii = layer_radii(params)
    kmax = len(radii)
    lams = layer_intensities(params, radii)
    Z = sncp.kernel_normalizer(L, params.delta)
    flags = []

    if phi_inf is None:
        phi_inf = infra_mod.measured_phi_inf(topology) if topology.n_nodes else 0.0
    base = infra_mod.sparse_infrastructure(topology, params, sncp.substream(stream, 0), phi_inf=phi_inf)
    all_centres = Component(np.arange(topology.n_centres, dtype=np.int64), L * L, 1.0)
    layers = [DomainLayer(0, None, base.target_intensity, [all_centres], base,
                          np.ones(topology.n_nodes, dtype=bool), base.target_intensity)]

    inside = domain_membership(topology, radii)
    dens = sncp.sampling_intensity(topology, topology.nodes) if topology.n_nodes else np.zeros(0)
    for k, (d, lam) in enumerate(zip(radii, lams), start=1):
        members = np.flatnonzero(inside[k - 1])
        rate = lam / Z
        local_min = float(dens[members].min()) if members.size else math.inf
        if rate > local_min:
            flags.append(f"layer-truncated-at-{k}")
            break
        groups = components_at_radius(topology.centres, d, L)
        comps = []
        for j, g in enumerate(groups):
            area, zeta = area_estimates(topology.centres[g], d, L, area_samples,
                                        sncp.substream(stream, 2, k, j))
            comps.append(Component(g, area, zeta))
        thinned = infra_mod.thin_to_hpp(topology, rate, sncp.substream(stream, 1, k),
                                        phi_inf=local_min, kind=f"layer-{k}", members=members)
        layers.append(DomainLayer(k, d, lam, comps, thinned, inside[k - 1], rate))
        _link(layers[-2], layers[-1])
    return Hierarchy(layers, kmax, params.mu, flags)


def _link(parent: DomainLayer, child: DomainLayer):
    owner = {}
    for j, comp in enumerate(parent.components):
        for c in comp.centre_indices:
            owner[int(c)] = j
    for comp in parent.components:
        comp.nested_children = []
    for i, comp in enumerate(child.components):
        parent.components[owner[int(comp.centre_indices[0])]].nested_children.append(i)


@dataclass
class BottleneckReport:
    layer_capacity: list
    checked: int
    violations: list
    layer0_is_min: bool
    flags: list = field(default_factory=list)

    @property
    def fraction_ok(self) -> float:
        return 1.0 if self.checked == 0 else 1.0 - len(self.violations) / self.checked

    @property
    def passed(self) -> bool:
        return not self.violations and self.layer0_is_min

    def to_dict(self) -> dict:
        return {"layer_capacity": self.layer_capacity, "checked": self.checked,
                "violations": self.violations, "layer0_is_min": self.layer0_is_min,
                "fraction_ok": self.fraction_ok, "passed": self.passed, "flags": list(self.flags)}


def component_capacity(area: float, psi: float, alpha: float, epsilon: float = BOTTLENECK_EPSILON) -> float:
    return hpp_capacity(HppParams(math.sqrt(area), psi, alpha, epsilon)).value


def bottleneck_check(hierarchy: Hierarchy, params: ModelParams, epsilon: float = BOTTLENECK_EPSILON):
    """Compare every component of a domain layer with the sum over its children.

    Capacities use the homogeneous formulas on a square of the component's
    area at the layer's true thinning intensity.  Parent layers are the
    domain layers ``1..K-1``, so a single domain layer passes vacuously;
    separately, the layer-0 capacity must be the smallest layer total.
    """
    caps = []
    for layer in hierarchy.layers:
        psi = layer.thinning_intensity if layer.thinning_intensity is not None else 0.0
        caps.append([component_capacity(c.area, psi, params.alpha, epsilon) for c in layer.components])
    totals = [float(np.sum(c)) for c in caps]
    violations, checked = [], 0
    for k in range(1, len(hierarchy.layers) - 1):
        for j, comp in enumerate(hierarchy.layers[k].components):
            if not comp.nested_children:
                continue
            checked += 1
            agg = float(sum(caps[k + 1][i] for i in comp.nested_children))
            if agg < caps[k][j]:
                violations.append({"layer": k, "component": j, "capacity": caps[k][j],
                                   "children_capacity": agg})
    layer0_min = totals[0] <= min(totals) if totals else True
    flags = [] if len(hierarchy.layers) > 2 else ["single-domain-layer"]
    rows = [{"k": layer.k, "capacity": t} for layer, t in zip(hierarchy.layers, totals)]
    return BottleneckReport(rows, checked, violations, layer0_min, flags)
