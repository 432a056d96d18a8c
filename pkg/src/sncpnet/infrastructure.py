"""Transport infrastructures, transport plans, flows and cell-level routing.

Thinning probabilities are taken against ``sncp.sampling_intensity``, the
exact density the sampler draws from, so a thinned set is a homogeneous
Poisson process in true units (nodes per unit area).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from . import density, regimes, sncp
from .density import Condition
from .errors import InfeasibleThinningError, TooFewNodesError, WrongConditionError
from .hpp import HppParams, hpp_capacity
from .params import ModelParams
from .regimes import RegimeReport
from .sncp import Topology

STRATEGIES = {
    "I": "global-MIMO",
    "II": "super-cluster",
    "III": "inter-cluster",
    "IV": "sub-cluster",
    "V": "multi-hop",
}


@dataclass
class Infrastructure:
    kind: str
    members: np.ndarray
    target_intensity: float
    core_radius: float | None = None
    measured_phi_inf: float | None = None
    requested_intensity: float | None = None
    flags: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return int(self.members.size)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["members"] = self.members.tolist()
        return out


@dataclass(frozen=True)
class FlowSet:
    """Row ``i`` of ``pairs`` is the flow ``(source, destination)``."""

    pairs: np.ndarray

    @property
    def sources(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def destinations(self) -> np.ndarray:
        return self.pairs[:, 1]

    def __len__(self):
        return int(self.pairs.shape[0])


@dataclass
class TransportPlan:
    strategy: str
    regime: str
    cell_edge: float
    infrastructure_kind: str
    cells_per_side: int
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LoadReport:
    per_cell_load: np.ndarray
    max_load: int
    mean_load: float
    hop_counts: np.ndarray
    throughput_estimate: float | None = None
    capacity_estimate: float | None = None
    hpp_cross_check: float | None = None
    hop_rates: np.ndarray | None = None
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "max_load": int(self.max_load),
            "mean_load": float(self.mean_load),
            "total_hops": int(self.hop_counts.sum()),
            "n_flows": int(self.hop_counts.size),
            "throughput_estimate": self.throughput_estimate,
            "capacity_estimate": self.capacity_estimate,
            "hpp_cross_check": self.hpp_cross_check,
            "cells_per_side": int(self.per_cell_load.shape[0]),
            "flags": list(self.flags),
        }


# --------------------------------------------------------------------------
# infrastructures


def measured_phi_inf(topology: Topology, grid_resolution: float | None = None) -> float:
    """Grid minimum of the exact sampling density."""
    res = density.default_grid_resolution(topology.params) if grid_resolution is None else grid_resolution
    return density.intensity_extrema(topology, res, exact=True)[0]


def thin_to_hpp(topology: Topology, phi0: float, stream=None, *, phi_inf: float | None = None,
                kind: str = "thinned", members=None) -> Infrastructure:
    """Keep node ``i`` with probability ``phi0 / Phi(X_i)``.

    ``phi_inf`` is the measured minimum density; it is computed on the
    default grid when omitted.  ``members`` restricts thinning to a subset.
    Nodes whose own density is below ``phi0`` (possible between grid points)
    are kept with probability one and counted in the flags.
    """
    if phi0 < 0:
        raise ValueError("phi0 must be >= 0")
    idx = np.arange(topology.n_nodes) if members is None else np.asarray(members, dtype=np.int64)
    if phi0 == 0 or idx.size == 0:
        return Infrastructure(kind, np.zeros(0, dtype=np.int64), float(phi0), measured_phi_inf=phi_inf)
    if phi_inf is None:
        phi_inf = measured_phi_inf(topology)
    if phi0 > phi_inf:
        raise InfeasibleThinningError(phi0, phi_inf)
    rng = sncp._generator(sncp.as_stream(stream))
    u = rng.random(idx.size)
    dens = sncp.sampling_intensity(topology, topology.nodes[idx])
    prob = phi0 / dens
    flags = []
    clipped = int(np.count_nonzero(prob > 1.0))
    if clipped:
        flags.append(f"probability-clipped-{clipped}")
    kept = idx[u < prob]
    return Infrastructure(kind, kept, float(phi0), measured_phi_inf=float(phi_inf), flags=flags)


def _require(topology: Topology, wanted: Condition):
    cond = density.classify_density_condition(topology.params)
    if cond is not wanted:
        raise WrongConditionError(f"needs the {wanted.value} condition, topology is {cond.value}")


def dense_infrastructure(topology: Topology, stream=None, *, phi_inf: float | None = None) -> Infrastructure:
    """Thin at the measured minimum density (cluster-dense topologies only)."""
    _require(topology, Condition.DENSE)
    if topology.n_nodes == 0:
        return Infrastructure("dense", np.zeros(0, dtype=np.int64), 0.0)
    if phi_inf is None:
        phi_inf = measured_phi_inf(topology)
    return thin_to_hpp(topology, phi_inf, stream, phi_inf=phi_inf, kind="dense")


def clusters_core_infrastructure(topology: Topology, R: float = 1.0) -> Infrastructure:
    """Nodes within torus distance ``R`` of their own cluster centre."""
    if not R > 0:
        raise ValueError("R must be > 0")
    if topology.n_nodes == 0:
        return Infrastructure("clusters-core", np.zeros(0, dtype=np.int64), 0.0, core_radius=R)
    d = sncp.torus_distance(topology.nodes, topology.centres[topology.parents], topology.edge)
    members = np.flatnonzero(d <= R)
    return Infrastructure("clusters-core", members, members.size / topology.edge**2, core_radius=R)


def sparse_target(params: ModelParams) -> float:
    """``n**beta``, the nominal sparse-infrastructure intensity."""
    return params.n ** regimes.beta(params.alpha, params.gamma, params.delta, params.nu)


def sparse_infrastructure(topology: Topology, params: ModelParams | None = None, stream=None, *,
                          phi_inf: float | None = None) -> Infrastructure:
    """Thin at ``min(phi_inf, n**beta)``; both inputs are recorded."""
    params = topology.params if params is None else params
    _require(topology, Condition.SPARSE)
    target = sparse_target(params)
    if topology.n_nodes == 0:
        return Infrastructure("sparse", np.zeros(0, dtype=np.int64), 0.0, requested_intensity=target)
    if phi_inf is None:
        phi_inf = measured_phi_inf(topology)
    phi0 = min(phi_inf, target)
    infra = thin_to_hpp(topology, phi0, stream, phi_inf=phi_inf, kind="sparse")
    infra.requested_intensity = target
    return infra


# --------------------------------------------------------------------------
# transport plan


def choose_transport_plan(params: ModelParams, regime_report: RegimeReport | None = None, *,
                          phi_inf: float | None = None, phi0: float | None = None,
                          regime_ii_edge: float | None = None, c_v: float = 1.0) -> TransportPlan:
    """Cell edge and infrastructure kind for the regime's transport strategy.

    ``phi_inf`` defaults to ``q ln(m) s(eta)`` and ``phi0`` to ``n**beta``.
    The edge is clamped to ``[phi_ref**-0.5, L]`` where ``phi_ref`` is the
    infrastructure intensity, so every cell expects at least one member.
    """
    if regime_report is None:
        regime_report = regimes.scaling_exponent(params.alpha, params.gamma, params.delta, params.nu)
    regime = regime_report.regime
    L, n, d_c = params.edge, params.n, params.d_c
    ln_n = math.log(n) if n > 1 else 0.0
    if phi_inf is None:
        ref = density.lemma1_reference(params)
        phi_inf = ref["sparse_lower"] if ref["sparse_lower"] > 0 else params.n / L**2
    if phi0 is None:
        phi0 = sparse_target(params)
    flags = []
    if regime == "I":
        edge = L
    elif regime == "II":
        edge = d_c * ln_n if regime_ii_edge is None else regime_ii_edge
    elif regime == "III":
        edge = d_c * math.sqrt(ln_n)
    elif regime == "IV":
        edge = math.sqrt(d_c * phi_inf**-0.5)
    else:
        edge = c_v * phi0**-0.5 * math.sqrt(ln_n)

    cond = density.classify_density_condition(params)
    if regime in ("IV", "V"):
        kind, phi_ref = "sparse", phi0
    elif cond is Condition.SPARSE:
        kind, phi_ref = "clusters-core", n / L**2
    else:
        kind, phi_ref = "dense", phi_inf if cond is Condition.DENSE else n / L**2
        if cond is Condition.CRITICAL:
            flags.append("critical-condition")
    lo = phi_ref**-0.5 if phi_ref > 0 else L
    if edge > L:
        edge = L
        flags.append("cell-edge-clamped-to-L")
    if edge < lo:
        edge = min(lo, L)
        flags.append("cell-edge-clamped-to-min")
    cells = max(1, int(round(L / edge)))
    if cells == 1 and regime != "I":
        flags.append("single-cell")
    return TransportPlan(STRATEGIES[regime], regime, float(edge), kind, cells, flags)


# --------------------------------------------------------------------------
# flows and routing


def assign_flows(topology_or_count, stream=None) -> FlowSet:
    """Uniformly random permutation with no fixed points.

    Whole permutations are redrawn until one has no fixed point, which keeps
    the result exactly uniform over derangements (about e draws on average).
    """
    count = topology_or_count if isinstance(topology_or_count, (int, np.integer)) else topology_or_count.n_nodes
    if count < 2:
        raise TooFewNodesError(f"need at least two nodes for flows, got {count}")
    rng = sncp._generator(sncp.as_stream(stream))
    ids = np.arange(count)
    while True:
        perm = rng.permutation(count)
        if not np.any(perm == ids):
            return FlowSet(np.column_stack((ids, perm)))


def cell_index(points: np.ndarray, L: float, cells_per_side: int):
    """Column and row of each point; the last cell absorbs rounding at ``L``."""
    k = cells_per_side
    ij = np.floor(np.asarray(points) * (k / L)).astype(np.int64)
    np.clip(ij, 0, k - 1, out=ij)
    return ij[:, 0], ij[:, 1]


@numba.njit(cache=False)
def _route(sx, sy, dx, dy, k, load, hops):
    for f in range(sx.size):
        step = (dx[f] - sx[f]) % k
        if step * 2 > k:
            di, nh = -1, k - step
        else:
            di, nh = 1, step
        vstep = (dy[f] - sy[f]) % k
        if vstep * 2 > k:
            dj, nv = -1, k - vstep
        else:
            dj, nv = 1, vstep
        c = sx[f]
        for _ in range(nh + 1):
            load[sy[f], c] += 1
            c = (c + di) % k
        r = sy[f]
        for _ in range(nv):
            r = (r + dj) % k
            load[r, dx[f]] += 1
        hops[f] = nh + nv + 1


def route_cells(plan: TransportPlan, topology: Topology, flows: FlowSet) -> LoadReport:
    """Row-first ring routing on the ``k x k`` cell grid.

    Each flow walks along its source row in the shorter wrap direction (ties
    go in the positive direction), then along the destination column.
    ``per_cell_load[row, col]`` counts the flows whose path visits the cell.
    """
    k = int(plan.cells_per_side)
    if k < 1:
        raise ValueError("cells_per_side must be >= 1")
    L = topology.edge
    sx, sy = cell_index(topology.nodes[flows.sources], L, k)
    dx, dy = cell_index(topology.nodes[flows.destinations], L, k)
    load = np.zeros((k, k), dtype=np.int64)
    hops = np.zeros(len(flows), dtype=np.int64)
    if len(flows):
        _route(sx, sy, dx, dy, k, load, hops)
    return LoadReport(load, int(load.max()), float(load.mean()), hops)


def hop_rates(plan: TransportPlan, topology: Topology, infrastructure: Infrastructure,
              P: float, alpha: float, counts: np.ndarray | None = None) -> np.ndarray:
    """Per-cell hop rate.

    Cooperative strategies: ``min(N_tx, N_rx) * min(1, P l**-alpha N_tx)``
    with ``N_tx`` the cell's members and ``N_rx`` the smallest member count
    among its four neighbours.  Multi-hop: ``min(1, P l**-alpha)``.
    """
    k = int(plan.cells_per_side)
    l = topology.edge / k
    if counts is None:
        counts = np.zeros((k, k), dtype=np.int64)
        if infrastructure.size:
            cx, cy = cell_index(topology.nodes[infrastructure.members], topology.edge, k)
            np.add.at(counts, (cy, cx), 1)
    counts = np.asarray(counts, dtype=float)
    snr = P * l**-alpha
    if plan.regime == "V":
        return np.full((k, k), min(1.0, snr))
    if k == 1:
        n_rx = counts
    else:
        n_rx = np.minimum.reduce([np.roll(counts, s, axis=a) for a in (0, 1) for s in (1, -1)])
    return np.minimum(counts, n_rx) * np.minimum(1.0, snr * counts)


def estimate_throughput(plan: TransportPlan, topology: Topology, infrastructure: Infrastructure,
                        loads: LoadReport, params: ModelParams | None = None, *,
                        counts: np.ndarray | None = None) -> LoadReport:
    """Fill in ``lambda = (1/3) min_cells R_hop / load`` and ``C = n lambda``.

    With no loaded cell the rate is capped at ``(1/3) max R_hop`` and
    flagged.  The cross-check is ``C`` divided by the homogeneous-network
    capacity of the infrastructure over the whole torus.
    """
    params = topology.params if params is None else params
    rates = hop_rates(plan, topology, infrastructure, params.power, params.alpha, counts)
    load = loads.per_cell_load
    flags = list(loads.flags)
    busy = load > 0
    if busy.any():
        lam = float(np.min(rates[busy] / load[busy])) / 3.0
        if lam == 0.0:
            flags.append("loaded-cell-without-rate")
    else:
        lam = float(rates.max()) / 3.0
        flags.append("zero-load-capped")
    cap = params.n * lam
    L = topology.edge
    ref = hpp_capacity(HppParams(L, infrastructure.size / L**2, params.alpha)).value
    cross = cap / ref if ref > 0 else None
    return LoadReport(load, loads.max_load, loads.mean_load, loads.hop_counts, lam, cap, cross,
                      rates, flags)


def build_infrastructure(topology: Topology, kind: str, stream=None, *, R: float = 1.0,
                         phi0: float | None = None, phi_inf: float | None = None) -> Infrastructure:
    """Dispatch on ``kind``; an explicit ``phi0`` thins at that intensity instead."""
    if phi0 is not None and kind != "clusters-core":
        infra = thin_to_hpp(topology, phi0, stream, phi_inf=phi_inf, kind=kind)
        return infra
    if kind == "dense":
        return dense_infrastructure(topology, stream, phi_inf=phi_inf)
    if kind == "clusters-core":
        return clusters_core_infrastructure(topology, R)
    if kind == "sparse":
        return sparse_infrastructure(topology, stream=stream, phi_inf=phi_inf)
    raise ValueError(f"unknown infrastructure kind {kind!r}")


def lower_bound_throughput(topology: Topology, stream=None, *, R: float = 1.0) -> LoadReport:
    """Plan, infrastructure, flows, routing and rate estimate in one call.

    Sub-streams: ``(0,)`` thinning, ``(1,)`` flows.
    """
    params = topology.params
    stream = sncp.as_stream(stream)
    phi_inf = measured_phi_inf(topology) if topology.n_nodes else 0.0
    report = regimes.scaling_exponent(params.alpha, params.gamma, params.delta, params.nu)
    infra_kind = choose_transport_plan(params, report).infrastructure_kind
    infra = build_infrastructure(topology, infra_kind, sncp.substream(stream, 0), R=R, phi_inf=phi_inf)
    plan = choose_transport_plan(params, report, phi_inf=phi_inf,
                                 phi0=infra.target_intensity if infra_kind == "sparse" else None)
    flows = assign_flows(topology, sncp.substream(stream, 1))
    loads = route_cells(plan, topology, flows)
    return estimate_throughput(plan, topology, infra, loads, params)
