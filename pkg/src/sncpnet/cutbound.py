"""Cut-set upper bound: empty strip, power transfer across it, distance bands.

A single strip does not disconnect a torus, so the cut is the strip at
``position`` together with its antipodal copy at ``position + L/2``.  The
two rings left between them are the source side ``S`` and the destination
side ``D``.  Both strips must be empty of nodes.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import density
from ._kernels import inverse_power_rows, squarelet_pair_sums
from .density import Condition
from .errors import InvalidGeometryError, InvalidPartitionError, NoStripFound
from .params import ModelParams
from .sncp import Topology, kernel_s

AXES = ("vertical", "horizontal")
POLYLOG_EXPONENT = 5
BAND_LABELS = ("theta-L", "dc-sqrtlog-to-L", "dc-to-dc-sqrtlog", "phi-to-dc", "below-phi")
_MAX_CANDIDATES = 1 << 22


@dataclass(frozen=True)
class CutStrip:
    """Closed strip ``[position, position + width]`` across ``axis``.

    For ``vertical`` strips ``position`` is an x coordinate.
    """

    axis: str
    position: float
    width: float
    clearance: float

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        if not self.width > 0:
            raise InvalidGeometryError("strip width must be > 0")

    def antipode(self, L: float) -> float:
        return (self.position + 0.5 * L) % L


@dataclass(frozen=True)
class Band:
    label: str
    lower: float
    upper: float
    contribution: float
    n_sources: int


@dataclass
class CutBoundResult:
    strip: CutStrip
    p_exact: float
    p_squarelet: float
    bands: list
    n_sources: int
    n_dests: int
    squarelet_edge: float
    polylog_multiplier_exponent: int = POLYLOG_EXPONENT
    flags: list = field(default_factory=list)

    @property
    def capacity_bound(self) -> float:
        """Power transfer capped by the degrees of freedom across the cut."""
        return min(self.p_exact, float(min(self.n_sources, self.n_dests)))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["capacity_bound"] = self.capacity_bound
        return out


def strip_width(params: ModelParams, condition: Condition | None = None, c_delta: float = 1.0,
                sparse_kernel_arg: str = "d_c") -> float:
    """Width of the cut strip.

    Cluster-sparse: ``c_delta * (q s(x) ln n)**-0.5`` with ``x = d_c`` by
    default; ``sparse_kernel_arg="eta"`` uses ``d_c sqrt(ln m)`` instead.
    Cluster-dense (and, with a warning, critical): ``c_delta * L / sqrt(n)``.
    """
    if condition is None:
        condition = density.classify_density_condition(params)
    if condition is Condition.SPARSE:
        if sparse_kernel_arg == "d_c":
            x = params.d_c
        elif sparse_kernel_arg == "eta":
            x = density.compute_eta(params)
        else:
            raise ValueError("sparse_kernel_arg must be 'd_c' or 'eta'")
        return c_delta * (params.q * kernel_s(x, params.delta) * math.log(params.n)) ** -0.5
    if condition is Condition.CRITICAL:
        warnings.warn("critical density condition: using the cluster-dense strip width", stacklevel=2)
    return c_delta * params.edge / math.sqrt(params.n)


def _axis_coords(points: np.ndarray, axis: str) -> np.ndarray:
    """Coordinate across the strip (x for vertical strips)."""
    return points[:, 0] if axis == "vertical" else points[:, 1]


def _intervals(coords, lo_off, hi_off, period):
    """Closed intervals ``[c - lo_off, c + hi_off]`` reduced modulo ``period``.

    Wrapping intervals are split in two.  Returns sorted start and end
    arrays, and a flag that is True when an interval covers everything.
    """
    if coords.size == 0:
        return np.zeros(0), np.zeros(0), False
    if lo_off + hi_off >= period:
        return np.zeros(0), np.zeros(0), True
    c = np.mod(coords, period)
    a, b = c - lo_off, c + hi_off
    mid, low, high = (a >= 0) & (b < period), a < 0, b >= period
    zl, zh = np.zeros(int(low.sum())), np.zeros(int(high.sum()))
    starts = np.concatenate((a[mid], zl, a[low] + period, a[high], zh))
    ends = np.concatenate((b[mid], b[low], zl + period, zh + period, b[high] - period))
    return np.sort(starts), np.sort(ends), False


def _coverage(grid, starts, ends):
    return np.searchsorted(starts, grid, side="right") - np.searchsorted(ends, grid, side="left")


def find_empty_strip(topology: Topology, width: float, clearance_g: float = 0.1, *,
                     axis: str | None = None, clearance: float | None = None) -> CutStrip:
    """First candidate strip, vertical axis first, whose cut is empty and clear.

    Candidates sit on the grid ``i * width / 4`` in ``[0, L/2)``; the pair of
    strips is ``L/2``-periodic so no other positions are needed.  A node
    blocks a candidate when it lies in either closed strip, a centre when it
    is within ``clearance`` (default ``clearance_g * d_c``) of either strip.
    """
    L = topology.edge
    H = 0.5 * L
    if not width > 0:
        raise InvalidGeometryError("strip width must be > 0")
    if width >= H:
        raise InvalidGeometryError("strip width must be < L/2")
    c = clearance_g * topology.params.d_c if clearance is None else clearance
    step = 0.25 * width
    n_grid = int(math.ceil(H / step))
    axes = AXES if axis is None else (axis,)
    best, best_bad = None, None
    for ax in axes:
        ns, ne, nfull = _intervals(_axis_coords(topology.nodes, ax), width, 0.0, H)
        cs, ce, cfull = _intervals(_axis_coords(topology.centres, ax), width + c, c, H)
        if nfull or cfull:
            # every candidate is blocked; skip the scan and report the first one
            bad = topology.n_nodes if nfull else int(_coverage(np.zeros(1), ns, ne)[0])
            if best_bad is None or bad < best_bad:
                best_bad, best = bad, CutStrip(ax, 0.0, width, c)
            continue
        for lo in range(0, n_grid, _MAX_CANDIDATES):
            grid = np.arange(lo, min(n_grid, lo + _MAX_CANDIDATES)) * step
            grid = grid[grid < H]
            bad_nodes = _coverage(grid, ns, ne)
            bad_centres = _coverage(grid, cs, ce) > 0
            ok = np.flatnonzero((bad_nodes == 0) & ~bad_centres)
            if ok.size:
                return CutStrip(ax, float(grid[ok[0]]), width, c)
            if grid.size:
                i = int(np.argmin(bad_nodes))
                if best_bad is None or bad_nodes[i] < best_bad:
                    best_bad = int(bad_nodes[i])
                    best = CutStrip(ax, float(grid[i]), width, c)
    raise NoStripFound(
        f"no empty strip of width {width:.6g} with clearance {c:.6g}", best=best, offending=best_bad)


def split_sides(topology: Topology, strip: CutStrip):
    """Indices of source and destination nodes with their cut-frame coordinates.

    In the cut frame ``u`` runs across the strip starting at its left edge;
    ``D`` occupies ``(w, L/2)`` and ``S`` occupies ``(L/2 + w, L)``.
    """
    L = topology.edge
    pts = topology.nodes
    if strip.axis == "vertical":
        across, along = pts[:, 0], pts[:, 1]
    else:
        across, along = pts[:, 1], pts[:, 0]
    u = np.mod(across - strip.position, L)
    w, H = strip.width, 0.5 * L
    dest = np.flatnonzero((u > w) & (u < H))
    src = np.flatnonzero((u > H + w) & (u < L))
    return src, dest, u, along


def _exact_rows(topology: Topology, strip: CutStrip, alpha: float):
    src, dest, u, _ = split_sides(topology, strip)
    rows = inverse_power_rows(topology.nodes[src], topology.nodes[dest], topology.edge, alpha)
    return src, dest, u, rows


def power_transfer_exact(topology: Topology, strip: CutStrip, P: float | None = None,
                         alpha: float | None = None) -> float:
    """``P * sum_{i in S, k in D} d_ik**-alpha`` over torus distances."""
    P = topology.params.power if P is None else P
    alpha = topology.params.alpha if alpha is None else alpha
    src, dest, _, rows = _exact_rows(topology, strip, alpha)
    if src.size == 0 or dest.size == 0:
        return 0.0
    return float(P * np.sum(rows))


def _cells(u, v, lo, hi, L, edge):
    """Occupied cells of ``[lo, hi] x [0, L]``, gridded from ``lo`` and ``0``.

    The last row and column are partial.  Returns ``(cu, cv, hu, hv)`` rows
    and member counts.
    """
    nu_ = max(1, int(math.ceil((hi - lo) / edge)))
    nv_ = max(1, int(math.ceil(L / edge)))
    iu = np.minimum(((u - lo) // edge).astype(np.int64), nu_ - 1)
    iv = np.minimum((v // edge).astype(np.int64), nv_ - 1)
    keys, counts = np.unique(iu * nv_ + iv, return_counts=True)
    ku, kv = keys // nv_, keys % nv_
    u0 = lo + ku * edge
    u1 = np.minimum(u0 + edge, hi)
    v0 = kv * edge
    v1 = np.minimum(v0 + edge, L)
    cells = np.column_stack(((u0 + u1) / 2, (v0 + v1) / 2, (u1 - u0) / 2, (v1 - v0) / 2))
    return cells, counts


def power_transfer_squarelet(topology: Topology, strip: CutStrip, squarelet_edge: float,
                             P: float | None = None, alpha: float | None = None) -> float:
    """Squarelet over-estimate of the power transfer.

    Each side is partitioned into cells aligned with the strip edges; every
    cell pair contributes ``U(A) U(B) dmin**-alpha``, where ``dmin`` is the
    torus distance between the closed cells shrunk by ``1e-12 L`` so that
    rounding can never push it above a true node distance.
    """
    if not squarelet_edge > 0:
        raise InvalidGeometryError("squarelet_edge must be > 0")
    P = topology.params.power if P is None else P
    alpha = topology.params.alpha if alpha is None else alpha
    L = topology.edge
    src, dest, u, v = split_sides(topology, strip)
    if src.size == 0 or dest.size == 0:
        return 0.0
    w, H = strip.width, 0.5 * L
    a_cells, a_counts = _cells(u[src], v[src], H + w, L, L, squarelet_edge)
    b_cells, b_counts = _cells(u[dest], v[dest], w, H, L, squarelet_edge)
    rows, zero = squarelet_pair_sums(a_cells, a_counts, b_cells, b_counts, L, alpha, 1e-12 * L)
    if zero:
        raise InvalidPartitionError(f"{zero} squarelet pairs touch across the cut")
    return float(P * np.sum(rows))


def band_edges(topology: Topology, params: ModelParams, phi_inf: float | None = None) -> list:
    """Descending band edges ``[L/4, d_c sqrt(ln n), d_c, phi_inf**-0.5]``, each clamped to the previous."""
    if phi_inf is None:
        res = max(density.default_grid_resolution(params), topology.edge / 200.0)
        phi_inf, _ = density.intensity_extrema(topology, res)
    phi_len = phi_inf**-0.5 if phi_inf > 0 else math.inf
    raw = [topology.edge / 4.0, params.d_c * math.sqrt(math.log(params.n)) if params.n > 1 else 0.0,
           params.d_c, phi_len]
    edges = []
    for e in raw:
        edges.append(min(e, edges[-1]) if edges else e)
    return edges


def _bands_from_rows(dist, rows, P, edges):
    bounds = [math.inf] + list(edges) + [-math.inf]
    out = []
    for i, label in enumerate(BAND_LABELS):
        hi, lo = bounds[i], bounds[i + 1]
        sel = (dist > lo) & (dist <= hi) if i < len(BAND_LABELS) - 1 else dist <= hi
        out.append(Band(label, max(lo, 0.0), hi, float(P * np.sum(rows[sel])), int(sel.sum())))
    return out


def band_decomposition(topology: Topology, strip: CutStrip, params: ModelParams | None = None, *,
                       phi_inf: float | None = None) -> list:
    """Split the exact power transfer by the source's distance to the primary strip.

    Band ``i`` holds sources with distance in ``(edge_i, edge_{i-1}]``; the
    first band is open above and the last is closed at zero.
    """
    params = topology.params if params is None else params
    src, dest, u, rows = _exact_rows(topology, strip, params.alpha)
    edges = band_edges(topology, params, phi_inf)
    dist = topology.edge - u[src]
    if dest.size == 0:
        rows = np.zeros(src.size)
    return _bands_from_rows(dist, rows, params.power, edges)


def capacity_upper_bound(topology: Topology, params: ModelParams | None = None, *,
                         c_delta: float = 1.0, clearance_g: float = 0.1, axis: str | None = None,
                         squarelet_edge: float | None = None, phi_inf: float | None = None,
                         shrink_retries: int = 0, sparse_kernel_arg: str = "d_c") -> CutBoundResult:
    """Strip, exact and squarelet power transfer, and band split for one topology.

    With ``shrink_retries > 0`` the width is halved after each failed
    search; the final failure propagates ``NoStripFound``.  The squarelet
    edge defaults to ``L/32``.
    """
    params = topology.params if params is None else params
    flags = []
    condition = density.classify_density_condition(params)
    if condition is Condition.CRITICAL:
        flags.append("critical-condition-dense-width")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            width = strip_width(params, condition, c_delta, sparse_kernel_arg)
    else:
        width = strip_width(params, condition, c_delta, sparse_kernel_arg)
    if width > topology.edge / 4.0:
        width = topology.edge / 4.0
        flags.append("width-clamped-to-quarter-edge")
    for attempt in range(shrink_retries + 1):
        try:
            strip = find_empty_strip(topology, width, clearance_g, axis=axis)
            break
        except NoStripFound:
            if attempt == shrink_retries:
                raise
            width *= 0.5
    if attempt:
        flags.append(f"width-halved-{attempt}")
    src, dest, u, rows = _exact_rows(topology, strip, params.alpha)
    P = params.power
    p_exact = float(P * np.sum(rows)) if src.size and dest.size else 0.0
    edge = topology.edge / 32.0 if squarelet_edge is None else squarelet_edge
    p_sq = power_transfer_squarelet(topology, strip, edge, P, params.alpha)
    edges = band_edges(topology, params, phi_inf)
    bands = _bands_from_rows(topology.edge - u[src], rows if dest.size else np.zeros(src.size),
                             P, edges)
    return CutBoundResult(strip, p_exact, p_sq, bands, int(src.size), int(dest.size), edge, flags=flags)

