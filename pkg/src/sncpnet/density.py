"""Cluster spacing, density condition and intensity extrema."""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import sncp
from .params import ModelParams
from .sncp import Topology


class Condition(str, enum.Enum):
    DENSE = "cluster-dense"
    SPARSE = "cluster-sparse"
    CRITICAL = "critical"


def compute_dc(params: ModelParams) -> float:
    """Typical distance between cluster centres, ``n**(gamma - nu/2)``."""
    return params.d_c


def compute_eta(params: ModelParams) -> float:
    """``d_c * sqrt(ln m)`` with the natural log; zero when ``m <= 1``."""
    return params.d_c * math.sqrt(max(math.log(params.m), 0.0))


def classify_density_condition(params: ModelParams) -> Condition:
    half_nu = params.nu / 2.0
    if params.gamma < half_nu:
        return Condition.DENSE
    if params.gamma > half_nu:
        return Condition.SPARSE
    return Condition.CRITICAL


def default_grid_resolution(params: ModelParams) -> float:
    return min(0.1, params.d_c / 10.0)


def grid_axis(L: float, resolution: float) -> np.ndarray:
    """``i * resolution`` for every ``i`` with ``i * resolution < L``."""
    k = int(math.ceil(L / resolution))
    axis = np.arange(k) * resolution
    return axis[axis < L]


def intensity_extrema(topology: Topology, grid_resolution: float, *, exact: bool = False,
                      chunk: int = 1 << 17) -> tuple[float, float]:
    """Minimum and maximum intensity over a regular grid anchored at the origin.

    With ``exact=False`` the unnormalized field of ``sncp.local_intensity`` is
    used; ``exact=True`` evaluates ``sncp.sampling_intensity`` instead.  Grids
    whose step divides an earlier step contain the earlier grid, so refining
    never lowers the sup or raises the inf.
    """
    L = topology.edge
    if not 0 < grid_resolution <= L:
        raise ValueError("grid_resolution must lie in (0, L]")
    if topology.n_centres == 0:
        return 0.0, 0.0
    field_fn = sncp.sampling_intensity if exact else sncp.local_intensity
    axis = grid_axis(L, grid_resolution)
    rows_per_chunk = max(1, chunk // axis.size)
    lo, hi = math.inf, -math.inf
    for start in range(0, axis.size, rows_per_chunk):
        ys = axis[start:start + rows_per_chunk]
        gx, gy = np.meshgrid(axis, ys, indexing="xy")
        vals = field_fn(topology, np.column_stack((gx.ravel(), gy.ravel())))
        lo = min(lo, float(vals.min()))
        hi = max(hi, float(vals.max()))
    return lo, hi


@dataclass
class DensityReport:
    d_c: float
    eta: float
    condition: Condition
    phi_inf: float
    phi_sup: float
    fitted_constants: dict
    grid_resolution: float
    replicas: int
    verifiable: bool = True
    flags: list = field(default_factory=list)
    per_replica: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["condition"] = self.condition.value
        return out


def lemma1_reference(params: ModelParams) -> dict:
    """Reference scales the fitted constants are measured against."""
    L2 = params.edge**2
    log_m = math.log(params.m) if params.m > 1 else 0.0
    eta = compute_eta(params)
    return {
        "dense": params.n / L2,
        "sparse_lower": params.q * log_m * sncp.kernel_s(eta, params.delta) if log_m > 0 else 0.0,
        "sparse_upper": params.q * log_m,
    }


def lemma1_report(params: ModelParams, extrema, grid_resolution: float) -> DensityReport:
    """Fit the two-sided intensity constants from per-replica ``(inf, sup)`` pairs."""
    extrema = [(float(a), float(b)) for a, b in extrema]
    infs = [a for a, _ in extrema]
    sups = [b for _, b in extrema]
    condition = classify_density_condition(params)
    ref = lemma1_reference(params)
    flags, fitted, verifiable = [], {}, True

    def ratio(x, scale):
        return x / scale if scale > 0 else math.nan

    if condition is Condition.DENSE:
        fitted = {"g1": ratio(min(infs), ref["dense"]), "G1": ratio(max(sups), ref["dense"])}
    elif condition is Condition.SPARSE:
        fitted = {"g2": ratio(min(infs), ref["sparse_lower"]), "G2": ratio(max(sups), ref["sparse_upper"])}
        if compute_eta(params) < 1.0:
            flags.append("lower-expression-on-kernel-plateau")
    else:
        verifiable = False
        flags.append("critical-condition-unverifiable")
    if any(not (math.isfinite(v) and v > 0) for v in fitted.values()):
        flags.append("degenerate-fit")
    return DensityReport(
        d_c=params.d_c, eta=compute_eta(params), condition=condition,
        phi_inf=min(infs), phi_sup=max(sups), fitted_constants=fitted,
        grid_resolution=grid_resolution, replicas=len(extrema), verifiable=verifiable,
        flags=flags, per_replica=extrema,
    )


def verify_lemma1(params: ModelParams, replicas: int, grid_resolution: float | None = None) -> DensityReport:
    """Sample replicas and fit the constants bounding the intensity extrema.

    Constants are fitted, never asserted, since only their existence is claimed.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    res = default_grid_resolution(params) if grid_resolution is None else grid_resolution
    extrema = []
    for r in range(replicas):
        topo = sncp.sample_topology(params, sncp.replica_stream(params.seed, r))
        extrema.append(intensity_extrema(topo, res))
    return lemma1_report(params, extrema, res)
