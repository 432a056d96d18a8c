"""Parameter sweeps over n and log-log exponent regression."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import cutbound, hierarchy, infrastructure, regimes, sncp
from .errors import FitError, SncpError
from .params import ModelParams

QUANTITIES = ("cut-upper-bound", "lower-bound-throughput", "infrastructure-size", "k-max")


def default_n_values() -> list:
    return [2.0**e for e in range(12, 18)]


@dataclass
class SweepSpec:
    base: ModelParams
    n_values: list = field(default_factory=default_n_values)
    replicas: int = 1
    quantity: str = "cut-upper-bound"
    output: str | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        self.n_values = [float(n) for n in self.n_values]
        if len(self.n_values) < 2:
            raise ValueError("a sweep needs at least two n values")
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ValueError("n_values must be strictly increasing")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.quantity not in QUANTITIES:
            raise ValueError(f"quantity must be one of {QUANTITIES}")


@dataclass(frozen=True)
class SweepRow:
    n: float
    replica: int
    value: float | None
    reason: str = ""


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    r_squared: float
    predicted_e_C: float | None
    deviation: float | None
    n_points: int

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(params: ModelParams, replica: int, quantity: str, options: dict | None = None) -> float:
    """One sweep point.  The topology stream is ``replica_stream(seed, replica)``."""
    options = options or {}
    if quantity == "k-max":
        d1 = params.mu * params.d_c
        return float(hierarchy.k_max(params, params.q * d1**-params.delta))
    stream = sncp.replica_stream(params.seed, replica)
    topo = sncp.sample_topology(params, stream)
    aux = sncp.substream(stream, 3)
    if quantity == "cut-upper-bound":
        res = cutbound.capacity_upper_bound(
            topo, params, shrink_retries=options.get("shrink_retries", 20),
            clearance_g=options.get("g", 0.1), c_delta=options.get("c_delta", 1.0))
        return res.capacity_bound
    if quantity == "lower-bound-throughput":
        return infrastructure.lower_bound_throughput(topo, aux, R=options.get("R", 1.0)).capacity_estimate
    plan = infrastructure.choose_transport_plan(params)
    return float(infrastructure.build_infrastructure(topo, plan.infrastructure_kind, aux,
                                                     R=options.get("R", 1.0)).size)


def _point(args):
    params, replica, quantity, options = args
    try:
        return SweepRow(params.n, replica, evaluate(params, replica, quantity, options))
    except SncpError as exc:
        return SweepRow(params.n, replica, None, f"{type(exc).__name__}: {exc}")


def run_sweep(spec: SweepSpec, on_row=None, workers: int = 1) -> list:
    """Evaluate every ``(n, replica)`` point; failures become rows without a value.

    ``on_row`` is called with each finished row in ``(n, replica)`` order so
    partial runs still leave usable output.
    """
    jobs = [(spec.base.with_n(n), r, spec.quantity, spec.options)
            for n in spec.n_values for r in range(spec.replicas)]
    rows = []
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = pool.map(_point, jobs)
            for row in results:
                rows.append(row)
                if on_row:
                    on_row(row)
    else:
        for job in jobs:
            row = _point(job)
            rows.append(row)
            if on_row:
                on_row(row)
    return sorted(rows, key=lambda r: (r.n, r.replica))


def medians(rows) -> list:
    """``(n, median)`` over positive values; non-positive values are dropped with a warning."""
    by_n = {}
    dropped = 0
    for row in rows:
        n, v = (row.n, row.value) if isinstance(row, SweepRow) else (row[0], row[-1])
        if v is None or not math.isfinite(v):
            continue
        if v <= 0:
            dropped += 1
            continue
        by_n.setdefault(float(n), []).append(float(v))
    if dropped:
        warnings.warn(f"{dropped} non-positive values excluded from the fit", stacklevel=3)
    return [(n, float(np.median(v))) for n, v in sorted(by_n.items())]


def fit_exponent(table, predicted_e_C: float | None = None) -> ExponentFit:
    """Least-squares slope of ``log(median value)`` against ``log n``.

    ``table`` holds ``SweepRow`` objects or ``(n, ..., value)`` tuples.
    """
    pts = medians(table)
    if len(pts) < 2:
        raise FitError(f"need at least two n values with positive data, got {len(pts)}")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    dev = None if predicted_e_C is None else float(slope) - predicted_e_C
    return ExponentFit(float(slope), float(intercept), r2, predicted_e_C, dev, len(pts))


def predicted_exponent(params: ModelParams) -> float:
    return regimes.scaling_exponent(params.alpha, params.gamma, params.delta, params.nu).e_C
