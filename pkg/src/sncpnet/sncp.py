"""Shot-noise Cox process topologies on a square torus.

Random streams
--------------
Every sampler takes a ``numpy.random.SeedSequence`` (or a plain integer seed).
Sub-streams are derived by *appending* to the spawn key rather than by calling
``SeedSequence.spawn``, so a sub-stream depends only on its key and never on
how many siblings were drawn before it::

    centres            -> key + (0,)
    nodes of centre j  -> key + (1, j)
    replica r          -> key + (2, r)      (see ``replica_stream``)

This keeps per-centre generation order independent and safe to parallelize.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from . import _kernels
from .errors import InvalidGeometryError, InvalidParameterError
from .params import ModelParams

Stream = np.random.SeedSequence

CENTRES_KEY = 0
NODES_KEY = 1
REPLICA_KEY = 2


def as_stream(stream) -> Stream:
    """Coerce an int seed, a ``SeedSequence`` or ``None`` into a ``SeedSequence``."""
    if isinstance(stream, np.random.SeedSequence):
        return stream
    if stream is None:
        return np.random.SeedSequence(0)
    return np.random.SeedSequence(int(stream))


def substream(stream, *key: int) -> Stream:
    """Child stream identified by ``key``, independent of sibling draw order."""
    ss = as_stream(stream)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(int(k) for k in key))


def replica_stream(seed: int, replica: int) -> Stream:
    return substream(seed, REPLICA_KEY, replica)


def _generator(stream) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(as_stream(stream)))


# --------------------------------------------------------------------------
# geometry and kernel


def torus_distance(p, q, L: float):
    """Minimum-image Euclidean distance on the ``[0, L)^2`` torus.

    Broadcasts over leading dimensions of ``p`` and ``q`` (last axis = x, y).
    """
    if not L > 0:
        raise InvalidGeometryError(f"torus edge must be positive, got {L}")
    d = np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
    d = np.minimum(d, L - d)
    out = np.hypot(d[..., 0], d[..., 1])
    return float(out) if np.ndim(out) == 0 else out


def wrap(points, L: float) -> np.ndarray:
    """Map coordinates into ``[0, L)``, guarding against ``x % L == L``."""
    out = np.mod(points, L)
    out[out >= L] = 0.0
    return out


def kernel_s(rho, delta: float):
    """Power-law kernel ``min(1, rho**-delta)``."""
    if not delta > 2:
        raise InvalidParameterError("delta must be > 2 for the kernel integral to stay bounded")
    rho = np.asarray(rho, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(rho <= 1.0, 1.0, np.power(np.maximum(rho, 1.0), -delta))
    return float(out) if out.ndim == 0 else out


def radial_mass(r, delta: float):
    """``int_0^r rho * s(rho) d rho`` in closed form."""
    r = np.asarray(r, dtype=float)
    inner = 0.5 * np.minimum(r, 1.0) ** 2
    outer = np.where(r > 1.0, (1.0 - np.maximum(r, 1.0) ** (2.0 - delta)) / (delta - 2.0), 0.0)
    out = inner + outer
    return float(out) if out.ndim == 0 else out


def radial_cdf(r, delta: float, r_max: float):
    """CDF of the node-to-parent distance when the kernel is truncated at ``r_max``."""
    r = np.clip(np.asarray(r, dtype=float), 0.0, r_max)
    out = radial_mass(r, delta) / radial_mass(r_max, delta)
    return float(out) if np.ndim(out) == 0 else out


def _radial_quantile(u: np.ndarray, delta: float, r_max: float) -> np.ndarray:
    t = u * radial_mass(r_max, delta)
    inner = np.sqrt(2.0 * np.minimum(t, 0.5))
    base = np.maximum(1.0 - (t - 0.5) * (delta - 2.0), np.finfo(float).tiny)
    outer = base ** (1.0 / (2.0 - delta))
    return np.minimum(np.where(t <= 0.5, inner, outer), r_max)


def kernel_normalizer(L: float, delta: float) -> float:
    """Area integral of the truncated kernel, ``2 pi int_0^{L/2} rho s d rho``.

    Dividing the unnormalized intensity by this converts it into the actual
    node density produced by the sampler.
    """
    return 2.0 * math.pi * radial_mass(0.5 * L, delta)


# --------------------------------------------------------------------------
# topology


def _frozen(a, shape, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype).reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Topology:
    """One SNCP realization.

    ``centres`` is ``(M, 2)``, ``nodes`` is ``(N, 2)`` and ``parents[i]`` is the
    index of the centre that generated node ``i``.  Arrays are read-only.
    """

    edge: float
    centres: np.ndarray
    nodes: np.ndarray
    parents: np.ndarray
    params: ModelParams

    def __post_init__(self):
        if not math.isclose(self.edge, self.params.edge, rel_tol=1e-12):
            raise InvalidGeometryError("edge must equal n**gamma of the generating parameters")
        object.__setattr__(self, "centres", _frozen(self.centres, (-1, 2)))
        object.__setattr__(self, "nodes", _frozen(self.nodes, (-1, 2)))
        object.__setattr__(self, "parents", _frozen(self.parents, (-1,), np.int64))
        if self.parents.shape[0] != self.nodes.shape[0]:
            raise InvalidGeometryError("one parent index per node is required")
        if self.parents.size and (self.parents.min() < 0 or self.parents.max() >= self.n_centres):
            raise InvalidGeometryError("parent index out of range")
        for arr in (self.centres, self.nodes):
            if arr.size and (arr.min() < 0 or arr.max() >= self.edge):
                raise InvalidGeometryError("coordinates must lie in [0, L)")

    @property
    def n_centres(self) -> int:
        return self.centres.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def translated(self, offset) -> "Topology":
        """Copy with every point shifted by ``offset`` modulo ``L``."""
        off = np.asarray(offset, dtype=float)
        return Topology(self.edge, wrap(self.centres + off, self.edge),
                        wrap(self.nodes + off, self.edge), self.parents, self.params)

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (self.edge == other.edge and self.params == other.params
                and np.array_equal(self.centres, other.centres)
                and np.array_equal(self.nodes, other.nodes)
                and np.array_equal(self.parents, other.parents))

    __hash__ = None


def from_points(params: ModelParams, centres, nodes=(), parents=()) -> Topology:
    """Build a topology from explicit coordinates (handy for hand-made cases)."""
    return Topology(params.edge, np.asarray(centres, float).reshape(-1, 2),
                    np.asarray(nodes, float).reshape(-1, 2), np.asarray(parents, np.int64), params)


def sample_centres(params: ModelParams, stream=None) -> np.ndarray:
    """Homogeneous Poisson centres: ``Poisson(m)`` of them, uniform on the torus."""
    ss = as_stream(params.seed if stream is None else stream)
    rng = _generator(substream(ss, CENTRES_KEY))
    L = params.edge
    count = rng.poisson(params.m)
    return wrap(rng.uniform(0.0, L, size=(count, 2)), L)


def sample_cluster_nodes(centre, params: ModelParams, stream=None) -> np.ndarray:
    """Nodes of a single cluster.

    ``Poisson(q)`` points whose distance to ``centre`` follows the kernel
    truncated at ``L/2``, with uniform direction.  Positions are wrapped.
    ``stream`` is this cluster's own stream.
    """
    rng = _generator(stream)
    L = params.edge
    count = rng.poisson(params.q)
    u = rng.random(count)
    theta = rng.uniform(0.0, 2.0 * math.pi, size=count)
    rho = _radial_quantile(u, params.delta, 0.5 * L)
    pts = np.asarray(centre, dtype=float) + np.column_stack((rho * np.cos(theta), rho * np.sin(theta)))
    return wrap(pts, L)


def sample_topology(params: ModelParams, stream=None) -> Topology:
    """Superpose the clusters of every sampled centre.

    With ``stream=None`` the stream is seeded from ``params.seed``.
    """
    ss = as_stream(params.seed if stream is None else stream)
    centres = sample_centres(params, ss)
    chunks, labels = [], []
    for j, c in enumerate(centres):
        pts = sample_cluster_nodes(c, params, substream(ss, NODES_KEY, j))
        chunks.append(pts)
        labels.append(np.full(pts.shape[0], j, dtype=np.int64))
    nodes = np.concatenate(chunks) if chunks else np.zeros((0, 2))
    parents = np.concatenate(labels) if labels else np.zeros(0, dtype=np.int64)
    return Topology(params.edge, centres, nodes, parents, params)


# --------------------------------------------------------------------------
# intensity


def local_intensity(topology: Topology, xi):
    """Unnormalized intensity ``q * sum_j s(|xi - c_j|)``.

    The kernel's normalizing integral is left out on purpose, so values carry
    a Theta(1) factor relative to the actual node density; use
    ``sampling_intensity`` for the density the sampler really produces.
    ``xi`` may be one point or an ``(K, 2)`` array.
    """
    pts = np.asarray(xi, dtype=float)
    p = topology.params
    out = p.q * _kernels.kernel_sums(pts, topology.centres, topology.edge, p.delta)
    return float(out[0]) if pts.ndim == 1 else out


def sampling_intensity(topology: Topology, xi):
    """Exact conditional node density of the sampler at ``xi``.

    Equals the normalized, ``L/2``-truncated kernel sum; thinning against this
    field yields an exactly homogeneous point set.
    """
    pts = np.asarray(xi, dtype=float)
    p = topology.params
    L = topology.edge
    sums = _kernels.kernel_sums(pts, topology.centres, L, p.delta, cutoff=0.5 * L)
    out = p.q * sums / kernel_normalizer(L, p.delta)
    return float(out[0]) if pts.ndim == 1 else out


# --------------------------------------------------------------------------
# text format


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_topology(topology: Topology, fh: TextIO) -> None:
    p = topology.params
    fh.write(f"SNCP v1 L={_fmt(topology.edge)} n={_fmt(p.n)} gamma={_fmt(p.gamma)} "
             f"nu={_fmt(p.nu)} delta={_fmt(p.delta)} seed={int(p.seed)}\n")
    for j, (x, y) in enumerate(topology.centres):
        fh.write(f"C {j} {_fmt(x)} {_fmt(y)}\n")
    for i, ((x, y), parent) in enumerate(zip(topology.nodes, topology.parents)):
        fh.write(f"N {i} {int(parent)} {_fmt(x)} {_fmt(y)}\n")


def dumps_topology(topology: Topology) -> str:
    import io

    buf = io.StringIO()
    write_topology(topology, buf)
    return buf.getvalue()


def read_topology(lines: Iterable[str], **overrides) -> Topology:
    """Parse the text format.

    The header does not carry ``alpha``, ``power`` or ``mu``; pass them as
    keyword overrides if they differ from the ``ModelParams`` defaults.
    """
    it = iter(lines)
    header = next(it).split()
    if header[:2] != ["SNCP", "v1"]:
        raise ValueError("not an SNCP v1 topology")
    fields = dict(tok.split("=", 1) for tok in header[2:])
    params = ModelParams(n=float(fields["n"]), gamma=float(fields["gamma"]), nu=float(fields["nu"]),
                         delta=float(fields["delta"]), seed=int(fields["seed"]), **overrides)
    centres, nodes, parents = [], [], []
    for line in it:
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "C":
            centres.append((float(tok[2]), float(tok[3])))
        elif tok[0] == "N":
            parents.append(int(tok[2]))
            nodes.append((float(tok[3]), float(tok[4])))
        else:
            raise ValueError(f"unknown record {tok[0]!r}")
    return Topology(float(fields["L"]), np.asarray(centres, float).reshape(-1, 2),
                    np.asarray(nodes, float).reshape(-1, 2), np.asarray(parents, np.int64), params)


def loads_topology(text: str, **overrides) -> Topology:
    return read_topology(text.splitlines(), **overrides)
