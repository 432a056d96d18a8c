"""Model parameter tuples.

Only the native exponents are stored; ``edge``, ``m``, ``q`` and ``d_c`` are
derived on access so they can never drift out of sync with ``n``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

from .errors import InvalidParameterError, SupercriticalMuError

MU_PERCOLATION = 0.6


@dataclass(frozen=True)
class ModelParams:
    """Scaling-law parameters of a clustered network plus simulation knobs.

    Parameters
    ----------
    n : float
        Expected number of nodes.
    gamma : float
        Area exponent, the torus edge is ``n**gamma``.
    nu : float
        Cluster exponent, ``m = n**nu`` centres of ``q = n**(1 - nu)`` nodes.
    delta : float
        Decay exponent of the power-law kernel.
    alpha : float
        Path-loss exponent.
    power : float
        Per-node power budget.
    mu : float
        Radius constant of the nested-domain hierarchy.
    seed : int
        Master seed for every random stream derived from these parameters.
    """

    n: float
    gamma: float
    nu: float
    delta: float = 2.5
    alpha: float = 4.0
    power: float = 1.0
    mu: float = 0.5
    seed: int = 0

    def __post_init__(self):
        checks = [
            (self.n >= 1, "n must be >= 1"),
            (self.gamma >= 0, "gamma must be >= 0"),
            (0 < self.nu < 1, "nu must lie in (0, 1)"),
            (self.delta > 2, "delta must be > 2"),
            (self.alpha > 2, "alpha must be > 2"),
            (self.mu > 0, "mu must be > 0"),
            (self.power > 0, "power must be > 0"),
            (0 <= int(self.seed) < 2**64, "seed must fit in 64 bits"),
        ]
        for ok, msg in checks:
            if not ok:
                raise InvalidParameterError(msg)
        if not self.mu < MU_PERCOLATION:
            raise SupercriticalMuError(f"mu={self.mu} is at or above the percolation threshold {MU_PERCOLATION}")
        for name in ("n", "gamma", "nu", "delta", "alpha", "power", "mu"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameterError(f"{name} must be finite")

    @property
    def edge(self) -> float:
        """Torus edge ``L``."""
        return self.n**self.gamma

    @property
    def m(self) -> float:
        """Expected number of cluster centres."""
        return self.n**self.nu

    @property
    def q(self) -> float:
        """Expected number of nodes per cluster."""
        return self.n ** (1.0 - self.nu)

    @property
    def d_c(self) -> float:
        """Typical distance between cluster centres."""
        return self.n ** (self.gamma - self.nu / 2.0)

    def with_n(self, n: float) -> "ModelParams":
        return replace(self, n=n)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ChannelParams:
    """Constant channel gain and noise variance.

    Fading phases are not represented; the analysis only needs the
    distance-dependent part of the gain.
    """

    gain: float = 1.0
    noise: float = 1.0
    alpha: float = 4.0

    def __post_init__(self):
        if not self.gain > 0:
            raise InvalidParameterError("gain must be > 0")
        if not self.noise > 0:
            raise InvalidParameterError("noise must be > 0")
        if not self.alpha > 2:
            raise InvalidParameterError("alpha must be > 2")

    @classmethod
    def from_model(cls, params: ModelParams, gain: float = 1.0, noise: float = 1.0):
        return cls(gain=gain, noise=noise, alpha=params.alpha)
