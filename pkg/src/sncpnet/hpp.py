"""Achievable aggregate capacity of a homogeneous Poisson network."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidParameterError


@dataclass(frozen=True)
class HppParams:
    """A square region of edge ``edge`` holding an HPP of intensity ``psi``."""

    edge: float
    psi: float
    alpha: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not (self.edge > 0 and math.isfinite(self.edge)):
            raise InvalidParameterError("edge must be positive and finite")
        if not (self.psi >= 0 and math.isfinite(self.psi)):
            raise InvalidParameterError("psi must be >= 0 and finite")
        if not self.alpha > 2:
            raise InvalidParameterError("alpha must be > 2")
        if not 0 <= self.epsilon < 0.1:
            raise InvalidParameterError("epsilon must lie in [0, 0.1)")

    @property
    def nbar(self) -> float:
        """Expected node count ``psi * edge**2``."""
        return self.psi * self.edge**2


@dataclass(frozen=True)
class CapacityEstimate:
    case_id: int
    value: float
    nbar: float


def select_case(hpp: HppParams) -> int:
    """Pick the first matching branch: 1 if N >= L^a, else 2 if a < 3, else 3 if psi > 1, else 4."""
    if hpp.nbar >= hpp.edge**hpp.alpha:
        return 1
    if hpp.alpha < 3:
        return 2
    return 3 if hpp.psi > 1 else 4


def hpp_capacity(hpp: HppParams) -> CapacityEstimate:
    """Capacity in order sense, constant prefactors set to one.

    An empty system (``psi == 0``) has zero capacity.
    """
    case = select_case(hpp)
    nbar, L, a, eps = hpp.nbar, hpp.edge, hpp.alpha, hpp.epsilon
    if hpp.psi == 0:
        return CapacityEstimate(case, 0.0, 0.0)
    slack = nbar**-eps
    if case == 1:
        value = nbar * slack
    elif case == 2:
        value = nbar**2 * slack * L**-a
    elif case == 3:
        value = slack * L * hpp.psi ** ((a - 1.0) / (a - 2.0))
    else:
        value = slack * L * hpp.psi ** ((a + 1.0) / 2.0)
    return CapacityEstimate(case, value, nbar)
