"""Closed-form capacity scaling exponent and operational regime."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

REGIMES = ("I", "II", "III", "IV", "V")


@dataclass(frozen=True)
class Condition:
    """One evaluated branch condition; ``margin`` is the signed gap to its boundary."""

    label: str
    holds: bool
    margin: float


@dataclass(frozen=True)
class RegimeReport:
    alpha: float
    gamma: float
    delta: float
    nu: float
    beta: float
    e_C: float
    regime: str
    row: int
    branch_trace: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha, "gamma": self.gamma, "delta": self.delta, "nu": self.nu,
            "beta": self.beta, "e_C": self.e_C, "regime": self.regime, "row": self.row,
            "branch_trace": [{"label": c.label, "holds": c.holds, "margin": c.margin}
                             for c in self.branch_trace],
        }


def beta(alpha: float, gamma: float, delta: float, nu: float) -> float:
    """Exponent of the sparse-infrastructure intensity, ``1 - nu - delta (gamma - nu/2)``."""
    return 1.0 - nu - delta * (gamma - nu / 2.0)


def _validate(alpha, gamma, delta, nu):
    if not (alpha > 2 and gamma >= 0 and delta > 2 and 0 < nu < 1):
        raise InvalidParameterError(
            f"need alpha > 2, gamma >= 0, delta > 2, 0 < nu < 1; got "
            f"alpha={alpha}, gamma={gamma}, delta={delta}, nu={nu}")
    for v in (alpha, gamma, delta, nu):
        if not math.isfinite(v):
            raise InvalidParameterError("parameters must be finite")


def branch_values(alpha: float, gamma: float, delta: float, nu: float) -> dict:
    """Every row formula of the exponent table, evaluated regardless of its condition.

    Keys: ``row1``, ``row2``, ``row3``, ``first`` (shared first max-term),
    ``second_pos`` and ``second_neg`` (second max-term for beta > 0 / beta <= 0).
    """
    b = beta(alpha, gamma, delta, nu)
    ag = alpha * gamma
    return {
        "row1": 1.0,
        "row2": 2.0 - ag,
        "row3": (alpha - 1.0 - ag) / (alpha - 2.0),
        "first": 2.0 - ag + (alpha - 3.0) * nu / 2.0,
        "second_pos": gamma + b * (alpha - 1.0) / (alpha - 2.0),
        "second_neg": gamma + b * (alpha + 1.0) / 2.0,
    }


def scaling_exponent(alpha: float, gamma: float, delta: float, nu: float) -> RegimeReport:
    """Evaluate the exponent table top-down, first matching row wins.

    Conditions are compared exactly; ``branch_trace`` records how far each
    one was from flipping.  A tie between the two max-terms is labelled III.
    """
    _validate(alpha, gamma, delta, nu)
    b = beta(alpha, gamma, delta, nu)
    ag = alpha * gamma
    trace = []

    def check(label, holds, margin):
        trace.append(Condition(label, bool(holds), float(margin)))
        return holds

    def report(e, regime, row):
        return RegimeReport(alpha, gamma, delta, nu, b, e, regime, row, tuple(trace))

    if check("alpha*gamma <= 1", ag <= 1.0, 1.0 - ag):
        return report(1.0, "I", 1)
    if check("alpha <= 3", alpha <= 3.0, 3.0 - alpha):
        return report(2.0 - ag, "I", 2)
    lhs = (1.0 - 2.0 * gamma) / (alpha - 2.0)
    rhs = gamma - nu / 2.0
    if check("(1-2gamma)/(alpha-2) >= gamma-nu/2", lhs >= rhs, lhs - rhs):
        return report((alpha - 1.0 - ag) / (alpha - 2.0), "II", 3)
    first = 2.0 - ag + (alpha - 3.0) * nu / 2.0
    if check("beta > 0", b > 0.0, b):
        second, other, row = gamma + b * (alpha - 1.0) / (alpha - 2.0), "IV", 4
    else:
        second, other, row = gamma + b * (alpha + 1.0) / 2.0, "V", 5
    first_wins = first >= second
    check("first max-term >= second", first_wins, first - second)
    return report(first if first_wins else second, "III" if first_wins else other, row)


def regime_map(alpha_range, gamma_range, steps, nu: float, delta: float):
    """Rasterize the exponent over an ``(alpha, gamma)`` rectangle.

    Samples sit at the centres of ``steps x steps`` equal cells, so an open
    lower bound such as ``alpha = 2`` is never evaluated.  Returns a list of
    rows (one per alpha), each a list of ``RegimeReport``.
    """
    if isinstance(steps, int):
        steps = (steps, steps)
    if min(steps) < 2:
        raise ValueError("steps must be >= 2")
    (a0, a1), (g0, g1) = alpha_range, gamma_range
    if not (a1 > a0 and g1 > g0):
        raise ValueError("ranges must be non-empty")
    alphas = a0 + (np.arange(steps[0]) + 0.5) * (a1 - a0) / steps[0]
    gammas = g0 + (np.arange(steps[1]) + 0.5) * (g1 - g0) / steps[1]
    return [[scaling_exponent(float(a), float(g), delta, nu) for g in gammas] for a in alphas]


def regime_map_csv(grid, fh=None) -> str:
    """CSV with columns ``alpha,gamma,beta,e_C,regime``; 12 significant digits."""
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "gamma", "beta", "e_C", "regime"])
    for row in grid:
        for r in row:
            w.writerow([f"{r.alpha:.12g}", f"{r.gamma:.12g}", f"{r.beta:.12g}", f"{r.e_C:.12g}", r.regime])
    return buf.getvalue() if fh is None else ""
