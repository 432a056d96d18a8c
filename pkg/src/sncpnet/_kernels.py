"""Compiled inner loops for the O(N*M) and O(N^2) sums.

Torus separations are folded branch-free as ``h - |h - |a - b||`` with
``h = L/2`` so the loops vectorize.  Path-loss powers whose exponent is a
multiple of 1/4 of a squared distance are built from sqrt chains; anything
else goes through ``pow``.  Results are per-row sums; callers reduce rows
with ``numpy.sum`` (pairwise), which keeps totals independent of how rows
are scheduled.
"""
from __future__ import annotations

import functools

import numba
import numpy as np

_FASTMATH = {"reassoc", "nsz", "arcp", "contract"}


def _power_split(alpha: float):
    """Split ``alpha/2`` into an integer part and a count of quarter powers."""
    quarters = alpha * 2.0
    if abs(quarters - round(quarters)) > 1e-12 or alpha / 2.0 > 16:
        return None
    quarters = int(round(quarters))
    return quarters // 4, quarters % 4


@functools.lru_cache(maxsize=None)
def _inverse_power(ipow: int, quarters: int):
    @numba.njit(fastmath=_FASTMATH, error_model="numpy", inline="always")
    def pw(r):
        t = 1.0
        if quarters == 1:
            t = np.sqrt(np.sqrt(r))
        elif quarters == 2:
            t = np.sqrt(r)
        elif quarters == 3:
            t = np.sqrt(r) * np.sqrt(np.sqrt(r))
        for _ in range(ipow):
            t *= r
        return t

    return pw


@functools.lru_cache(maxsize=None)
def _row_kernel(ipow: int, quarters: int):
    pw = _inverse_power(ipow, quarters)

    @numba.njit(fastmath=_FASTMATH, error_model="numpy")
    def rows(sx, sy, tx, ty, L):
        out = np.empty(sx.size)
        h = 0.5 * L
        for i in range(sx.size):
            acc = 0.0
            xi = sx[i]
            yi = sy[i]
            for k in range(tx.size):
                ax = h - abs(h - abs(xi - tx[k]))
                ay = h - abs(h - abs(yi - ty[k]))
                acc += pw(1.0 / (ax * ax + ay * ay))
            out[i] = acc
        return out

    return rows


@numba.njit(fastmath=_FASTMATH, error_model="numpy")
def _rows_generic(sx, sy, tx, ty, L, half_alpha):
    out = np.empty(sx.size)
    h = 0.5 * L
    e = -half_alpha
    for i in range(sx.size):
        acc = 0.0
        xi = sx[i]
        yi = sy[i]
        for k in range(tx.size):
            ax = h - abs(h - abs(xi - tx[k]))
            ay = h - abs(h - abs(yi - ty[k]))
            acc += (ax * ax + ay * ay) ** e
        out[i] = acc
    return out


def inverse_power_rows(src: np.ndarray, dst: np.ndarray, L: float, alpha: float) -> np.ndarray:
    """Per-source sums of ``d^-alpha`` over all destinations, torus metric."""
    src = np.ascontiguousarray(src, dtype=np.float64)
    dst = np.ascontiguousarray(dst, dtype=np.float64)
    if src.shape[0] == 0:
        return np.zeros(0)
    if dst.shape[0] == 0:
        return np.zeros(src.shape[0])
    args = (src[:, 0].copy(), src[:, 1].copy(), dst[:, 0].copy(), dst[:, 1].copy(), float(L))
    split = _power_split(alpha)
    if split is None:
        return _rows_generic(*args, 0.5 * alpha)
    return _row_kernel(*split)(*args)


@numba.njit(fastmath=_FASTMATH, error_model="numpy")
def _kernel_sums(px, py, cx, cy, L, delta, cutoff2):
    out = np.empty(px.size)
    h = 0.5 * L
    e = -0.5 * delta
    for i in range(px.size):
        acc = 0.0
        for j in range(cx.size):
            ax = h - abs(h - abs(px[i] - cx[j]))
            ay = h - abs(h - abs(py[i] - cy[j]))
            d2 = ax * ax + ay * ay
            v = 1.0 if d2 <= 1.0 else d2**e
            acc += v if d2 <= cutoff2 else 0.0
        out[i] = acc
    return out


@functools.lru_cache(maxsize=None)
def _kernel_row(ipow: int, quarters: int):
    pw = _inverse_power(ipow, quarters)

    @numba.njit(fastmath=_FASTMATH, error_model="numpy")
    def sums(px, py, cx, cy, L, cutoff2):
        out = np.empty(px.size)
        h = 0.5 * L
        for i in range(px.size):
            acc = 0.0
            xi = px[i]
            yi = py[i]
            for j in range(cx.size):
                ax = h - abs(h - abs(xi - cx[j]))
                ay = h - abs(h - abs(yi - cy[j]))
                d2 = ax * ax + ay * ay
                v = min(1.0, pw(1.0 / max(d2, 1.0)))
                acc += v if d2 <= cutoff2 else 0.0
            out[i] = acc
        return out

    return sums


def kernel_sums(points: np.ndarray, centres: np.ndarray, L: float, delta: float,
                cutoff: float = np.inf) -> np.ndarray:
    """``sum_j s(|p - c_j|)`` for every point, ignoring centres beyond ``cutoff``."""
    points = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    centres = np.ascontiguousarray(centres, dtype=np.float64).reshape(-1, 2)
    if points.shape[0] == 0:
        return np.zeros(0)
    if centres.shape[0] == 0:
        return np.zeros(points.shape[0])
    args = (points[:, 0].copy(), points[:, 1].copy(), centres[:, 0].copy(), centres[:, 1].copy(), float(L))
    split = _power_split(delta)
    if split is None:
        return _kernel_sums(*args, float(delta), float(cutoff) ** 2)
    return _kernel_row(*split)(*args, float(cutoff) ** 2)


@numba.njit(fastmath=_FASTMATH, error_model="numpy")
def _rect_pair_sums(au, av, ahu, ahv, aw, bu, bv, bhu, bhv, bw, L, tol, half_alpha):
    out = np.empty(au.size)
    h = 0.5 * L
    e = -half_alpha
    zero = 0
    for i in range(au.size):
        acc = 0.0
        for k in range(bu.size):
            gu = h - abs(h - abs(au[i] - bu[k])) - ahu[i] - bhu[k] - tol
            gv = h - abs(h - abs(av[i] - bv[k])) - ahv[i] - bhv[k] - tol
            gu = gu if gu > 0.0 else 0.0
            gv = gv if gv > 0.0 else 0.0
            g2 = gu * gu + gv * gv
            if g2 <= 0.0:
                zero += 1
                continue
            acc += aw[i] * bw[k] * g2**e
        out[i] = acc
    return out, zero


def squarelet_pair_sums(a_cells, a_counts, b_cells, b_counts, L, alpha, tol):
    """Rows of ``U(A) U(B) dmin(A, B)^-alpha`` over axis-aligned cells.

    Cells are given as ``(centre_u, centre_v, half_u, half_v)`` rows.  Returns
    the row sums and the number of cell pairs found at distance zero.
    """
    a = np.ascontiguousarray(a_cells, dtype=np.float64).reshape(-1, 4)
    b = np.ascontiguousarray(b_cells, dtype=np.float64).reshape(-1, 4)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros(a.shape[0]), 0
    cols_a = [a[:, j].copy() for j in range(4)]
    cols_b = [b[:, j].copy() for j in range(4)]
    return _rect_pair_sums(
        *cols_a, np.asarray(a_counts, dtype=np.float64),
        *cols_b, np.asarray(b_counts, dtype=np.float64),
        float(L), float(tol), 0.5 * float(alpha),
    )
