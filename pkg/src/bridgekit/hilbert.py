"""Hilbert's projective metric on the positive orthant and Birkhoff's
contraction coefficient of a positive matrix.

Everything is evaluated on logarithms so that vectors whose entries span
many orders of magnitude keep full relative precision.
"""

import numpy as np

from .core import Kernel, safe_log
from .errors import DimensionMismatch, ZeroEntry


def _pair(x, y):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise DimensionMismatch(f"vectors of length {x.size} and {y.size}")
    return x, y


def hilbert_distance_log(log_x, log_y) -> float:
    """Hilbert distance between ``exp(log_x)`` and ``exp(log_y)``.

    Coordinates where both vectors vanish are ignored (both rays lie on the
    same face of the cone); a zero in only one of them gives ``inf``.
    """
    log_x, log_y = _pair(log_x, log_y)
    zx, zy = np.isneginf(log_x), np.isneginf(log_y)
    if np.any(zx != zy):
        return float("inf")
    keep = ~zx
    if not np.any(keep):
        return 0.0
    r = log_x[keep] - log_y[keep]
    return float(r.max() - r.min())


def hilbert_distance(x, y) -> float:
    """``log(max_i(x_i/y_i) / min_i(x_i/y_i))``.

    Invariant under independent positive rescaling of ``x`` and ``y``.

    >>> round(hilbert_distance([1, 2], [2, 1]), 6)
    1.386294
    """
    x, y = _pair(x, y)
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("Hilbert distance is defined on nonnegative vectors")
    return hilbert_distance_log(safe_log(x), safe_log(y))


def thompson_distance(x, y) -> float:
    """``log max(M(x, y), 1/m(x, y))`` with ``M = max x/y`` and ``m = min x/y``.

    Unlike the Hilbert distance this is not scale invariant.
    """
    x, y = _pair(x, y)
    lx, ly = safe_log(x), safe_log(y)
    zx, zy = np.isneginf(lx), np.isneginf(ly)
    if np.any(zx != zy):
        return float("inf")
    keep = ~zx
    if not np.any(keep):
        return 0.0
    r = lx[keep] - ly[keep]
    return float(max(r.max(), -r.min(), 0.0))


def _log_matrix(K):
    if isinstance(K, Kernel):
        return K.log_entries
    K = np.asarray(K, dtype=float)
    if np.any(K < 0):
        raise ValueError("kernel entries must be nonnegative")
    return safe_log(K)


def projective_diameter(K) -> float:
    """Projective diameter ``max log(g_ij g_kl / (g_il g_kj))`` of a positive matrix.

    Uses ``max_{j,l} [D_jl + D_lj]`` with ``D_jl = max_i (log g_ij - log g_il)``,
    which needs O(n^2) memory instead of scanning all index quadruples.
    """
    L = _log_matrix(K)
    if not np.all(np.isfinite(L)):
        i, j = np.argwhere(~np.isfinite(L))[0]
        raise ZeroEntry(f"entry ({i + 1}, {j + 1}) is zero; projective diameter is infinite")
    m = L.shape[1]
    D = np.full((m, m), -np.inf)
    for row in L:
        np.maximum(D, row[:, None] - row[None, :], out=D)
    return float(max(np.max(D + D.T), 0.0))


def contraction_ratio(K) -> float:
    """Birkhoff contraction coefficient ``tanh(diameter / 4)`` of ``x -> K x``.

    The transpose has the same diameter, hence the same coefficient.
    """
    return float(np.tanh(projective_diameter(K) / 4.0))


__all__ = [
    "contraction_ratio",
    "hilbert_distance",
    "hilbert_distance_log",
    "projective_diameter",
    "thompson_distance",
]
