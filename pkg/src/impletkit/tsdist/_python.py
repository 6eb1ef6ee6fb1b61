"""Pure-numpy DTW kernels; reference fallback for the compiled core.

All kernels take (length, channels) float64 arrays and a per-channel weight
vector. The per-point cost is the weighted squared Euclidean distance and
the returned value is the accumulated cost (no square root), step set
{(1,0), (0,1), (1,1)}, no warping window.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def _point_costs(a: np.ndarray, b: np.ndarray, weights: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return (diff * diff) @ weights


def dtw_accumulated(a: np.ndarray, b: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Full accumulated-cost matrix, shape (len(a), len(b))."""
    cost = _point_costs(a, b, weights)
    n, m = cost.shape
    acc = np.empty_like(cost)
    acc[0, 0] = cost[0, 0]
    for j in range(1, m):
        acc[0, j] = acc[0, j - 1] + cost[0, j]
    for i in range(1, n):
        acc[i, 0] = acc[i - 1, 0] + cost[i, 0]
        row = acc[i]
        prev = acc[i - 1]
        for j in range(1, m):
            row[j] = cost[i, j] + min(prev[j - 1], prev[j], row[j - 1])
    return acc


def dtw_cost(a: np.ndarray, b: np.ndarray, weights: np.ndarray) -> float:
    return float(dtw_accumulated(a, b, weights)[-1, -1])


def dtw_path(a: np.ndarray, b: np.ndarray,
             weights: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Optimal alignment; traceback prefers diagonal, then up, then left."""
    acc = dtw_accumulated(a, b, weights)
    i = acc.shape[0] - 1
    j = acc.shape[1] - 1
    rev_a = [i]
    rev_b = [j]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag = acc[i - 1, j - 1]
            up = acc[i - 1, j]
            left = acc[i, j - 1]
            if diag <= up and diag <= left:
                i -= 1
                j -= 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        rev_a.append(i)
        rev_b.append(j)
    idx_a = np.asarray(rev_a[::-1], dtype=np.int64)
    idx_b = np.asarray(rev_b[::-1], dtype=np.int64)
    return float(acc[-1, -1]), idx_a, idx_b


def sliding_dtw(query: np.ndarray, series: np.ndarray,
                weights: np.ndarray) -> np.ndarray:
    """DTW cost of the query against every length-len(query) window."""
    q = query.shape[0]
    T = series.shape[0]
    out = np.empty(T - q + 1)
    for start in range(T - q + 1):
        out[start] = dtw_cost(query, series[start:start + q], weights)
    return out
