"""Distance and averaging kernels: dependent DTW (1-D and 2-D), DTW
barycenter averaging, and a DTW-based silhouette score.

The hot dynamic-programming loops live in a compiled extension
(impletkit._dtwcore) with a pure-numpy fallback; the backend is chosen at
import time and can be forced with IMPLET_DTW_BACKEND=python|compiled.

The per-point cost is the weighted squared Euclidean distance over
channels, and distances are accumulated squared costs (no final square
root) so that barycenter updates and silhouette ratios stay consistent.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import ClusterError, ShapeError
from . import _python

__all__ = [
    "BACKEND_NAME",
    "MultiSeq",
    "DistanceMatrix",
    "as_channels",
    "dtw_distance",
    "dtw_alignment",
    "sliding_dtw_costs",
    "pairwise_matrix",
    "dba_centroid",
    "silhouette_dtw",
]


def _select_backend():
    forced = os.environ.get("IMPLET_DTW_BACKEND", "").strip().lower()
    if forced == "python":
        return _python
    try:
        from .. import _dtwcore
    except ImportError:
        if forced == "compiled":
            raise ImportError(
                "IMPLET_DTW_BACKEND=compiled but the extension is not built"
            )
        return _python
    return _dtwcore


_backend = _select_backend()
BACKEND_NAME: str = _backend.BACKEND_NAME


@dataclass(frozen=True, eq=False)
class MultiSeq:
    """A 1- or 2-channel sequence stored as a (length, channels) array."""

    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("MultiSeq needs a non-empty (length, channels) array")
        if not np.all(np.isfinite(data)):
            raise ValueError("MultiSeq values must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_values(cls, values) -> "MultiSeq":
        return cls(np.asarray(values, dtype=np.float64))

    @classmethod
    def from_channels(cls, *channels) -> "MultiSeq":
        return cls(np.column_stack([np.asarray(c, dtype=np.float64)
                                    for c in channels]))

    @property
    def channels(self) -> int:
        return self.data.shape[1]

    @property
    def length(self) -> int:
        return self.data.shape[0]

    def __len__(self):
        return self.data.shape[0]


def as_channels(seq) -> np.ndarray:
    """Coerce a MultiSeq or array to a C-contiguous (length, channels) array."""
    if isinstance(seq, MultiSeq):
        return np.ascontiguousarray(seq.data)
    arr = np.ascontiguousarray(seq, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError("sequence must be 1-D or (length, channels)")
    return np.ascontiguousarray(arr)


def _resolve_weights(channels: int, weights) -> np.ndarray:
    if weights is None:
        return np.ones(channels)
    w = np.ascontiguousarray(weights, dtype=np.float64)
    if w.ndim == 0:
        w = w[None]
    if w.shape != (channels,):
        raise ShapeError(f"need {channels} channel weights, got shape {w.shape}")
    if np.any(w <= 0):
        raise ValueError("channel weights must be positive")
    return w


def _pair(a, b, weights) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = as_channels(a)
    b = as_channels(b)
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"channel mismatch: {a.shape[1]} vs {b.shape[1]}")
    return a, b, _resolve_weights(a.shape[1], weights)


def dtw_distance(a, b, weights=None) -> float:
    """Accumulated dependent-DTW cost between two sequences."""
    a, b, w = _pair(a, b, weights)
    return float(_backend.dtw_cost(a, b, w))


def dtw_alignment(a, b, weights=None) -> tuple[float, np.ndarray, np.ndarray]:
    """(cost, index path in a, index path in b) for the optimal alignment."""
    a, b, w = _pair(a, b, weights)
    cost, ia, ib = _backend.dtw_path(a, b, w)
    return float(cost), ia, ib


def sliding_dtw_costs(query, series, weights=None) -> np.ndarray:
    """DTW cost of query against every window of its own length (stride 1)."""
    q, s, w = _pair(query, series, weights)
    if q.shape[0] > s.shape[0]:
        raise ShapeError(
            f"query length {q.shape[0]} exceeds series length {s.shape[0]}"
        )
    return np.asarray(_backend.sliding_dtw(q, s, w))


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric pairwise distances with a zero diagonal."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("distance matrix must be square")
        if np.any(np.diag(values) != 0.0):
            raise ValueError("diagonal must be exactly zero")
        if not np.allclose(values, values.T, atol=1e-9):
            raise ValueError("matrix must be symmetric within 1e-9")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in self.values:
                writer.writerow([format(v, ".17g") for v in row])


def pairwise_matrix(seqs, weights=None, threads: int = 1) -> DistanceMatrix:
    """All-pairs DTW distances. Each pair is written to a fixed slot, so the
    result is identical regardless of thread count."""
    arrays = [as_channels(s) for s in seqs]
    n = len(arrays)
    if n == 0:
        raise ClusterError("no sequences given")
    channels = arrays[0].shape[1]
    for arr in arrays[1:]:
        if arr.shape[1] != channels:
            raise ShapeError("all sequences must share a channel count")
    w = _resolve_weights(channels, weights)
    out = np.zeros((n, n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def compute(pair):
        i, j = pair
        out[i, j] = out[j, i] = _backend.dtw_cost(arrays[i], arrays[j], w)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(compute, pairs))
    else:
        for pair in pairs:
            compute(pair)
    return DistanceMatrix(values=out)


def dba_centroid(members, init, max_iter: int = 10, tol: float = 1e-6,
                 weights=None) -> MultiSeq:
    """DTW barycenter averaging with a fixed centroid length.

    Every member is aligned to the current centroid; the points mapped to
    each centroid position are averaged per channel. Iteration stops when
    the within-set sum of DTW costs improves by less than tol or after
    max_iter rounds. The cost sum is non-increasing across iterations.
    """
    member_arrays = [as_channels(m) for m in members]
    if not member_arrays:
        raise ClusterError("DBA needs at least one member")
    centroid = as_channels(init).copy()
    channels = centroid.shape[1]
    for arr in member_arrays:
        if arr.shape[1] != channels:
            raise ShapeError("members and init must share a channel count")
    w = _resolve_weights(channels, weights)

    prev_cost = np.inf
    for _ in range(max_iter):
        sums = np.zeros_like(centroid)
        counts = np.zeros(centroid.shape[0])
        cost = 0.0
        for arr in member_arrays:
            c, idx_m, idx_c = _backend.dtw_path(arr, centroid, w)
            cost += c
            np.add.at(sums, idx_c, arr[idx_m])
            np.add.at(counts, idx_c, 1.0)
        centroid = sums / counts[:, None]
        if prev_cost - cost < tol:
            break
        prev_cost = cost
    return MultiSeq(centroid)


def dba_cost_history(members, init, max_iter: int = 10,
                     weights=None) -> list[float]:
    """Within-set DTW cost sum before each centroid update; for diagnostics."""
    member_arrays = [as_channels(m) for m in members]
    if not member_arrays:
        raise ClusterError("DBA needs at least one member")
    centroid = as_channels(init).copy()
    w = _resolve_weights(centroid.shape[1], weights)
    history = []
    for _ in range(max_iter):
        sums = np.zeros_like(centroid)
        counts = np.zeros(centroid.shape[0])
        cost = 0.0
        for arr in member_arrays:
            c, idx_m, idx_c = _backend.dtw_path(arr, centroid, w)
            cost += c
            np.add.at(sums, idx_c, arr[idx_m])
            np.add.at(counts, idx_c, 1.0)
        history.append(cost)
        centroid = sums / counts[:, None]
    return history


def silhouette_dtw(items, assignments, weights=None) -> float:
    """Mean silhouette over the pairwise DTW matrix.

    Singleton-cluster items score 0, as does the degenerate all-zero
    distance case; a single cluster id yields 0 overall.
    """
    items = list(items)
    assignments = np.asarray(assignments, dtype=np.int64)
    if len(items) != assignments.shape[0]:
        raise ShapeError("items and assignments differ in length")
    if len(items) < 2:
        raise ShapeError("silhouette needs at least 2 items")
    matrix = pairwise_matrix(items, weights=weights).values
    return silhouette_from_matrix(matrix, assignments)


def silhouette_from_matrix(matrix: np.ndarray, assignments) -> float:
    """Silhouette from a precomputed distance matrix (same conventions)."""
    assignments = np.asarray(assignments, dtype=np.int64)
    labels = np.unique(assignments)
    if labels.shape[0] < 2:
        return 0.0
    n = matrix.shape[0]
    scores = np.zeros(n)
    for i in range(n):
        own = assignments[i]
        mask_own = assignments == own
        n_own = int(mask_own.sum())
        if n_own <= 1:
            continue  # singleton: score 0
        a = matrix[i, mask_own].sum() / (n_own - 1)
        b = np.inf
        for other in labels:
            if other == own:
                continue
            mask = assignments == other
            b = min(b, matrix[i, mask].mean())
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean())
