"""Cohort-level explanations: k-means over 2-channel DTW with barycenter
centroids and silhouette model selection, plus best-match window search
(CILS) used by the held-out evaluation pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import TimeSeries
from .errors import ClusterError, ShapeError
from .extraction import Implet, implet_from_dict, implet_to_dict
from .tsdist import (MultiSeq, as_channels, dba_centroid, dtw_distance,
                     pairwise_matrix, silhouette_from_matrix,
                     sliding_dtw_costs)

__all__ = [
    "ClusterParams",
    "CohortResult",
    "canonical_order",
    "implet_channels",
    "cluster_implets",
    "find_cils",
    "cohort_to_dict",
    "cohort_from_dict",
    "save_cohorts",
    "load_cohorts",
]

MODE_VALUES = "values_only"
MODE_VALUES_ATTR = "values_and_attr"


@dataclass(frozen=True)
class ClusterParams:
    """k sweep bounds and per-run iteration budgets. The effective upper k
    is min(k_max, number of implets)."""

    k_max: int = 8
    repeats: int = 5
    max_kmeans_iter: int = 50
    dba_iter: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.k_max < 1 or self.repeats < 1:
            raise ValueError("k_max and repeats must be >= 1")
        if self.max_kmeans_iter < 1 or self.dba_iter < 1:
            raise ValueError("iteration budgets must be >= 1")

    def to_dict(self) -> dict:
        return {"k_max": self.k_max, "repeats": self.repeats,
                "max_kmeans_iter": self.max_kmeans_iter,
                "dba_iter": self.dba_iter, "seed": self.seed}


@dataclass(frozen=True)
class CohortResult:
    """Best clustering found for one class of implets.

    assignments follow the caller's implet order; trace records the
    silhouette of every (k, repeat) run that was scored.
    """

    class_id: int
    k_star: int
    centroids: list
    assignments: np.ndarray
    silhouette: float
    trace: list = field(default_factory=list)

    def __post_init__(self):
        assignments = np.asarray(self.assignments, dtype=np.int64)
        assignments.setflags(write=False)
        object.__setattr__(self, "assignments", assignments)
        if assignments.size and assignments.max() >= self.k_star:
            raise ClusterError("assignment index out of range")


def canonical_order(implets: list[Implet]) -> list[int]:
    """Indices that sort implets by (sample_id, l, r, class_id); clustering
    seeds draw from this order so permuted input gives identical results."""
    keys = [(im.sample_id, im.l, im.r, im.class_id) for im in implets]
    return sorted(range(len(implets)), key=keys.__getitem__)


def implet_channels(im: Implet, znorm_values: bool = False) -> np.ndarray:
    """(length, 2) array: value channel then attribution channel.

    Values are used raw by default (attributions arrive normalized);
    znorm_values re-standardizes the value channel per implet.
    """
    values = im.values
    if znorm_values:
        std = values.std()
        values = np.zeros_like(values) if std == 0.0 else (values - values.mean()) / std
    return np.column_stack([values, im.attributions])


def _kmeans_run(arrays, init_idx, params: ClusterParams, weights):
    """One seeded k-means run; returns (assignments, centroid arrays).

    Stops when assignments repeat with no empty-cluster repair, leaving the
    centroids that produced the final assignment in place so each item's
    assigned centroid is its nearest.
    """
    r = len(arrays)
    k = len(init_idx)
    centroids = [arrays[i].copy() for i in init_idx]
    assign = None
    for _ in range(params.max_kmeans_iter):
        dist = np.empty((r, k))
        for i, arr in enumerate(arrays):
            for c in range(k):
                dist[i, c] = dtw_distance(arr, centroids[c], weights)
        new_assign = dist.argmin(axis=1)
        repaired = False
        for c in range(k):
            if np.any(new_assign == c):
                continue
            # steal the farthest item from a cluster that can spare one
            own = dist[np.arange(r), new_assign]
            counts = np.bincount(new_assign, minlength=k)
            donors = np.flatnonzero(counts[new_assign] >= 2)
            pick = int(donors[np.argmax(own[donors])])
            new_assign[pick] = c
            centroids[c] = arrays[pick].copy()
            repaired = True
        if assign is not None and not repaired and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = [arrays[i] for i in np.flatnonzero(assign == c)]
            centroids[c] = as_channels(
                dba_centroid(members, centroids[c],
                             max_iter=params.dba_iter, weights=weights))
    return assign, centroids


def cluster_implets(implets: list[Implet], params: ClusterParams,
                    weights=None, threads: int = 1,
                    znorm_values: bool = False) -> CohortResult:
    """Sweep k = 1..min(k_max, r) with `repeats` seeded runs each and keep
    the run with the highest silhouette (ties: smaller k, then smaller
    repeat). k = 1 scores 0 by convention, so multi-cluster structure wins
    only with a positive silhouette.
    """
    if not implets:
        raise ClusterError("no implets to cluster")
    class_ids = {im.class_id for im in implets}
    if len(class_ids) != 1:
        raise ClusterError(f"implets span classes {sorted(class_ids)}; "
                           "cluster one class at a time")
    order = canonical_order(implets)
    arrays = [implet_channels(implets[i], znorm_values) for i in order]
    r = len(arrays)
    matrix = pairwise_matrix(arrays, weights=weights, threads=threads).values

    best = None
    trace = []
    for k in range(1, min(params.k_max, r) + 1):
        for q in range(params.repeats):
            rng = np.random.default_rng(
                np.random.SeedSequence((params.seed, k, q)))
            init_idx = rng.choice(r, size=k, replace=False).tolist()
            assign, centroids = _kmeans_run(arrays, init_idx, params, weights)
            sil = silhouette_from_matrix(matrix, assign) if k > 1 else 0.0
            trace.append({"k": k, "repeat": q, "silhouette": sil})
            if best is None or sil > best[0]:
                best = (sil, k, assign, centroids)

    sil, k_star, assign_canon, centroids = best
    assignments = np.empty(r, dtype=np.int64)
    for pos, orig in enumerate(order):
        assignments[orig] = assign_canon[pos]
    return CohortResult(class_id=class_ids.pop(), k_star=k_star,
                        centroids=[MultiSeq(c) for c in centroids],
                        assignments=assignments, silhouette=float(sil),
                        trace=trace)


def find_cils(centroid, series, mode: str = MODE_VALUES,
              attr=None) -> tuple[int, int, float]:
    """Best-matching window of the centroid's length in a series.

    values_only compares the centroid's value channel against the series;
    values_and_attr stacks (values, normalized attributions) and compares
    both channels. Returns 1-based inclusive (l, r) and the DTW distance;
    ties go to the smallest l.
    """
    cen = as_channels(centroid)
    values = series.values if isinstance(series, TimeSeries) else \
        np.asarray(series, dtype=np.float64)
    if mode == MODE_VALUES:
        query = np.ascontiguousarray(cen[:, :1])
        target = values[:, None]
    elif mode == MODE_VALUES_ATTR:
        if attr is None:
            raise ValueError("values_and_attr mode needs attributions")
        if cen.shape[1] != 2:
            raise ShapeError("values_and_attr needs a 2-channel centroid")
        wn = attr.normalized if hasattr(attr, "normalized") else \
            np.asarray(attr, dtype=np.float64)
        if wn.shape[0] != values.shape[0]:
            raise ShapeError("attribution length must match the series")
        target = np.column_stack([values, wn])
        query = cen
    else:
        raise ValueError(f"unknown mode {mode!r}")
    costs = sliding_dtw_costs(query, target)
    l0 = int(np.argmin(costs))
    return l0 + 1, l0 + cen.shape[0], float(costs[l0])


def cohort_to_dict(result: CohortResult) -> dict:
    return {
        "class_id": result.class_id,
        "k_star": result.k_star,
        "silhouette": result.silhouette,
        "assignments": result.assignments.tolist(),
        "centroids": [
            {"values": np.asarray(c.data[:, 0]).tolist(),
             "attributions": np.asarray(c.data[:, 1]).tolist()}
            for c in result.centroids
        ],
        "trace": result.trace,
    }


def cohort_from_dict(d: dict) -> CohortResult:
    centroids = [
        MultiSeq.from_channels(c["values"], c["attributions"])
        for c in d["centroids"]
    ]
    return CohortResult(class_id=int(d["class_id"]), k_star=int(d["k_star"]),
                        centroids=centroids,
                        assignments=np.asarray(d["assignments"], dtype=np.int64),
                        silhouette=float(d["silhouette"]),
                        trace=list(d["trace"]))


def save_cohorts(results: list[CohortResult], params: ClusterParams, path,
                 implets: list[Implet] | None = None,
                 extra: dict | None = None) -> None:
    """One result per class, plus the implets they were built from."""
    payload = {
        "params": params.to_dict(),
        "results": [cohort_to_dict(r) for r in results],
    }
    if implets is not None:
        payload["implets"] = [implet_to_dict(im) for im in implets]
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_cohorts(path) -> tuple[list[CohortResult], dict]:
    with open(path) as fh:
        payload = json.load(fh)
    results = [cohort_from_dict(d) for d in payload["results"]]
    if "implets" in payload:
        payload = dict(payload)
        payload["implet_objects"] = [implet_from_dict(e)
                                     for e in payload["implets"]]
    return results, payload
