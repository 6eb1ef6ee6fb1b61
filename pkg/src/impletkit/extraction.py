"""Implet extraction: greedy left-to-right scan over normalized attributions.

An implet (l, r) — 1-based inclusive bounds, as in the serialized form — is
a subsequence whose score

    sum:  sum(|w_i|, i=l..r) + lambda * (r - l + 1)
    mean: sum(|w_i|, i=l..r) / (r - l + 1) + lambda * (r - l + 1)

reaches the threshold phi, with length within [len_min, len_max]. A start l
is eligible when the signed normalized attribution w_l >= phi; the end is
the score-maximizing r (ties to the smallest r), and scanning resumes past
an emitted implet so results never overlap.

Under the summed score with lambda > 0 the score is strictly increasing in
r, so every emitted implet has maximal admissible length; the mean variant
exists for callers who want shorter implets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import AttributionSeries, TimeSeries
from .errors import ShapeError

__all__ = [
    "ImpletParams",
    "Implet",
    "implet_score",
    "extract_implets",
    "brute_force_extract",
    "extract_dataset",
    "save_implets",
    "load_implets",
]

SCORING_MODES = ("sum", "mean")


@dataclass(frozen=True)
class ImpletParams:
    """Extraction hyperparameters; len_max=None resolves to floor(T/2)."""

    lam: float = 0.1
    phi: float = 1.0
    len_min: int = 3
    len_max: int | None = None
    scoring: str = "sum"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.len_min < 1:
            raise ValueError("len_min must be >= 1")
        if self.len_max is not None and self.len_max < self.len_min:
            raise ValueError("len_max must be >= len_min")
        if self.scoring not in SCORING_MODES:
            raise ValueError(f"scoring must be one of {SCORING_MODES}")

    def resolved_len_max(self, T: int) -> int:
        return T // 2 if self.len_max is None else self.len_max

    def to_dict(self, T: int | None = None) -> dict:
        len_max = self.len_max if T is None else self.resolved_len_max(T)
        return {"lambda": self.lam, "phi": self.phi, "len_min": self.len_min,
                "len_max": len_max, "scoring": self.scoring}


@dataclass(frozen=True, eq=False)
class Implet:
    """One extracted subsequence; l and r are 1-based inclusive."""

    sample_id: int
    class_id: int
    l: int
    r: int
    values: np.ndarray
    attributions: np.ndarray
    score: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        attrs = np.asarray(self.attributions, dtype=np.float64)
        length = self.r - self.l + 1
        if values.shape != (length,) or attrs.shape != (length,):
            raise ShapeError("implet slices must match r - l + 1")
        values.setflags(write=False)
        attrs.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "attributions", attrs)

    def __len__(self):
        return self.r - self.l + 1

    def __eq__(self, other):
        if not isinstance(other, Implet):
            return NotImplemented
        return (self.sample_id == other.sample_id
                and self.class_id == other.class_id
                and self.l == other.l and self.r == other.r
                and self.score == other.score
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.attributions, other.attributions))


def implet_score(l: int, r: int, w, lam: float, scoring: str = "sum") -> float:
    """Score of the window [l, r] (1-based inclusive) over attributions w.

    Summation is a plain left-to-right loop; the extraction fast path
    reproduces the same operation order so scores agree bitwise.
    """
    T = len(w)
    if not 1 <= l <= r <= T:
        raise IndexError(f"window [{l}, {r}] out of range for length {T}")
    total = 0.0
    for i in range(l - 1, r):
        total += abs(w[i])
    length = r - l + 1
    if scoring == "mean":
        return float(total / length + lam * length)
    return float(total + lam * length)


def _normalized(w) -> np.ndarray:
    if isinstance(w, AttributionSeries):
        return w.normalized
    return np.asarray(w, dtype=np.float64)


def _values(x) -> np.ndarray:
    if isinstance(x, TimeSeries):
        return x.values
    return np.asarray(x, dtype=np.float64)


def _ids(x, w) -> tuple[int, int]:
    # The attribution's sample_id wins: dataset-level attribution stamps the
    # positional index there, which is what downstream lookups use.
    if isinstance(w, AttributionSeries):
        sample_id = w.sample_id
    else:
        sample_id = x.id if isinstance(x, TimeSeries) else -1
    class_id = w.class_id if isinstance(w, AttributionSeries) else -1
    return sample_id, class_id


def _make_implet(x_vals, wn, sample_id, class_id, l, r, score) -> Implet:
    return Implet(sample_id=sample_id, class_id=class_id, l=l, r=r,
                  values=x_vals[l - 1:r].copy(),
                  attributions=wn[l - 1:r].copy(), score=score)


def _best_end_scan(wn, l, j_min, j_max, lam, scoring) -> tuple[int, float]:
    """argmax over ends via a running sum; bit-identical to per-end rescoring."""
    best_j = -1
    best_s = -np.inf
    total = 0.0
    for j in range(l, j_max + 1):
        total += abs(wn[j - 1])
        if j < j_min:
            continue
        length = j - l + 1
        if scoring == "mean":
            s = total / length + lam * length
        else:
            s = total + lam * length
        if s > best_s:
            best_s = s
            best_j = j
    return best_j, float(best_s)


def extract_implets(x, w, params: ImpletParams) -> list[Implet]:
    """Greedy extraction; output is non-overlapping and sorted by l.

    Exactly equivalent to brute_force_extract, including float behavior.
    """
    x_vals = _values(x)
    wn = _normalized(w)
    T = x_vals.shape[0]
    if wn.shape[0] != T:
        raise ShapeError(f"attribution length {wn.shape[0]} != series length {T}")
    len_max = params.resolved_len_max(T)
    if len_max < params.len_min:
        return []
    sample_id, class_id = _ids(x, w)
    sum_fast = params.scoring == "sum" and params.lam > 0

    implets: list[Implet] = []
    i = 1
    while i <= T - params.len_min + 1:
        if wn[i - 1] >= params.phi:
            j_min = i + params.len_min - 1
            j_max = min(i + len_max - 1, T)
            if sum_fast:
                # summed score strictly increases with the end position
                j_star = j_max
                score = implet_score(i, j_star, wn, params.lam, params.scoring)
            else:
                j_star, score = _best_end_scan(wn, i, j_min, j_max,
                                               params.lam, params.scoring)
            if score >= params.phi:
                implets.append(_make_implet(x_vals, wn, sample_id, class_id,
                                            i, j_star, score))
                i = j_star + 1
            else:
                i += 1
        else:
            i += 1
    return implets


def brute_force_extract(x, w, params: ImpletParams) -> list[Implet]:
    """Reference oracle: the same greedy scan with every candidate end
    rescored from scratch and no shortcuts. Intended for short series."""
    x_vals = _values(x)
    wn = _normalized(w)
    T = x_vals.shape[0]
    if wn.shape[0] != T:
        raise ShapeError(f"attribution length {wn.shape[0]} != series length {T}")
    len_max = params.resolved_len_max(T)
    if len_max < params.len_min:
        return []
    sample_id, class_id = _ids(x, w)

    implets: list[Implet] = []
    i = 1
    while i <= T - params.len_min + 1:
        if wn[i - 1] >= params.phi:
            j_min = i + params.len_min - 1
            j_max = min(i + len_max - 1, T)
            best_j = -1
            best_s = -np.inf
            for j in range(j_min, j_max + 1):
                s = implet_score(i, j, wn, params.lam, params.scoring)
                if s > best_s:
                    best_s = s
                    best_j = j
            if best_s >= params.phi:
                implets.append(_make_implet(x_vals, wn, sample_id, class_id,
                                            i, best_j, best_s))
                i = best_j + 1
            else:
                i += 1
        else:
            i += 1
    return implets


def extract_dataset(dataset, attributions, params: ImpletParams) -> list[Implet]:
    """Extract from every attribution entry against its referenced sample."""
    out: list[Implet] = []
    for attr in attributions:
        sample = dataset.samples[attr.sample_id]
        out.extend(extract_implets(sample, attr, params))
    return out


def implet_to_dict(im: Implet) -> dict:
    return {
        "sample_id": im.sample_id,
        "class_id": im.class_id,
        "l": im.l,
        "r": im.r,
        "values": im.values.tolist(),
        "attributions": im.attributions.tolist(),
        "score": im.score,
    }


def implet_from_dict(e: dict) -> Implet:
    return Implet(sample_id=int(e["sample_id"]), class_id=int(e["class_id"]),
                  l=int(e["l"]), r=int(e["r"]),
                  values=np.asarray(e["values"], dtype=np.float64),
                  attributions=np.asarray(e["attributions"], dtype=np.float64),
                  score=float(e["score"]))


def save_implets(implets: list[Implet], params: ImpletParams, path,
                 extra: dict | None = None) -> None:
    """Implet set as JSON; indices are 1-based in files."""
    payload = {
        "params": params.to_dict(),
        "implets": [implet_to_dict(im) for im in implets],
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_implets(path) -> tuple[list[Implet], dict]:
    """Returns (implets, full payload dict) from an implet JSON file."""
    with open(path) as fh:
        payload = json.load(fh)
    implets = [implet_from_dict(e) for e in payload["implets"]]
    return implets, payload
