"""Synthetic binary datasets with known discriminative intervals.

gaussian_bump plants one localized bump in class 1; two_motifs splits
class 1 into a bump sub-population and a dip sub-population at distinct
centers. Ground-truth intervals (center +/- 2 width, 1-based, clipped)
land in dataset metadata so localization can be scored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset, TimeSeries, save_ucr_tsv

__all__ = ["SynthSpec", "generate", "write_dataset"]

MOTIF_BUMP = "gaussian_bump"
MOTIF_TWO = "two_motifs"


@dataclass(frozen=True)
class SynthSpec:
    n_per_class: int = 100
    T: int = 100
    motif: str = MOTIF_BUMP
    bump_center: float | None = None  # None: T/2 (bump), 0.3T/0.7T (two motifs)
    bump_width: float = 4.0
    amplitude: float = 2.0
    noise_std: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.motif not in (MOTIF_BUMP, MOTIF_TWO):
            raise ValueError(f"unknown motif {self.motif!r}")
        if self.n_per_class < 1 or self.T < 8:
            raise ValueError("need n_per_class >= 1 and T >= 8")
        if self.bump_width <= 0 or self.noise_std < 0:
            raise ValueError("bump_width must be positive, noise_std >= 0")
        for c in self._centers():
            lo, hi = self._truth(c)
            if not (1 <= lo <= hi <= self.T):
                raise ValueError("discriminative interval must lie in [1, T]")

    def _centers(self) -> list[float]:
        if self.motif == MOTIF_BUMP:
            return [self.T / 2 if self.bump_center is None else self.bump_center]
        if self.bump_center is None:
            return [0.3 * self.T, 0.7 * self.T]
        return [self.bump_center, min(self.bump_center + 0.4 * self.T, self.T - 1)]

    def _truth(self, center: float) -> tuple[int, int]:
        lo = max(1, math.ceil(center - 2 * self.bump_width))
        hi = min(self.T, math.floor(center + 2 * self.bump_width))
        return lo, hi

    def to_dict(self) -> dict:
        return {"n_per_class": self.n_per_class, "T": self.T,
                "motif": self.motif, "bump_center": self.bump_center,
                "bump_width": self.bump_width, "amplitude": self.amplitude,
                "noise_std": self.noise_std, "seed": self.seed}


def _bump(T: int, center: float, width: float, amplitude: float) -> np.ndarray:
    t = np.arange(1, T + 1, dtype=np.float64)
    return amplitude * np.exp(-((t - center) ** 2) / (2.0 * width ** 2))


def generate(spec: SynthSpec) -> LabeledDataset:
    """Class 0 is pure noise; class 1 carries the motif(s). Deterministic
    per seed. Metadata records truth intervals and, for two_motifs, each
    class-1 sample's sub-population."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_per_class
    T = spec.T
    noise = rng.normal(0.0, spec.noise_std, (2 * n, T))

    centers = spec._centers()
    rows = noise.copy()
    subpop = [-1] * (2 * n)
    if spec.motif == MOTIF_BUMP:
        curve = _bump(T, centers[0], spec.bump_width, spec.amplitude)
        rows[n:] += curve
        truth = {"1": [list(spec._truth(centers[0]))]}
    else:
        curves = [
            _bump(T, centers[0], spec.bump_width, spec.amplitude),
            -_bump(T, centers[1], spec.bump_width, spec.amplitude),
        ]
        for j in range(n):
            which = j % 2
            rows[n + j] += curves[which]
            subpop[n + j] = which
        truth = {"1": [list(spec._truth(c)) for c in centers]}

    samples = tuple(TimeSeries(values=rows[i], id=i) for i in range(2 * n))
    labels = np.array([0] * n + [1] * n, dtype=np.int64)
    metadata = {
        "generator": spec.to_dict(),
        "truth_intervals": truth,
        "subpopulation": subpop,
        "subpop_counts": [subpop.count(0), subpop.count(1)],
    }
    return LabeledDataset(samples=samples, labels=labels, n_classes=2,
                          metadata=metadata)


def write_dataset(dataset: LabeledDataset, data_path, meta_path=None) -> None:
    """UCR-style text file plus an optional metadata JSON."""
    save_ucr_tsv(dataset, data_path)
    if meta_path is not None:
        with open(meta_path, "w") as fh:
            json.dump(dataset.metadata, fh, sort_keys=True)
            fh.write("\n")
