"""Domain types, dataset ingestion, normalization and deterministic splitting.

Datasets use the UCR-style text format: one record per line, first field the
class label, remaining fields the series values, separated by tabs or commas
(auto-detected from the first line). Labels are remapped to dense 0-based
indices in ascending order of their original values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, SplitError

__all__ = [
    "TimeSeries",
    "LabeledDataset",
    "AttributionSeries",
    "load_ucr_tsv",
    "save_ucr_tsv",
    "znormalize_attribution",
    "split_half",
]


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """A univariate series with its sample index. Immutable after construction."""

    values: np.ndarray
    id: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("TimeSeries requires a non-empty 1-D value sequence")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"TimeSeries {self.id} contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Equal-length samples with dense 0-based integer class labels."""

    samples: tuple[TimeSeries, ...]
    labels: np.ndarray
    n_classes: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        samples = tuple(self.samples)
        labels = np.asarray(self.labels, dtype=np.int64)
        labels.setflags(write=False)
        if len(samples) != labels.shape[0]:
            raise ValueError("sample and label counts differ")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise ValueError("labels must lie in [0, n_classes)")
        lengths = {len(s) for s in samples}
        if len(lengths) > 1:
            raise ValueError("all samples must share one length")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.samples)

    @property
    def length(self) -> int:
        """Common series length T."""
        return len(self.samples[0])

    def values_matrix(self) -> np.ndarray:
        """Samples stacked as an (n, T) array."""
        return np.stack([s.values for s in self.samples])

    def subset(self, indices) -> "LabeledDataset":
        """New dataset over the given sample positions; sample ids are kept."""
        indices = list(indices)
        return LabeledDataset(
            samples=tuple(self.samples[i] for i in indices),
            labels=self.labels[indices],
            n_classes=self.n_classes,
            metadata=dict(self.metadata),
        )


@dataclass(frozen=True, eq=False)
class AttributionSeries:
    """Per-timestep attribution for one (sample, class) pair.

    ``normalized`` is the z-normalized form of ``raw`` (population std); a
    constant raw series normalizes to all zeros.
    """

    sample_id: int
    class_id: int
    raw: np.ndarray
    normalized: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.raw, dtype=np.float64)
        normalized = np.asarray(self.normalized, dtype=np.float64)
        if raw.shape != normalized.shape or raw.ndim != 1:
            raise ValueError("raw and normalized must be 1-D and equal length")
        raw.setflags(write=False)
        normalized.setflags(write=False)
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "normalized", normalized)

    @classmethod
    def from_raw(cls, sample_id: int, class_id: int, raw) -> "AttributionSeries":
        raw = np.asarray(raw, dtype=np.float64)
        return cls(sample_id=sample_id, class_id=class_id, raw=raw,
                   normalized=znormalize_attribution(raw))

    def __len__(self):
        return self.raw.shape[0]


def znormalize_attribution(raw) -> np.ndarray:
    """Z-normalize to mean 0 and population std 1; constant input maps to zeros."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 1 or raw.size < 1:
        raise ValueError("expected a non-empty 1-D sequence")
    if not np.all(np.isfinite(raw)):
        raise ValueError("attribution values must be finite")
    if np.all(raw == raw[0]):
        return np.zeros_like(raw)
    std = raw.std()  # population std (ddof=0)
    if std == 0.0:
        return np.zeros_like(raw)
    return (raw - raw.mean()) / std


def _detect_separator(first_line: str) -> str:
    return "\t" if "\t" in first_line else ","


def load_ucr_tsv(path) -> LabeledDataset:
    """Load a UCR-style text file.

    Raises FormatError (with the offending 1-based row number where
    applicable) on ragged rows, non-numeric tokens, or an empty file.
    """
    with open(path) as fh:
        lines = [line.rstrip("\n\r") for line in fh]
    lines = [line for line in lines if line.strip()]
    if not lines:
        raise FormatError(f"{path}: empty file")
    sep = _detect_separator(lines[0])

    raw_labels: list[float] = []
    rows: list[np.ndarray] = []
    width = None
    for row_no, line in enumerate(lines, start=1):
        tokens = [t for t in line.split(sep) if t.strip()]
        if len(tokens) < 2:
            raise FormatError(f"{path}: row {row_no} has no values", row=row_no)
        try:
            numbers = [float(t) for t in tokens]
        except ValueError:
            raise FormatError(
                f"{path}: row {row_no} contains a non-numeric token", row=row_no
            ) from None
        if width is None:
            width = len(numbers)
        elif len(numbers) != width:
            raise FormatError(
                f"{path}: row {row_no} has {len(numbers)} fields, expected {width}",
                row=row_no,
            )
        raw_labels.append(numbers[0])
        rows.append(np.asarray(numbers[1:], dtype=np.float64))

    distinct = sorted(set(raw_labels))
    remap = {orig: idx for idx, orig in enumerate(distinct)}
    labels = np.asarray([remap[v] for v in raw_labels], dtype=np.int64)
    samples = tuple(TimeSeries(values=row, id=i) for i, row in enumerate(rows))
    metadata = {"label_map": {repr(k): v for k, v in remap.items()},
                "source": str(path)}
    return LabeledDataset(samples=samples, labels=labels,
                          n_classes=len(distinct), metadata=metadata)


def save_ucr_tsv(dataset: LabeledDataset, path, sep: str = "\t") -> None:
    """Write a dataset in the UCR text format (17 significant digits)."""
    with open(path, "w") as fh:
        for sample, label in zip(dataset.samples, dataset.labels):
            fields = [str(int(label))] + [format(v, ".17g") for v in sample.values]
            fh.write(sep.join(fields) + "\n")


def split_half(dataset: LabeledDataset, seed: int) -> tuple[LabeledDataset, LabeledDataset]:
    """Deterministic stratified half split.

    Per-class counts differ by at most one between halves; classes with an odd
    count alternate which half receives the extra sample so the overall sizes
    also differ by at most one. Sample ids are preserved.
    """
    if len(dataset) < 2:
        raise SplitError("need at least 2 samples to split")
    rng = np.random.default_rng(seed)
    first: list[int] = []
    second: list[int] = []
    odd_seen = 0
    for cls in range(dataset.n_classes):
        idx = np.flatnonzero(dataset.labels == cls)
        if idx.size == 0:
            continue
        idx = idx[rng.permutation(idx.size)]
        take = idx.size // 2
        if idx.size % 2 == 1:
            # odd classes alternate which half receives the extra sample
            take += odd_seen % 2
            odd_seen += 1
        first.extend(idx[:take].tolist())
        second.extend(idx[take:].tolist())
    first.sort()
    second.sort()
    return dataset.subset(first), dataset.subset(second)
