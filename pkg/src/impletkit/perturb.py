"""Perturbation-based faithfulness evaluation.

Removal operators replace an interval with either the sample mean or a
smooth random curve pinned to the interval's endpoint values and one-sided
slopes. The harness compares the accuracy drop from removing identified
subsequences against length-matched random removals, and the CILS pipeline
runs the full held-out evaluation: cluster on one half, match centroids on
the other, and score both removals identically.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline, KroghInterpolator

from . import errors
from .attribution import AttributionConfig, attribute_dataset
from .cohort import MODE_VALUES, MODE_VALUES_ATTR, ClusterParams, cluster_implets, find_cils
from .data import LabeledDataset, TimeSeries, split_half
from .errors import DegenerateError
from .extraction import Implet, ImpletParams, extract_dataset
from .models import ModelHandle, predict_proba

__all__ = [
    "RemovalSpec",
    "FaithfulnessReport",
    "control_point_count",
    "smooth_removal",
    "smooth_removal_detail",
    "mean_fill_removal",
    "random_interval",
    "faithfulness_eval",
    "cils_eval",
    "report_to_dict",
    "report_from_dict",
    "save_report",
    "write_plot_data",
]

KIND_SMOOTH = "smooth_poly"
KIND_MEAN = "mean_fill"
KIND_NONE = "none"

# Above this many interpolation constraints a single global polynomial
# oscillates; switch to a piecewise C1 cubic through the same points.
MAX_GLOBAL_CONSTRAINTS = 12


@dataclass(frozen=True)
class RemovalSpec:
    """What to substitute for removed intervals, and whether to remove all
    of a sample's intervals at once (multi) or one copy per interval."""

    kind: str = KIND_SMOOTH
    multi: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (KIND_SMOOTH, KIND_MEAN, KIND_NONE):
            raise ValueError(f"unknown removal kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "multi": self.multi, "seed": self.seed}


@dataclass(frozen=True)
class SmoothDetail:
    """Replacement curve internals, exposed so constraint residuals and
    endpoint slopes can be checked against the construction inputs."""

    values: np.ndarray
    positions: np.ndarray       # interior control-point coordinates (1-based)
    control_values: np.ndarray
    control_residuals: np.ndarray
    slope_left: float           # curve derivative at l
    slope_right: float          # curve derivative at r
    target_slope_left: float
    target_slope_right: float


def control_point_count(L: int) -> int:
    """Interior control points for an interval of length L."""
    return max(math.ceil(L / 10), 2)


def _check_range(T: int, l: int, r: int) -> None:
    if not 1 <= l <= r <= T:
        raise IndexError(f"interval [{l}, {r}] out of range for length {T}")


def _endpoint_slopes(x: np.ndarray, l: int, r: int) -> tuple[float, float]:
    # One-sided differences of the original series; at the array boundary
    # the difference from the inner side is used instead.
    T = x.shape[0]
    d_l = x[l - 1] - x[l - 2] if l > 1 else x[l] - x[l - 1]
    d_r = x[r] - x[r - 1] if r < T else x[r - 1] - x[r - 2]
    return float(d_l), float(d_r)


def _smooth_curve(x: np.ndarray, l: int, r: int, rng_seed: int):
    T = x.shape[0]
    _check_range(T, l, r)
    L = r - l + 1
    if L < 2:
        raise DegenerateError("smooth removal needs an interval of length >= 2")
    if T < 2:
        raise DegenerateError("series too short to define endpoint slopes")
    n_c = control_point_count(L)
    positions = l + np.arange(1, n_c + 1) * (r - l) / (n_c + 1)
    rng = np.random.default_rng(rng_seed)
    mean = float(x.mean())
    std = float(x.std())
    control_values = rng.normal(mean, std, n_c)
    d_l, d_r = _endpoint_slopes(x, l, r)

    if n_c + 4 <= MAX_GLOBAL_CONSTRAINTS:
        # One polynomial through everything; repeated nodes carry the
        # endpoint derivative constraints.
        xi = np.concatenate([[l, l], positions, [r, r]])
        yi = np.concatenate([[x[l - 1], d_l], control_values, [x[r - 1], d_r]])
        curve = KroghInterpolator(xi, yi)
        derivative = curve.derivative
    else:
        knots = np.concatenate([[l], positions, [r]])
        vals = np.concatenate([[x[l - 1]], control_values, [x[r - 1]]])
        slopes = np.empty_like(vals)
        slopes[0] = d_l
        slopes[-1] = d_r
        slopes[1:-1] = (vals[2:] - vals[:-2]) / (knots[2:] - knots[:-2])
        curve = CubicHermiteSpline(knots, vals, slopes)
        derivative = curve.derivative()
    return curve, derivative, positions, control_values, d_l, d_r


def smooth_removal_detail(x, l: int, r: int, rng_seed: int) -> SmoothDetail:
    """Like smooth_removal but also reports the curve's constraint residuals
    and endpoint derivatives."""
    arr = x.values if isinstance(x, TimeSeries) else np.asarray(x, dtype=np.float64)
    curve, derivative, positions, control_values, d_l, d_r = \
        _smooth_curve(arr, l, r, rng_seed)
    out = arr.copy()
    interior = np.arange(l + 1, r)
    if interior.size:
        out[interior - 1] = curve(interior)
    out[l - 1] = arr[l - 1]
    out[r - 1] = arr[r - 1]
    residuals = np.abs(curve(positions) - control_values)
    return SmoothDetail(values=out, positions=positions,
                        control_values=control_values,
                        control_residuals=residuals,
                        slope_left=float(derivative(l)),
                        slope_right=float(derivative(r)),
                        target_slope_left=d_l, target_slope_right=d_r)


def smooth_removal(x, l: int, r: int, rng_seed: int):
    """Replace [l, r] with a smooth random curve.

    The curve interpolates max(ceil(L/10), 2) control points placed at
    equal spacing strictly inside (l, r), with values drawn i.i.d. from a
    normal matching the full sample's mean and population std. It matches
    the original values at l and r exactly and the original one-sided
    slopes there; everything outside [l, r] is untouched.
    """
    detail = smooth_removal_detail(x, l, r, rng_seed)
    if isinstance(x, TimeSeries):
        return TimeSeries(values=detail.values, id=x.id)
    return detail.values


def mean_fill_removal(x, l: int, r: int):
    """Replace [l, r] with the mean of the full original sample."""
    arr = x.values if isinstance(x, TimeSeries) else np.asarray(x, dtype=np.float64)
    _check_range(arr.shape[0], l, r)
    out = arr.copy()
    out[l - 1:r] = arr.mean()
    if isinstance(x, TimeSeries):
        return TimeSeries(values=out, id=x.id)
    return out


def random_interval(T: int, L: int, rng_seed: int) -> tuple[int, int]:
    """Uniform-start interval of length L within [1, T]."""
    if L > T:
        raise IndexError(f"interval length {L} exceeds series length {T}")
    if L < 1:
        raise IndexError("interval length must be >= 1")
    rng = np.random.default_rng(rng_seed)
    l = int(rng.integers(1, T - L + 2))
    return l, l + L - 1


@dataclass(frozen=True)
class FaithfulnessReport:
    """Accuracy drops from identified vs length-matched random removal.

    delta > 0 means the identified subsequences hurt the model more than
    random ones of the same lengths.
    """

    explainer_name: str
    removal: RemovalSpec
    acc_clean: float
    acc_identified: float
    acc_random: float
    drop_identified: float
    drop_random: float
    delta: float
    n_segments_removed: int
    random_trials: int
    n_zero_implet_samples: int = 0
    baseline_overlap_flagged: bool = False

    def __post_init__(self):
        if abs(self.drop_identified - (self.acc_clean - self.acc_identified)) > 1e-12 \
                or abs(self.drop_random - (self.acc_clean - self.acc_random)) > 1e-12 \
                or abs(self.delta - (self.drop_identified - self.drop_random)) > 1e-12:
            raise ValueError("report drops inconsistent with accuracies")


def _build_report(explainer_name, removal, acc_clean, acc_identified,
                  acc_random, n_segments, random_trials, n_zero,
                  flagged) -> FaithfulnessReport:
    drop_i = acc_clean - acc_identified
    drop_r = acc_clean - acc_random
    return FaithfulnessReport(
        explainer_name=explainer_name, removal=removal,
        acc_clean=acc_clean, acc_identified=acc_identified,
        acc_random=acc_random, drop_identified=drop_i, drop_random=drop_r,
        delta=drop_i - drop_r, n_segments_removed=n_segments,
        random_trials=random_trials, n_zero_implet_samples=n_zero,
        baseline_overlap_flagged=flagged)


def _derived_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


_TAG_IDENT, _TAG_RANDOM = 1, 2


def _apply_one(values: np.ndarray, l: int, r: int, spec: RemovalSpec,
               rng_seed: int) -> np.ndarray:
    if spec.kind == KIND_NONE:
        return values
    if spec.kind == KIND_MEAN or r - l + 1 < 2:
        return mean_fill_removal(values, l, r)
    return smooth_removal(values, l, r, rng_seed)


def _apply_many(values: np.ndarray, intervals, spec: RemovalSpec,
                seed_parts) -> np.ndarray:
    out = values
    for j, (l, r) in enumerate(intervals):
        out = _apply_one(out, l, r, spec, _derived_seed(*seed_parts, j))
    return out


def _normalize_intervals(dataset: LabeledDataset, implets) -> list[list[tuple[int, int]]]:
    """Accepts a flat Implet list or a per-sample list of Implet/(l, r)."""
    n = len(dataset)
    T = dataset.length
    per_sample: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    if implets and isinstance(implets[0], Implet):
        flat = [(im.sample_id, im.l, im.r) for im in implets]
    else:
        flat = []
        for i, group in enumerate(implets):
            if i >= n:
                raise errors.ReferenceError(
                    f"{len(implets)} interval groups for {n} samples")
            for item in group:
                l, r = (item.l, item.r) if isinstance(item, Implet) else item
                flat.append((i, l, r))
        if len(implets) > n:
            raise errors.ReferenceError(
                f"{len(implets)} interval groups for {n} samples")
    for i, l, r in flat:
        if not 0 <= i < n:
            raise errors.ReferenceError(f"sample index {i} out of range")
        if not 1 <= l <= r <= T:
            raise errors.ReferenceError(
                f"interval [{l}, {r}] invalid for sample {i} of length {T}")
        per_sample[i].append((int(l), int(r)))
    return per_sample


def _overlap(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def _random_nonoverlapping(T: int, lengths, base_parts) -> tuple[list, bool]:
    """Up to 100 redraws for a mutually disjoint set; overlap allowed and
    flagged when that fails."""
    intervals = []
    for attempt in range(100):
        intervals = [random_interval(T, L, _derived_seed(*base_parts, attempt, j))
                     for j, L in enumerate(lengths)]
        ok = all(not _overlap(intervals[a], intervals[b])
                 for a in range(len(intervals)) for b in range(a + 1, len(intervals)))
        if ok:
            return intervals, False
    return intervals, True


def faithfulness_eval(model: ModelHandle, dataset: LabeledDataset, implets,
                      removal: RemovalSpec, random_trials: int = 10,
                      target: str = "truth",
                      explainer_name: str = "implets") -> FaithfulnessReport:
    """Accuracy-drop comparison for identified intervals vs random ones.

    Single mode scores one perturbed copy per (sample, interval) pair;
    samples with no intervals contribute their clean prediction once.
    Multi mode scores one copy per sample with all its intervals removed,
    against an equal count of equal-length non-overlapping random
    intervals. The random baseline is averaged over random_trials seeds.
    Accuracy is measured against ground truth, or against the clean-input
    predictions when target="prediction".
    """
    if random_trials < 1:
        raise ValueError("random_trials must be >= 1")
    per_sample = _normalize_intervals(dataset, implets)
    n = len(dataset)
    T = dataset.length
    values = [s.values for s in dataset.samples]

    clean_pred = predict_proba(model, dataset.samples).argmax(axis=1)
    ref = clean_pred if target == "prediction" else dataset.labels
    clean_correct = (clean_pred == ref).astype(np.float64)

    n_zero = sum(1 for iv in per_sample if not iv)
    n_segments = sum(len(iv) for iv in per_sample)

    if removal.multi:
        # one entry per sample
        weights = np.ones(n)
        ident_rows = [
            _apply_many(values[i], per_sample[i], removal,
                        (removal.seed, _TAG_IDENT, i))
            for i in range(n)
        ]
        entry_ref = ref
        entry_clean = clean_correct
    else:
        # one entry per (sample, interval); interval-free samples stay clean
        entries = []
        for i in range(n):
            if per_sample[i]:
                entries.extend((i, j) for j in range(len(per_sample[i])))
            else:
                entries.append((i, None))
        weights = np.ones(len(entries))
        ident_rows = []
        for i, j in entries:
            if j is None:
                ident_rows.append(values[i])
            else:
                l, r = per_sample[i][j]
                ident_rows.append(_apply_one(
                    values[i], l, r, removal,
                    _derived_seed(removal.seed, _TAG_IDENT, i, j)))
        entry_ref = np.array([ref[i] for i, _ in entries])
        entry_clean = np.array([clean_correct[i] for i, _ in entries])

    acc_clean = float(np.average(entry_clean, weights=weights))
    ident_pred = predict_proba(model, ident_rows).argmax(axis=1)
    acc_identified = float(np.average((ident_pred == entry_ref).astype(np.float64),
                                      weights=weights))

    flagged = False
    trial_accs = []
    for t in range(random_trials):
        rows = []
        if removal.multi:
            for i in range(n):
                lengths = [r - l + 1 for l, r in per_sample[i]]
                rand_iv, flag = _random_nonoverlapping(
                    T, lengths, (removal.seed, _TAG_RANDOM, t, i))
                flagged = flagged or flag
                rows.append(_apply_many(values[i], rand_iv, removal,
                                        (removal.seed, _TAG_RANDOM, t, i)))
        else:
            for i, j in entries:
                if j is None:
                    rows.append(values[i])
                    continue
                l, r = per_sample[i][j]
                rl, rr = random_interval(
                    T, r - l + 1, _derived_seed(removal.seed, _TAG_RANDOM, t, i, j))
                rows.append(_apply_one(
                    values[i], rl, rr, removal,
                    _derived_seed(removal.seed, _TAG_RANDOM, t, i, j, 1)))
        pred = predict_proba(model, rows).argmax(axis=1)
        trial_accs.append(float(np.average((pred == entry_ref).astype(np.float64),
                                           weights=weights)))
    acc_random = float(np.mean(trial_accs))

    return _build_report(explainer_name, removal, acc_clean, acc_identified,
                         acc_random, n_segments, random_trials, n_zero, flagged)


def cils_eval(model: ModelHandle, dataset: LabeledDataset,
              attribution_config: AttributionConfig,
              implet_params: ImpletParams, cluster_params: ClusterParams,
              removal: RemovalSpec, mode: str = MODE_VALUES,
              random_trials: int = 10, target: str = "truth",
              threads: int = 1) -> tuple[FaithfulnessReport, FaithfulnessReport]:
    """Held-out centroid evaluation.

    Clusters implets from one half of the data, locates each same-class
    centroid's best-matching window in every sample of the other half, and
    scores the removal of those windows. The comparison report extracts
    implets directly on the evaluation half and scores their removal the
    same way. Returns (cils_report, implet_report).
    """
    if len(dataset) < 4:
        raise ValueError("need at least 4 samples to split and evaluate")
    if mode not in (MODE_VALUES, MODE_VALUES_ATTR):
        raise ValueError(f"unknown mode {mode!r}")
    half_ext, half_eval = split_half(dataset, seed=removal.seed)

    attrs_ext = attribute_dataset(model, half_ext, attribution_config)
    implets_ext = extract_dataset(half_ext, attrs_ext, implet_params)
    by_class: dict[int, list[Implet]] = {}
    for im in implets_ext:
        by_class.setdefault(im.class_id, []).append(im)
    cohorts = {cls: cluster_implets(group, cluster_params, threads=threads)
               for cls, group in by_class.items()}

    attrs_eval = attribute_dataset(model, half_eval, attribution_config)

    cils_intervals: list[list[tuple[int, int]]] = []
    for pos, sample in enumerate(half_eval.samples):
        attr = attrs_eval[pos]
        windows: list[tuple[int, int]] = []
        cohort = cohorts.get(attr.class_id)
        if cohort is not None:
            for centroid in cohort.centroids:
                l, r, _ = find_cils(centroid, sample, mode=mode,
                                    attr=attr if mode == MODE_VALUES_ATTR else None)
                windows.append((l, r))
        cils_intervals.append(windows)

    cils_report = faithfulness_eval(
        model, half_eval, cils_intervals, removal, random_trials, target,
        explainer_name=f"cils_{mode}")
    implets_eval = extract_dataset(half_eval, attrs_eval, implet_params)
    implet_report = faithfulness_eval(
        model, half_eval, implets_eval, removal, random_trials, target,
        explainer_name="implets")
    return cils_report, implet_report


def report_to_dict(report: FaithfulnessReport) -> dict:
    d = {
        "explainer_name": report.explainer_name,
        "removal": report.removal.to_dict(),
        "acc_clean": report.acc_clean,
        "acc_identified": report.acc_identified,
        "acc_random": report.acc_random,
        "drop_identified": report.drop_identified,
        "drop_random": report.drop_random,
        "delta": report.delta,
        "n_segments_removed": report.n_segments_removed,
        "random_trials": report.random_trials,
        "n_zero_implet_samples": report.n_zero_implet_samples,
        "baseline_overlap_flagged": report.baseline_overlap_flagged,
    }
    return d


def report_from_dict(d: dict) -> FaithfulnessReport:
    removal = RemovalSpec(kind=d["removal"]["kind"],
                          multi=bool(d["removal"]["multi"]),
                          seed=int(d["removal"]["seed"]))
    return FaithfulnessReport(
        explainer_name=d["explainer_name"], removal=removal,
        acc_clean=float(d["acc_clean"]),
        acc_identified=float(d["acc_identified"]),
        acc_random=float(d["acc_random"]),
        drop_identified=float(d["drop_identified"]),
        drop_random=float(d["drop_random"]), delta=float(d["delta"]),
        n_segments_removed=int(d["n_segments_removed"]),
        random_trials=int(d["random_trials"]),
        n_zero_implet_samples=int(d["n_zero_implet_samples"]),
        baseline_overlap_flagged=bool(d["baseline_overlap_flagged"]))


def save_report(reports, path, extra: dict | None = None) -> None:
    """One or many reports as JSON."""
    if isinstance(reports, FaithfulnessReport):
        reports = [reports]
    payload = {"reports": [report_to_dict(r) for r in reports]}
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def write_plot_data(rows, path) -> None:
    """Arrow-plot CSV: one row per (dataset, report)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "explainer", "removal",
                         "drop_random", "drop_identified", "delta"])
        for dataset_name, report in rows:
            writer.writerow([
                dataset_name, report.explainer_name, report.removal.kind,
                format(report.drop_random, ".17g"),
                format(report.drop_identified, ".17g"),
                format(report.delta, ".17g"),
            ])
