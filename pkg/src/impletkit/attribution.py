"""Per-timestep attribution: occlusion, analytic gradients for the linear
model, and ingestion of externally computed attribution files.

Attribution file schema (JSON):

    {"method": "<name>",
     "entries": [{"sample_index": 0, "class": 1, "attributions": [...]}, ...]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import errors
from .data import AttributionSeries, LabeledDataset, TimeSeries, znormalize_attribution
from .errors import ShapeError, UnsupportedError
from .models import KIND_LINEAR, ModelHandle, predict_proba

__all__ = [
    "AttributionConfig",
    "default_occlusion_window",
    "occlusion_attribution",
    "gradient_attribution_linear",
    "resolve_target_class",
    "attribute_dataset",
    "save_attributions",
    "load_attributions",
]

METHODS = ("occlusion", "saliency_linear", "inputxgrad_linear", "file")


@dataclass(frozen=True)
class AttributionConfig:
    """Occlusion window/stride, masking baseline, and target-class rule.

    ``target_class`` is "predicted", "true", or a fixed class index.
    """

    method: str = "occlusion"
    window: int = 1
    stride: int = 1
    baseline: str = "zero"  # or "sample_mean"
    target_class: str | int = "predicted"

    def __post_init__(self):
        if self.window < 1 or self.stride < 1:
            raise ValueError("window and stride must be >= 1")
        if self.stride > self.window:
            raise ValueError("stride must not exceed window")
        if self.baseline not in ("zero", "sample_mean"):
            raise ValueError(f"unknown baseline {self.baseline!r}")


def default_occlusion_window(T: int) -> int:
    """Default window keeps resolution near the minimum implet length."""
    return max(3, -(-T // 20))


def _window_starts(T: int, window: int, stride: int) -> list[int]:
    # 0-based starts; the final window is clamped to end at T-1 so every
    # timestep receives coverage.
    starts = list(range(0, T - window + 1, stride))
    if starts[-1] + window < T:
        starts.append(T - window)
    return starts


def occlusion_attribution(model: ModelHandle, x: TimeSeries, class_id: int,
                          config: AttributionConfig) -> AttributionSeries:
    """Mask sliding windows and record the class-probability decrease.

    raw[t] is the mean, over windows covering t, of
    p_class(x) - p_class(x with the window replaced by the baseline).
    All masked variants are scored in one predict_proba batch.
    """
    values = x.values
    T = values.shape[0]
    if config.window > T:
        raise ShapeError(f"window {config.window} exceeds series length {T}")
    if not 0 <= class_id < model.n_classes:
        raise ValueError(f"class_id {class_id} out of range")
    fill = 0.0 if config.baseline == "zero" else float(values.mean())
    starts = _window_starts(T, config.window, config.stride)

    variants = np.tile(values, (len(starts) + 1, 1))
    for row, start in enumerate(starts):
        variants[row + 1, start:start + config.window] = fill
    proba = predict_proba(model, variants)[:, class_id]
    deltas = proba[0] - proba[1:]

    raw = np.zeros(T)
    coverage = np.zeros(T)
    for delta, start in zip(deltas, starts):
        raw[start:start + config.window] += delta
        coverage[start:start + config.window] += 1.0
    raw /= coverage
    return AttributionSeries.from_raw(x.id, class_id, raw)


def gradient_attribution_linear(model: ModelHandle, x: TimeSeries, class_id: int,
                                variant: str = "saliency") -> AttributionSeries:
    """Closed-form gradient attributions for the linear model.

    saliency: |d logit_c / d x_t| = |coef_c[t]|
    inputxgrad: coef_c[t] * x_t
    """
    if model.kind != KIND_LINEAR:
        raise UnsupportedError("gradient attributions require builtin_linear")
    if not 0 <= class_id < model.n_classes:
        raise ValueError(f"class_id {class_id} out of range")
    coef = model.parameters["coef"][class_id]
    if coef.shape[0] != len(x):
        raise ShapeError(f"series length {len(x)} != model input {coef.shape[0]}")
    if variant == "saliency":
        raw = np.abs(coef)
    elif variant == "inputxgrad":
        raw = coef * x.values
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return AttributionSeries.from_raw(x.id, class_id, raw)


def resolve_target_class(model: ModelHandle, x: TimeSeries, label: int,
                         target: str | int) -> int:
    """Map the target-class rule to a concrete class index for one sample."""
    if target == "true":
        return int(label)
    if target == "predicted":
        return int(predict_proba(model, [x])[0].argmax())
    cls = int(target)
    if not 0 <= cls < model.n_classes:
        raise ValueError(f"fixed target class {cls} out of range")
    return cls


def attribute_dataset(model: ModelHandle, dataset: LabeledDataset,
                      config: AttributionConfig) -> list[AttributionSeries]:
    """Attribution for every sample at its resolved target class.

    sample_id in the result is the POSITION within the given dataset, not
    the TimeSeries id, so entries stay valid after subsetting.
    """
    out = []
    for pos, (sample, label) in enumerate(zip(dataset.samples, dataset.labels)):
        cls = resolve_target_class(model, sample, int(label), config.target_class)
        if config.method == "occlusion":
            attr = occlusion_attribution(model, sample, cls, config)
        elif config.method == "saliency_linear":
            attr = gradient_attribution_linear(model, sample, cls, "saliency")
        elif config.method == "inputxgrad_linear":
            attr = gradient_attribution_linear(model, sample, cls, "inputxgrad")
        else:
            raise ValueError(f"unknown attribution method {config.method!r}")
        if attr.sample_id != pos:
            attr = AttributionSeries(sample_id=pos, class_id=attr.class_id,
                                     raw=attr.raw, normalized=attr.normalized)
        out.append(attr)
    return out


def save_attributions(attributions: list[AttributionSeries], method: str, path,
                      extra: dict | None = None) -> None:
    payload = {
        "method": method,
        "entries": [
            {
                "sample_index": a.sample_id,
                "class": a.class_id,
                "attributions": a.raw.tolist(),
            }
            for a in attributions
        ],
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_attributions(path, dataset: LabeledDataset) -> list[AttributionSeries]:
    """Read an attribution file, validating each entry against the dataset.

    Unknown sample_index raises errors.ReferenceError; a length mismatch
    raises ShapeError naming the sample. The normalized form is computed on
    load.
    """
    with open(path) as fh:
        payload = json.load(fh)
    out = []
    for entry in payload["entries"]:
        idx = int(entry["sample_index"])
        if not 0 <= idx < len(dataset):
            raise errors.ReferenceError(f"sample_index {idx} not in dataset")
        raw = np.asarray(entry["attributions"], dtype=np.float64)
        if raw.shape[0] != len(dataset.samples[idx]):
            raise ShapeError(
                f"attribution length {raw.shape[0]} != sample {idx} "
                f"length {len(dataset.samples[idx])}"
            )
        cls = int(entry["class"])
        out.append(AttributionSeries(sample_id=idx, class_id=cls, raw=raw,
                                     normalized=znormalize_attribution(raw)))
    return out
