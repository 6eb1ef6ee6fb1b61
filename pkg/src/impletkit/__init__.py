"""Toolkit for subsequence-level explanation of time-series classifiers:
attribution, implet extraction, DTW cohort clustering, and perturbation
faithfulness evaluation.
"""

__version__ = "0.1.0"

from .data import (AttributionSeries, LabeledDataset, TimeSeries,
                   load_ucr_tsv, save_ucr_tsv, split_half,
                   znormalize_attribution)
from .errors import (ClusterError, DegenerateError, EvalError, FormatError,
                     ImpletkitError, ProtocolError, ShapeError, SplitError,
                     TrainError, UnsupportedError)
from .extraction import (Implet, ImpletParams, brute_force_extract,
                         extract_dataset, extract_implets, implet_score,
                         load_implets, save_implets)
from .models import (KIND_CENTROID, KIND_EXTERNAL, KIND_LINEAR, ModelHandle,
                     TrainConfig, accuracy, external_model, load_model,
                     predict_proba, save_model, train_builtin)

__all__ = [
    "__version__",
    "TimeSeries", "LabeledDataset", "AttributionSeries",
    "load_ucr_tsv", "save_ucr_tsv", "split_half", "znormalize_attribution",
    "ImpletkitError", "FormatError", "ShapeError", "SplitError", "TrainError",
    "EvalError", "ProtocolError", "UnsupportedError", "ClusterError",
    "DegenerateError",
    "Implet", "ImpletParams", "implet_score", "extract_implets",
    "brute_force_extract", "extract_dataset", "save_implets", "load_implets",
    "ModelHandle", "TrainConfig", "train_builtin", "predict_proba",
    "accuracy", "save_model", "load_model", "external_model",
    "KIND_LINEAR", "KIND_CENTROID", "KIND_EXTERNAL",
]
