"""Uniform classifier interface.

Built-in desk-scale models (multinomial logistic on raw timesteps, nearest
centroid with a softmin head) plus a client for external models spoken to
over a line-delimited JSON subprocess protocol:

    {"id": 1, "op": "info"}
        -> {"id": 1, "n_classes": 2, "input_length": 100}
    {"id": 2, "op": "predict_proba", "series": [[...], ...]}
        -> {"id": 2, "proba": [[...], ...]}
    any failure -> {"id": 2, "error": "message"}

One JSON object per line; ids are echoed in order.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset, TimeSeries
from .errors import EvalError, ProtocolError, ShapeError, TrainError, UnsupportedError

__all__ = [
    "ModelHandle",
    "TrainConfig",
    "train_builtin",
    "predict_proba",
    "accuracy",
    "linear_logits",
    "save_model",
    "load_model",
    "ExternalModelClient",
    "external_model",
    "KIND_LINEAR",
    "KIND_CENTROID",
    "KIND_EXTERNAL",
]

KIND_LINEAR = "builtin_linear"
KIND_CENTROID = "builtin_centroid"
KIND_EXTERNAL = "external"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 300
    l2: float = 1e-3
    seed: int = 0


@dataclass(frozen=True, eq=False)
class ModelHandle:
    """Trained classifier; immutable, safe for concurrent prediction.

    ``parameters`` is kind-specific: linear carries per-class coefficient
    rows plus bias, centroid carries per-class mean series, external carries
    the protocol client.
    """

    kind: str
    n_classes: int
    input_length: int | None
    parameters: dict

    def predict_proba(self, batch):
        return predict_proba(self, batch)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=1, keepdims=True)


def _as_matrix(batch) -> np.ndarray:
    rows = [s.values if isinstance(s, TimeSeries) else np.asarray(s, dtype=np.float64)
            for s in batch]
    if not rows:
        return np.empty((0, 0))
    return np.stack(rows)


def train_builtin(dataset: LabeledDataset, kind: str,
                  config: TrainConfig | None = None) -> ModelHandle:
    """Train a built-in model; deterministic for a fixed config.

    Raises TrainError when any class in [0, n_classes) has zero samples.
    """
    config = config or TrainConfig()
    if len(dataset) == 0:
        raise TrainError("empty dataset")
    counts = np.bincount(dataset.labels, minlength=dataset.n_classes)
    if dataset.n_classes < 2 or np.any(counts == 0):
        raise TrainError(f"every class needs samples, got counts {counts.tolist()}")

    X = dataset.values_matrix()
    y = dataset.labels
    n, T = X.shape
    k = dataset.n_classes

    if kind == KIND_LINEAR:
        # Full-batch gradient descent on the multinomial logistic loss.
        # Zero init keeps training fully deterministic; the problem is convex.
        coef = np.zeros((k, T))
        bias = np.zeros(k)
        onehot = np.zeros((n, k))
        onehot[np.arange(n), y] = 1.0
        for _ in range(config.epochs):
            proba = _softmax(X @ coef.T + bias)
            err = (proba - onehot) / n
            coef -= config.learning_rate * (err.T @ X + config.l2 * coef)
            bias -= config.learning_rate * err.sum(axis=0)
        params = {"coef": coef, "bias": bias}
    elif kind == KIND_CENTROID:
        centroids = np.stack([X[y == c].mean(axis=0) for c in range(k)])
        params = {"centroids": centroids}
    else:
        raise UnsupportedError(f"unknown builtin kind: {kind!r}")
    return ModelHandle(kind=kind, n_classes=k, input_length=T, parameters=params)


def linear_logits(model: ModelHandle, batch) -> np.ndarray:
    """Class logits of the linear model; the gradient of logit c w.r.t. the
    input is exactly the class-c coefficient row."""
    if model.kind != KIND_LINEAR:
        raise UnsupportedError("logits only defined for builtin_linear")
    X = _as_matrix(batch)
    if X.shape[0] == 0:
        return np.empty((0, model.n_classes))
    _check_length(model, X)
    return X @ model.parameters["coef"].T + model.parameters["bias"]


def _check_length(model: ModelHandle, X: np.ndarray) -> None:
    if model.input_length is not None and X.shape[1] != model.input_length:
        raise ShapeError(
            f"series length {X.shape[1]} != model input_length {model.input_length}"
        )


def predict_proba(model: ModelHandle, batch) -> np.ndarray:
    """Class probabilities, one row per series; rows sum to 1."""
    X = _as_matrix(batch)
    if X.shape[0] == 0:
        return np.empty((0, model.n_classes))
    if model.kind == KIND_LINEAR:
        return _softmax(linear_logits(model, batch))
    if model.kind == KIND_CENTROID:
        _check_length(model, X)
        centroids = model.parameters["centroids"]
        diff = X[:, None, :] - centroids[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=2))
        return _softmax(-dist)  # softmin over Euclidean distances, temperature 1
    if model.kind == KIND_EXTERNAL:
        _check_length(model, X)
        client: ExternalModelClient = model.parameters["client"]
        proba = np.asarray(client.predict_proba(X.tolist()), dtype=np.float64)
        if proba.shape != (X.shape[0], model.n_classes):
            raise ProtocolError(
                f"adapter returned shape {proba.shape}, "
                f"expected {(X.shape[0], model.n_classes)}"
            )
        return proba
    raise UnsupportedError(f"unknown model kind: {model.kind!r}")


def accuracy(model: ModelHandle, dataset: LabeledDataset) -> float:
    """Fraction of samples whose argmax class matches the label.

    Probability ties break toward the lowest class index.
    """
    if len(dataset) == 0:
        raise EvalError("cannot evaluate on an empty dataset")
    proba = predict_proba(model, dataset.samples)
    predicted = proba.argmax(axis=1)
    return float((predicted == dataset.labels).mean())


def save_model(model: ModelHandle, path, extra: dict | None = None) -> None:
    """JSON parameter dump for the built-in kinds."""
    if model.kind == KIND_LINEAR:
        payload = {
            "kind": model.kind,
            "n_classes": model.n_classes,
            "input_length": model.input_length,
            "coef": model.parameters["coef"].tolist(),
            "bias": model.parameters["bias"].tolist(),
        }
    elif model.kind == KIND_CENTROID:
        payload = {
            "kind": model.kind,
            "n_classes": model.n_classes,
            "input_length": model.input_length,
            "centroids": model.parameters["centroids"].tolist(),
        }
    else:
        raise UnsupportedError("only builtin models can be serialized")
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> ModelHandle:
    with open(path) as fh:
        payload = json.load(fh)
    kind = payload.get("kind")
    if kind == KIND_LINEAR:
        params = {
            "coef": np.asarray(payload["coef"], dtype=np.float64),
            "bias": np.asarray(payload["bias"], dtype=np.float64),
        }
    elif kind == KIND_CENTROID:
        params = {"centroids": np.asarray(payload["centroids"], dtype=np.float64)}
    else:
        raise UnsupportedError(f"cannot load model kind {kind!r}")
    return ModelHandle(kind=kind, n_classes=int(payload["n_classes"]),
                       input_length=payload["input_length"], parameters=params)


class ExternalModelClient:
    """Serializes requests to one adapter subprocess over stdin/stdout.

    Each request gets a fresh incrementing id; the adapter must echo ids in
    order. Any transport or contract failure raises ProtocolError with the
    diagnostic (including the offending line, when there is one).
    """

    def __init__(self, command: str | list[str], timeout: float = 30.0):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.command = argv
        self.timeout = timeout
        self._next_id = 0
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
            )
        except OSError as exc:
            raise ProtocolError(f"cannot spawn adapter {argv!r}: {exc}") from exc

    def _request(self, payload: dict) -> dict:
        req_id = self._next_id
        self._next_id += 1
        payload = {"id": req_id, **payload}
        try:
            self._proc.stdin.write(json.dumps(payload) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"adapter pipe closed while writing: {exc}") from exc
        line = self._read_line()
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"adapter sent malformed JSON: {line!r}") from exc
        if not isinstance(response, dict):
            raise ProtocolError(f"adapter sent a non-object response: {line!r}")
        if response.get("id") != req_id:
            raise ProtocolError(
                f"adapter reordered ids: expected {req_id}, got {response.get('id')!r}"
            )
        if "error" in response:
            raise ProtocolError(f"adapter error: {response['error']}")
        return response

    def _read_line(self) -> str:
        # Line reads are bounded by a watchdog timer; readline itself blocks.
        import threading

        result: list[str] = []

        def reader():
            result.append(self._proc.stdout.readline())

        thread = threading.Thread(target=reader, daemon=True)
        thread.start()
        thread.join(self.timeout)
        if thread.is_alive():
            self._proc.kill()
            raise ProtocolError(f"adapter timed out after {self.timeout}s")
        line = result[0] if result else ""
        if line == "":
            raise ProtocolError("adapter closed its stdout")
        return line

    def info(self) -> dict:
        response = self._request({"op": "info"})
        if "n_classes" not in response:
            raise ProtocolError(f"info response missing n_classes: {response!r}")
        return response

    def predict_proba(self, series: list[list[float]]) -> list[list[float]]:
        response = self._request({"op": "predict_proba", "series": series})
        if "proba" not in response:
            raise ProtocolError(f"predict_proba response missing proba: {response!r}")
        return response["proba"]

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_model(command: str | list[str], timeout: float = 30.0) -> ModelHandle:
    """Spawn an adapter process and wrap it as a ModelHandle."""
    client = ExternalModelClient(command, timeout=timeout)
    info = client.info()
    length = info.get("input_length")
    return ModelHandle(
        kind=KIND_EXTERNAL,
        n_classes=int(info["n_classes"]),
        input_length=None if length is None else int(length),
        parameters={"client": client},
    )
