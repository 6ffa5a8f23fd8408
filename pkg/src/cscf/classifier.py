"""Minimal black-box runtime: schema encoding, linear/MLP forward pass, a
gradient-descent logistic trainer and the JSON model file format."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Sequence as Seq

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .feature_space import FeatureSpace

MODEL_SCHEMA = "cscf.model/1"
ACCEPT_THRESHOLD = 0.5

_ACTIVATIONS = {
    "identity": lambda z: z,
    "relu": lambda z: np.maximum(z, 0.0),
    "sigmoid": lambda z: 1.0 / (1.0 + np.exp(-z)),
}


class ModelError(ValueError):
    pass


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


class Encoding:
    """Min-max scaling for numeric features, one-hot blocks for categoricals.

    Both are fixed by the schema bounds so states outside the training data
    still encode.
    """

    def __init__(self, space: FeatureSpace):
        self.space = space
        self.offsets = []
        width = 0
        for f in space:
            self.offsets.append(width)
            width += 1 if f.is_numeric else len(f.levels)
        self.width = width

    def encode(self, inst: Seq) -> np.ndarray:
        out = np.zeros(self.width)
        self.encode_into(inst, out)
        return out

    def encode_into(self, inst: Seq, out: np.ndarray) -> None:
        for f, off, v in zip(self.space.features, self.offsets, inst):
            if f.is_numeric:
                out[off] = (f.clamp(v) - f.min) / f.span
            else:
                out[off + f.level_index(v)] = 1.0

    def encode_many(self, instances: Seq[Seq]) -> np.ndarray:
        out = np.zeros((len(instances), self.width))
        for row, inst in zip(out, instances):
            self.encode_into(inst, row)
        return out

    def fingerprint(self) -> str:
        return schema_fingerprint(self.space)


def encode(space: FeatureSpace, enc: Encoding | None, inst: Seq) -> np.ndarray:
    return (enc or Encoding(space)).encode(inst)


def schema_fingerprint(space: FeatureSpace) -> str:
    blob = json.dumps(space.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray  # (rows, cols): rows outputs, cols inputs
    bias: np.ndarray
    activation: str = "identity"


class ModelSpec:
    """Feed-forward stack ending in a single logit; P(accept) = sigmoid(logit)."""

    def __init__(self, layers: Seq[Layer], kind: str = "mlp"):
        if kind not in ("linear", "mlp"):
            raise ModelError(f"unknown model kind {kind!r}")
        self.kind = kind
        self.layers = tuple(layers)
        if not self.layers:
            raise ModelError("model needs at least one layer")
        if kind == "linear" and len(self.layers) != 1:
            raise ModelError("linear model must have exactly one layer")
        prev = None
        for i, layer in enumerate(self.layers):
            w = layer.weights
            if w.ndim != 2 or layer.bias.shape != (w.shape[0],):
                raise ModelError(f"layer {i}: weights/bias shapes {w.shape}/{layer.bias.shape} disagree")
            if layer.activation not in _ACTIVATIONS:
                raise ModelError(f"layer {i}: unknown activation {layer.activation!r}")
            if prev is not None and w.shape[1] != prev:
                raise ModelError(f"layer {i}: expects {w.shape[1]} inputs but layer {i - 1} gives {prev}")
            prev = w.shape[0]
        if prev != 1:
            raise ModelError(f"final layer must output width 1, got {prev}")

    @property
    def input_width(self) -> int:
        return self.layers[0].weights.shape[1]

    @classmethod
    def linear(cls, weights, bias: float) -> "ModelSpec":
        w = np.asarray(weights, dtype=float).reshape(1, -1)
        return cls([Layer(w, np.array([float(bias)]))], kind="linear")

    def logit(self, x: np.ndarray) -> np.ndarray:
        a = x
        for layer in self.layers:
            a = _ACTIVATIONS[layer.activation](a @ layer.weights.T + layer.bias)
        return a[..., 0]


def predict_accept_proba(model: ModelSpec, encoded) -> float | np.ndarray:
    """Sigmoid of the final logit for one encoded vector or a batch of rows."""
    x = np.asarray(encoded, dtype=float)
    if x.shape[-1] != model.input_width:
        raise ModelError(f"input width {x.shape[-1]} does not match model width {model.input_width}")
    p = _sigmoid(model.logit(x))
    return float(p) if x.ndim == 1 else p


class BlackBox:
    """Instance-level view of a model: encode then predict."""

    def __init__(self, space: FeatureSpace, model: ModelSpec):
        self.space = space
        self.encoding = Encoding(space)
        if model.input_width != self.encoding.width:
            raise ModelError(f"model expects width {model.input_width}, schema encodes to {self.encoding.width}")
        self.model = model

    def proba(self, inst: Seq) -> float:
        return predict_accept_proba(self.model, self.encoding.encode(inst))

    def proba_many(self, instances: Seq[Seq]) -> np.ndarray:
        if not len(instances):
            return np.zeros(0)
        return predict_accept_proba(self.model, self.encoding.encode_many(instances))

    def accepts(self, inst: Seq) -> bool:
        return self.proba(inst) >= ACCEPT_THRESHOLD

    def fingerprint(self) -> str:
        return model_fingerprint(self.model, self.space)


# --------------------------------------------------------------------------
# training

class LogisticRegressionGD(ClassifierMixin, BaseEstimator):
    """Full-batch gradient-descent logistic regression on encoded features.

    Parameters
    ----------
    steps : int
        Number of gradient steps.
    learning_rate : float
        Step size on the mean log-loss.
    seed : int
        Seeds the small random weight initialisation.
    """

    def __init__(self, steps: int = 2000, learning_rate: float = 0.5, seed: int = 0):
        self.steps = steps
        self.learning_rate = learning_rate
        self.seed = seed

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) != 2:
            raise ValueError(f"cannot fit: need exactly two classes, got {list(self.classes_)}")
        yf = y_idx.astype(float)
        rng = np.random.default_rng(self.seed)
        n, m = X.shape
        w = rng.normal(0.0, 0.01, size=m)
        b = 0.0
        losses = []
        for _ in range(self.steps):
            p = _sigmoid(X @ w + b)
            losses.append(_log_loss(yf, p))
            err = p - yf
            w = w - self.learning_rate * (X.T @ err) / n
            b = b - self.learning_rate * err.mean()
        losses.append(_log_loss(yf, _sigmoid(X @ w + b)))
        self.coef_ = w
        self.intercept_ = b
        self.loss_curve_ = losses
        self.n_features_in_ = m
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p = _sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return self.classes_[(self.predict_proba(X)[:, 1] >= ACCEPT_THRESHOLD).astype(int)]

    def to_model_spec(self) -> ModelSpec:
        check_is_fitted(self, "coef_")
        return ModelSpec.linear(self.coef_, self.intercept_)


def _log_loss(y, p) -> float:
    eps = 1e-15
    p = np.clip(p, eps, 1 - eps)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def fit_logistic(X, labels, steps: int = 2000, learning_rate: float = 0.5, seed: int = 0):
    """Train a logistic model on encoded rows; labels are 0 (reject) / 1 (accept).

    Returns ``(ModelSpec, training_accuracy)``.
    """
    y = np.asarray(labels)
    classes = set(np.unique(y).tolist())
    if len(classes) < 2:
        raise ValueError("cannot fit: labels contain a single class")
    if not classes <= {0, 1}:
        raise ValueError(f"labels must be 0/1, got {sorted(classes)}")
    est = LogisticRegressionGD(steps=steps, learning_rate=learning_rate, seed=seed).fit(X, y)
    model = est.to_model_spec()
    acc = float(np.mean(est.predict(X) == y))
    return model, acc


# --------------------------------------------------------------------------
# model file

def model_to_dict(model: ModelSpec, space: FeatureSpace | None = None) -> dict:
    layers = []
    for layer in model.layers:
        rows, cols = layer.weights.shape
        layers.append({"rows": rows, "cols": cols,
                       "weights": [float(x) for x in layer.weights.ravel()],
                       "bias": [float(x) for x in layer.bias],
                       "activation": layer.activation})
    d = {"schema": MODEL_SCHEMA, "kind": model.kind, "layers": layers}
    if space is not None:
        d["encoding"] = {"features": space.to_dict(), "fingerprint": schema_fingerprint(space)}
    return d


def save_model(model: ModelSpec, space: FeatureSpace | None = None) -> str:
    return json.dumps(model_to_dict(model, space), indent=1, sort_keys=True) + "\n"


def load_model(content, space: FeatureSpace | None = None) -> ModelSpec:
    """Rebuild a model from JSON text or an already-parsed dict.

    When ``space`` is given and the file carries an encoding fingerprint, a
    mismatch raises instead of silently predicting on a drifted schema.
    """
    d = json.loads(content) if isinstance(content, (str, bytes)) else content
    if not isinstance(d, dict):
        raise ModelError("model file must be a JSON object")
    if d.get("schema", MODEL_SCHEMA) != MODEL_SCHEMA:
        raise ModelError(f"unsupported model schema {d.get('schema')!r}")
    layers = []
    for i, ld in enumerate(d.get("layers") or []):
        try:
            rows, cols = int(ld["rows"]), int(ld["cols"])
            w = np.asarray(ld["weights"], dtype=float)
            b = np.asarray(ld["bias"], dtype=float)
            act = ld.get("activation", "identity")
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"layer {i}: malformed entry ({exc})") from None
        if w.size != rows * cols:
            raise ModelError(f"layer {i}: {w.size} weights for a {rows}x{cols} matrix")
        if act not in _ACTIVATIONS:
            raise ModelError(f"layer {i}: unknown activation {act!r}")
        layers.append(Layer(w.reshape(rows, cols), b, act))
    model = ModelSpec(layers, kind=d.get("kind", "mlp"))
    enc = d.get("encoding")
    if space is not None and enc is not None:
        fp = enc.get("fingerprint")
        if fp is not None and fp != schema_fingerprint(space):
            raise ModelError("model encoding fingerprint does not match the feature schema")
    if space is not None and model.input_width != Encoding(space).width:
        raise ModelError(f"model expects width {model.input_width}, schema encodes to {Encoding(space).width}")
    return model


def model_fingerprint(model: ModelSpec, space: FeatureSpace | None = None) -> str:
    blob = json.dumps(model_to_dict(model, space), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
