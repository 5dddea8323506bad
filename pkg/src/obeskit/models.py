"""Versioned JSON container for trained classifiers, plus pure-numpy scoring.

Training is delegated to scikit-learn; what gets persisted is only the
learned parameters, and scoring is re-implemented here so a model file is
usable (and auditable) without pickles.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

MODEL_FORMAT = "obeskit-model"
MODEL_VERSION = 1


class ModelError(ValueError):
    pass


def feature_spec_hash(name: str, dim: int, rate_hz: float, frame_s: float, version: int = 1) -> str:
    blob = json.dumps([name, int(dim), float(rate_hz), float(frame_s), int(version)])
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        return cls(mean, scale)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


@dataclass
class LinearOvRModel:
    """One-vs-rest linear max-margin model with softmax-normalized scores."""

    classes: list
    coef: np.ndarray  # (n_classes, D)
    intercept: np.ndarray  # (n_classes,)
    scaler: Standardizer
    feature_spec: str
    meta: dict = field(default_factory=dict)

    kind = "linear_ovr"

    @property
    def feature_dim(self) -> int:
        return self.coef.shape[1]

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.feature_dim:
            raise ModelError(f"feature dimension {X.shape[1]} != model dimension {self.feature_dim}")
        return self.scaler(X) @ self.coef.T + self.intercept

    def scores(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.decision(X))

    def predict(self, X: np.ndarray) -> list:
        return [self.classes[i] for i in np.argmax(self.decision(X), axis=1)]

    def params(self) -> dict:
        return {
            "coef": self.coef.tolist(),
            "intercept": self.intercept.tolist(),
            "scaler_mean": self.scaler.mean.tolist(),
            "scaler_scale": self.scaler.scale.tolist(),
        }

    @classmethod
    def from_params(cls, classes, params, feature_spec, meta):
        return cls(
            classes=list(classes),
            coef=np.asarray(params["coef"], dtype=np.float64),
            intercept=np.asarray(params["intercept"], dtype=np.float64),
            scaler=Standardizer(np.asarray(params["scaler_mean"]), np.asarray(params["scaler_scale"])),
            feature_spec=feature_spec,
            meta=dict(meta),
        )


@dataclass
class RbfOvOModel:
    """Kernel SVM with RBF kernel exp(-gamma |a - b|^2) and one-vs-one voting.

    Parameter layout follows libsvm: support vectors grouped by class,
    ``dual_coef`` of shape (n_classes - 1, n_sv), one intercept per class
    pair in (0,1), (0,2), ..., (1,2), ... order.
    """

    classes: list
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    intercept: np.ndarray
    n_support: np.ndarray
    gamma: float
    C: float
    class_weights: list
    scaler: Standardizer
    feature_spec: str
    meta: dict = field(default_factory=dict)

    kind = "rbf_ovo"

    @property
    def feature_dim(self) -> int:
        return self.support_vectors.shape[1]

    def _kernel(self, X: np.ndarray) -> np.ndarray:
        sv = self.support_vectors
        d2 = (X * X).sum(1)[:, None] + (sv * sv).sum(1)[None, :] - 2.0 * X @ sv.T
        np.maximum(d2, 0.0, out=d2)
        return np.exp(-self.gamma * d2)

    def pairwise_decision(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.feature_dim:
            raise ModelError(f"feature dimension {X.shape[1]} != model dimension {self.feature_dim}")
        K = self._kernel(self.scaler(X))
        k = len(self.classes)
        bounds = np.concatenate([[0], np.cumsum(self.n_support)])
        out = np.empty((X.shape[0], k * (k - 1) // 2))
        p = 0
        for i in range(k):
            for j in range(i + 1, k):
                si = slice(bounds[i], bounds[i + 1])
                sj = slice(bounds[j], bounds[j + 1])
                out[:, p] = (K[:, si] @ self.dual_coef[j - 1, si]
                             + K[:, sj] @ self.dual_coef[i, sj]
                             + self.intercept[p])
                p += 1
        return out

    def votes(self, X: np.ndarray) -> np.ndarray:
        dec = self.pairwise_decision(X)
        k = len(self.classes)
        votes = np.zeros((dec.shape[0], k))
        p = 0
        for i in range(k):
            for j in range(i + 1, k):
                win_i = dec[:, p] > 0
                votes[win_i, i] += 1
                votes[~win_i, j] += 1
                p += 1
        return votes

    def predict_index(self, X: np.ndarray) -> np.ndarray:
        # ties resolve to the lowest class index, as libsvm does
        return np.argmax(self.votes(X), axis=1)

    def predict(self, X: np.ndarray) -> list:
        return [self.classes[i] for i in self.predict_index(X)]

    def params(self) -> dict:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "intercept": self.intercept.tolist(),
            "n_support": [int(n) for n in self.n_support],
            "gamma": self.gamma,
            "C": self.C,
            "class_weights": list(self.class_weights),
            "scaler_mean": self.scaler.mean.tolist(),
            "scaler_scale": self.scaler.scale.tolist(),
        }

    @classmethod
    def from_params(cls, classes, params, feature_spec, meta):
        return cls(
            classes=list(classes),
            support_vectors=np.asarray(params["support_vectors"], dtype=np.float64),
            dual_coef=np.asarray(params["dual_coef"], dtype=np.float64),
            intercept=np.asarray(params["intercept"], dtype=np.float64),
            n_support=np.asarray(params["n_support"], dtype=np.int64),
            gamma=float(params["gamma"]),
            C=float(params["C"]),
            class_weights=list(params["class_weights"]),
            scaler=Standardizer(np.asarray(params["scaler_mean"]), np.asarray(params["scaler_scale"])),
            feature_spec=feature_spec,
            meta=dict(meta),
        )


_KINDS = {"linear_ovr": LinearOvRModel, "rbf_ovo": RbfOvOModel}


def save_model(model, path: str | Path, cut_points: Optional[tuple] = None) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "classes": list(model.classes),
        "feature_dim": model.feature_dim,
        "feature_spec": model.feature_spec,
        "cut_points": list(cut_points) if cut_points is not None else None,
        "meta": model.meta,
        "params": model.params(),
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_model(path: str | Path, expected_spec: Optional[str] = None):
    """Load a model file, refusing anything whose feature spec disagrees."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ModelError(f"cannot read model {path}: {exc}") from exc
    if doc.get("format") != MODEL_FORMAT or "version" not in doc:
        raise ModelError(f"{path}: not an {MODEL_FORMAT} file")
    if doc["version"] != MODEL_VERSION:
        raise ModelError(f"{path}: unsupported model version {doc['version']}")
    if expected_spec is not None and doc["feature_spec"] != expected_spec:
        raise ModelError(f"{path}: feature spec {doc['feature_spec']} does not match "
                         f"expected {expected_spec}")
    cls = _KINDS.get(doc["kind"])
    if cls is None:
        raise ModelError(f"{path}: unknown model kind {doc['kind']!r}")
    model = cls.from_params(doc["classes"], doc["params"], doc["feature_spec"], doc.get("meta", {}))
    if model.feature_dim != doc["feature_dim"]:
        raise ModelError(f"{path}: feature_dim field disagrees with stored weights")
    return model
