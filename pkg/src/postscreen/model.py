"""Linear classifiers trained by seeded stochastic gradient descent.

Both losses (logistic and hinge) share one training loop: per-sample
updates, learning rate eta_t = eta0 / (1 + l2 * eta0 * t), weights
initialized to zero, per-epoch shuffling driven solely by the seed. L2
decay is applied through a lazy scale factor so each update touches only
the sample's nonzero coordinates; results are bitwise-deterministic for
fixed inputs and config.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import FINE_CLASSES
from .errors import ConfigError
from .vectorize import FeatureLayout, FeatureVector

log = logging.getLogger(__name__)

LOSSES = ("logistic", "hinge")


def sigmoid(score: float) -> float:
    if score >= 0:
        return 1.0 / (1.0 + math.exp(-score))
    z = math.exp(score)
    return z / (1.0 + z)


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "hinge"
    l2: float = 1e-4
    learning_rate: float = 0.1
    epochs: int = 20
    seed: int = 0
    class_weighting: str = "none"

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")
        if self.class_weighting not in ("none", "inverse_frequency"):
            raise ConfigError(f"unknown class_weighting {self.class_weighting!r}")

    def to_dict(self) -> dict:
        return {
            "loss": self.loss,
            "l2": self.l2,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "seed": self.seed,
            "class_weighting": self.class_weighting,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


@dataclass
class LinearModel:
    """Weight vector + bias over a fixed feature layout."""

    weights: np.ndarray
    bias: float
    config: TrainConfig
    layout: FeatureLayout

    def decision(self, x: FeatureVector) -> float:
        if x.layout.total_length != len(self.weights):
            raise ValueError(
                f"feature length {x.layout.total_length} != model length {len(self.weights)}"
            )
        d = x.layout.dense_size
        score = self.bias
        if d:
            score += float(np.dot(self.weights[:d], x.dense))
        if x.sparse.nnz:
            score += float(np.dot(self.weights[d + x.sparse.indices], x.sparse.values))
        if x.layout.meta_size:
            score += float(np.dot(self.weights[d + x.layout.sparse_size :], x.meta))
        return score

    def probability(self, x: FeatureVector) -> float:
        """Calibrated positive-class probability (logistic link)."""
        return sigmoid(self.decision(x))

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "config": self.config.to_dict(),
            "layout": self.layout.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LinearModel":
        return cls(
            weights=np.array(data["weights"], dtype=np.float64),
            bias=float(data["bias"]),
            config=TrainConfig.from_dict(data["config"]),
            layout=FeatureLayout.from_dict(data["layout"]),
        )


def predict(model: LinearModel, x: FeatureVector) -> tuple[bool, float]:
    """Score one vector; the label is positive iff the score is > 0."""
    score = model.decision(x)
    return bool(score > 0), float(score)


def _sample_weights(y: np.ndarray, mode: str) -> np.ndarray:
    if mode == "none":
        return np.ones(len(y), dtype=np.float64)
    n = len(y)
    weights = np.ones(n, dtype=np.float64)
    for cls in (0, 1):
        count = int(np.sum(y == cls))
        if count:
            weights[y == cls] = n / (2.0 * count)
    return weights


def train_linear(
    X: Sequence[FeatureVector], y: Sequence[int], config: TrainConfig
) -> LinearModel:
    """Train one binary linear model; y entries are 0/1."""
    if len(X) != len(y):
        raise ValueError(f"got {len(X)} feature vectors but {len(y)} labels")
    if len(X) == 0:
        raise ValueError("cannot train on an empty dataset")
    layout = X[0].layout
    for x in X:
        if x.layout.total_length != layout.total_length:
            raise ValueError("inconsistent feature lengths in training data")

    y_arr = np.asarray(y, dtype=np.int64)
    if not np.all((y_arr == 0) | (y_arr == 1)):
        raise ValueError("labels must be 0 or 1")
    sample_w = _sample_weights(y_arr, config.class_weighting)

    n_features = layout.total_length
    d = layout.dense_size
    meta_off = d + layout.sparse_size
    w = np.zeros(n_features, dtype=np.float64)
    bias = 0.0
    scale = 1.0
    eta0 = config.learning_rate
    l2 = config.l2
    if eta0 * l2 >= 1.0:
        raise ConfigError("learning_rate * l2 must be < 1")

    rng = np.random.default_rng(config.seed)
    step = 0
    for _ in range(config.epochs):
        order = rng.permutation(len(X))
        for i in order:
            x = X[i]
            eta = eta0 / (1.0 + l2 * eta0 * step)
            step += 1
            score = bias
            if d:
                score += scale * float(np.dot(w[:d], x.dense))
            if x.sparse.nnz:
                score += scale * float(np.dot(w[d + x.sparse.indices], x.sparse.values))
            if layout.meta_size:
                score += scale * float(np.dot(w[meta_off:], x.meta))

            cw = sample_w[i]
            if config.loss == "hinge":
                ys = 1.0 if y_arr[i] == 1 else -1.0
                if ys * score < 1.0:
                    coeff = eta * cw * ys / scale
                    _add_scaled(w, x, coeff, d, meta_off)
                    bias += eta * cw * ys
            else:
                grad = (sigmoid(score) - float(y_arr[i])) * cw
                if grad != 0.0:
                    coeff = -eta * grad / scale
                    _add_scaled(w, x, coeff, d, meta_off)
                    bias -= eta * grad
            if l2:
                scale *= 1.0 - eta * l2
                if scale < 1e-9:
                    w *= scale
                    scale = 1.0
    if scale != 1.0:
        w *= scale
    return LinearModel(weights=w, bias=float(bias), config=config, layout=layout)


def _add_scaled(w: np.ndarray, x: FeatureVector, coeff: float, d: int, meta_off: int) -> None:
    if d:
        w[:d] += coeff * x.dense
    if x.sparse.nnz:
        w[d + x.sparse.indices] += coeff * x.sparse.values
    if len(x.meta):
        w[meta_off:] += coeff * x.meta


@dataclass
class OneVsAllModel:
    """Per-class binary models for the fine-grain multi-label task."""

    models: dict[str, LinearModel]
    threshold: float = 0.5

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(self.models)

    def scores(self, x: FeatureVector) -> dict[str, float]:
        return {cls: m.decision(x) for cls, m in self.models.items()}

    def probabilities(self, x: FeatureVector) -> dict[str, float]:
        return {cls: sigmoid(s) for cls, s in self.scores(x).items()}

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "classes": {cls: m.to_dict() for cls, m in self.models.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OneVsAllModel":
        return cls(
            models={c: LinearModel.from_dict(m) for c, m in data["classes"].items()},
            threshold=float(data["threshold"]),
        )


def train_one_vs_all(
    X: Sequence[FeatureVector],
    Y: Sequence[frozenset[str] | set[str]],
    config: TrainConfig,
    classes: Sequence[str] = FINE_CLASSES,
    threshold: float = 0.5,
) -> OneVsAllModel:
    """Train one binary model per class; a post is a positive example of
    every class in its label set."""
    if len(X) != len(Y):
        raise ValueError(f"got {len(X)} feature vectors but {len(Y)} label sets")
    for labels in Y:
        unknown = set(labels) - set(classes)
        if unknown:
            raise ValueError(f"labels {sorted(unknown)} not in taxonomy {list(classes)}")
    models = {}
    for cls in classes:
        y = [1 if cls in labels else 0 for labels in Y]
        if not any(y):
            log.warning("class %r absent from training data; model sees only negatives", cls)
        models[cls] = train_linear(X, y, config)
    return OneVsAllModel(models=models, threshold=threshold)


def predict_multilabel(
    model: OneVsAllModel, x: FeatureVector, hostile: bool
) -> frozenset[str]:
    """Fine labels for one post, gated by the coarse decision.

    Non-hostile posts get the empty set. Otherwise logistic submodels
    admit classes with probability >= threshold and hinge submodels
    classes with score > 0; if nothing passes, the best-scoring class is
    returned alone.
    """
    if not hostile:
        return frozenset()
    chosen = []
    ranking = []
    for cls in sorted(model.models):
        sub = model.models[cls]
        score = sub.decision(x)
        if sub.config.loss == "logistic":
            prob = sigmoid(score)
            passed = prob >= model.threshold
            ranking.append((prob, cls))
        else:
            passed = score > 0
            ranking.append((score, cls))
        if passed:
            chosen.append(cls)
    if chosen:
        return frozenset(chosen)
    best_cls = sorted(ranking, key=lambda item: (-item[0], item[1]))[0][1]
    return frozenset({best_cls})
