"""One-vs-rest linear SVM trained by hinge-loss subgradient descent."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DegenerateLabelsError(ValueError):
    pass


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class SvmTrainConfig:
    lam: float = 1e-4
    epochs: int = 50
    eta0: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0 or self.epochs < 1 or self.eta0 <= 0:
            raise ValueError("need lam >= 0, epochs >= 1, eta0 > 0")


@dataclass
class LinearModel:
    weights: np.ndarray  # (n_classes, dim)
    bias: np.ndarray  # (n_classes,)
    scale: np.ndarray  # (dim,) per-dimension max of the training features

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise DimensionError(f"feature length {X.shape[1]} != model dim {self.dim}")
        return (X / self.scale) @ self.weights.T + self.bias


def _targets(y: np.ndarray, n_classes: int) -> np.ndarray:
    Y = -np.ones((len(y), n_classes))
    Y[np.arange(len(y)), y] = 1.0
    return Y


def objective(W: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray, lam: float) -> float:
    """L2-regularized one-vs-rest hinge loss, averaged over samples."""
    Y = _targets(y, W.shape[0])
    margins = Y * (X @ W.T + b)
    return 0.5 * lam * float(np.sum(W * W)) + float(np.maximum(0.0, 1.0 - margins).sum(axis=1).mean())


def subgradient(W: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray,
                lam: float) -> tuple[np.ndarray, np.ndarray]:
    Y = _targets(y, W.shape[0])
    active = (Y * (X @ W.T + b)) < 1.0
    G = -(active * Y)  # d loss / d score
    n = len(y)
    return lam * W + G.T @ X / n, G.sum(axis=0) / n


def fit(features, labels, cfg: SvmTrainConfig = SvmTrainConfig(),
        n_classes: int | None = None, return_history: bool = False):
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise DimensionError("features must be (n_samples, dim) and match labels")
    if len(np.unique(y)) < 2:
        raise DegenerateLabelsError("need at least two classes to fit")
    n_classes = n_classes or int(y.max()) + 1
    scale = X.max(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    Xn = X / scale
    W = np.zeros((n_classes, X.shape[1]))
    b = np.zeros(n_classes)
    Y = _targets(y, n_classes)
    rng = np.random.default_rng(cfg.seed)
    history = []
    for epoch in range(cfg.epochs):
        eta = cfg.eta0 / (1.0 + epoch)
        losses = []
        for i in rng.permutation(len(y)):
            x, t = Xn[i], Y[i]
            margin = t * (W @ x + b)
            losses.append(0.5 * cfg.lam * float(np.sum(W * W))
                          + float(np.maximum(0.0, 1.0 - margin).sum()))
            g = -t * (margin < 1.0)
            W -= eta * (cfg.lam * W + np.outer(g, x))
            b -= eta * g
        history.append(float(np.mean(losses)))
    model = LinearModel(W, b, scale)
    return (model, history) if return_history else model


def predict(model: LinearModel, feature) -> int:
    """Argmax of the class scores; ties go to the smallest class id."""
    return int(np.argmax(model.scores(feature)[0]))


def predict_many(model: LinearModel, X) -> np.ndarray:
    return np.argmax(model.scores(X), axis=1)


def evaluate(model: LinearModel, features, labels, n_classes: int | None = None):
    """Accuracy in percent and a confusion matrix with rows indexed by true class."""
    if len(labels) == 0:
        raise ValueError("cannot evaluate on an empty set")
    return accuracy_and_confusion(predict_many(model, features), labels,
                                  n_classes or model.weights.shape[0])


def accuracy_and_confusion(pred, labels, n_classes: int):
    y = np.asarray(labels, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y, pred), 1)
    return 100.0 * float(np.mean(pred == y)), cm


def dumps_model(model: LinearModel) -> str:
    buf = io.StringIO()
    n, d = model.weights.shape
    buf.write("stdpvideo-linear-model 1\n")
    buf.write(f"classes {n} dim {d}\n")
    for name, arr in (("scale", model.scale), ("bias", model.bias), ("weights", model.weights)):
        buf.write(f"{name} {arr.size}\n")
        for v in arr.ravel():
            buf.write(f"{v:.17g}\n")
    return buf.getvalue()


def loads_model(text: str) -> LinearModel:
    lines = text.splitlines()
    if not lines or lines[0] != "stdpvideo-linear-model 1":
        raise ValueError("not a linear model file")
    _, n, _, d = lines[1].split()
    n, d = int(n), int(d)
    pos = 2
    arrays = {}
    for _ in range(3):
        name, size = lines[pos].split()
        size = int(size)
        arrays[name] = np.array([float(v) for v in lines[pos + 1: pos + 1 + size]])
        pos += 1 + size
    return LinearModel(arrays["weights"].reshape(n, d), arrays["bias"], arrays["scale"])


def save_model(model: LinearModel, path) -> None:
    Path(path).write_text(dumps_model(model))


def load_model(path) -> LinearModel:
    return loads_model(Path(path).read_text())
