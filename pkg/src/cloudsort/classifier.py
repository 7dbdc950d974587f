"""One-vs-rest linear SVMs trained by averaged stochastic subgradient descent."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, MalformedModel, SingleClass

MAGIC = "cloudsort-svm v1"
DEFAULT_LAMBDA = 1e-4
DEFAULT_EPOCHS = 50
SIG_DIGITS = 12


@dataclass(frozen=True, eq=False)
class TrainingSet:
    features: np.ndarray       # (n, d)
    labels: tuple
    class_index: tuple         # registration (first appearance) order

    @classmethod
    def from_lists(cls, features, labels) -> TrainingSet:
        labels = tuple(str(x) for x in labels)
        rows = [np.asarray(f, dtype=np.float64).reshape(-1) for f in features]
        if not rows or len(rows) != len(labels):
            raise ValueError(f"{len(rows)} feature vectors for {len(labels)} labels")
        d = len(rows[0])
        if any(len(r) != d for r in rows):
            raise DimensionMismatch("feature vectors differ in length")
        return cls(np.vstack(rows), labels, tuple(dict.fromkeys(labels)))

    @property
    def dim(self):
        return self.features.shape[1]


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    class_index: tuple
    weights: np.ndarray       # (c, d)
    biases: np.ndarray        # (c,)
    mean: np.ndarray          # (d,) standardization
    std: np.ndarray           # (d,)
    lam: float = DEFAULT_LAMBDA
    epochs: int = DEFAULT_EPOCHS
    seed: int = 0

    @property
    def dim(self):
        return self.weights.shape[1]

    def standardize(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def scores(self, feature):
        x = np.asarray(feature, dtype=np.float64).reshape(-1)
        if len(x) != self.dim:
            raise DimensionMismatch(f"feature has {len(x)} values, model expects {self.dim}")
        return self.weights @ self.standardize(x) + self.biases


def _round(a):
    # store exactly what the model file can represent, so save/load is lossless
    return np.array([float(f"{v:.{SIG_DIGITS}g}") for v in np.ravel(a)]).reshape(np.shape(a))


def train(data: TrainingSet, lam: float = DEFAULT_LAMBDA, epochs: int = DEFAULT_EPOCHS,
          seed: int = 0) -> ClassifierModel:
    """Fit one binary hinge-loss classifier per class (label == c vs the rest).

    Pegasos-style updates with step 1/(lam*t) over a seeded shuffle per epoch;
    the returned weights average the iterates of the second half of training.
    The bias is learned as the weight of a constant feature.
    """
    if len(data.class_index) < 2:
        raise SingleClass(f"training needs at least 2 classes, got {list(data.class_index)}")
    if lam <= 0 or epochs < 1:
        raise ValueError("lam must be positive and epochs >= 1")
    X = data.features
    n, d = X.shape
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    mean, std = _round(mean), _round(std)
    Z = np.hstack([(X - mean) / std, np.ones((n, 1))])

    cls_pos = {c: i for i, c in enumerate(data.class_index)}
    y_idx = np.array([cls_pos[l] for l in data.labels])
    C = len(data.class_index)
    Y = -np.ones((n, C))
    Y[np.arange(n), y_idx] = 1.0

    rng = np.random.default_rng(seed)
    W = np.zeros((C, d + 1))
    W_avg = np.zeros_like(W)
    total = epochs * n
    avg_from = total // 2 + 1
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            z, y = Z[i], Y[i]
            viol = y * (W @ z) < 1.0
            W *= 1.0 - eta * lam
            if viol.any():
                W[viol] += eta * np.outer(y[viol], z)
            if t >= avg_from:
                W_avg += W
    W_avg /= total - avg_from + 1
    return ClassifierModel(data.class_index, _round(W_avg[:, :d]), _round(W_avg[:, d]),
                           mean, std, float(lam), int(epochs), int(seed))


def predict(model: ClassifierModel, feature):
    """Return ``(label, scores)``; ties go to the earlier registered class."""
    s = model.scores(feature)
    return model.class_index[int(np.argmax(s))], s


def predict_many(model: ClassifierModel, features):
    return [predict(model, f)[0] for f in features]


def _fmt(values):
    return " ".join(f"{v:.{SIG_DIGITS}g}" for v in values)


def save_model(model: ClassifierModel, path):
    lines = [
        MAGIC,
        f"# lambda={model.lam!r} epochs={model.epochs} seed={model.seed}",
        f"dim {model.dim}",
        "classes " + " ".join(model.class_index),
        "mean " + _fmt(model.mean),
        "std " + _fmt(model.std),
    ]
    for c, w, b in zip(model.class_index, model.weights, model.biases):
        lines.append(f"w {c} {_fmt(w)} {b:.{SIG_DIGITS}g}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> ClassifierModel:
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != MAGIC:
        raise MalformedModel(f"{path}: missing '{MAGIC}' header")
    config = {"lambda": DEFAULT_LAMBDA, "epochs": DEFAULT_EPOCHS, "seed": 0}
    body = []
    for ln in lines[1:]:
        if ln.startswith("#"):
            for tok in ln[1:].split():
                k, _, v = tok.partition("=")
                if k in config:
                    config[k] = float(v) if k == "lambda" else int(v)
        else:
            body.append(ln.split())
    try:
        keyed = {}
        weights = {}
        for parts in body:
            if parts[0] == "w":
                weights[parts[1]] = [float(x) for x in parts[2:]]
            else:
                keyed[parts[0]] = parts[1:]
        d = int(keyed["dim"][0])
        classes = tuple(keyed["classes"])
        mean = np.array([float(x) for x in keyed["mean"]])
        std = np.array([float(x) for x in keyed["std"]])
        rows = [weights[c] for c in classes]
    except (KeyError, IndexError, ValueError) as exc:
        raise MalformedModel(f"{path}: {exc!r}") from None
    if not classes or len(mean) != d or len(std) != d or any(len(r) != d + 1 for r in rows):
        raise MalformedModel(f"{path}: vector lengths disagree with dim {d}")
    if len(weights) != len(classes):
        raise MalformedModel(f"{path}: weight lines do not match the class list")
    W = np.array([r[:d] for r in rows])
    b = np.array([r[d] for r in rows])
    return ClassifierModel(classes, W, b, mean, std, config["lambda"], config["epochs"],
                           config["seed"])
