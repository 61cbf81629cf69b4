import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from rules.errors import ConfigError, InputError, TrainingDivergenceError
from rules.schema import AttributionMatrix, ClassLabel, Dataset, LabelVector

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LinearSoftmaxModel:
    """Single-layer softmax classifier: logits = x @ weights.T + biases."""

    weights: np.ndarray
    biases: np.ndarray
    classes: Tuple[ClassLabel, ...]
    loss_history: Tuple[float, ...] = field(default=())

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        biases = np.asarray(self.biases, dtype=float).ravel()
        if weights.ndim != 2 or weights.shape[0] != biases.shape[0] or weights.shape[0] != len(self.classes):
            raise InputError(
                f"Weights {weights.shape}, biases {biases.shape} and {len(self.classes)} classes are inconsistent"
            )
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(biases))):
            raise InputError("Model parameters must be finite")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def n_features(self) -> int:
        return int(self.weights.shape[1])

    def logits(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=float) @ self.weights.T + self.biases

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return softmax(self.logits(features))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def train_linear_softmax(
    X: Dataset,
    y: LabelVector,
    epochs: int = 200,
    learning_rate: float = 0.1,
    seed: int = 0,
) -> LinearSoftmaxModel:
    """Full-batch gradient descent on mean softmax cross-entropy."""
    if epochs < 1:
        raise ConfigError(f"epochs must be >= 1, got {epochs}")
    if not learning_rate > 0:
        raise ConfigError(f"learning_rate must be > 0, got {learning_rate}")
    y.check_paired(X)

    classes = y.classes
    index = {c: i for i, c in enumerate(classes)}
    targets = np.zeros((X.n_samples, len(classes)))
    targets[np.arange(X.n_samples), [index[label] for label in y.labels]] = 1.0

    rng = np.random.default_rng(seed)
    weights = rng.normal(scale=0.01, size=(len(classes), X.n_features))
    biases = np.zeros(len(classes))
    features = X.features
    losses: List[float] = []

    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(epochs):
            probs = softmax(features @ weights.T + biases)
            loss = float(-np.mean(np.sum(targets * np.log(np.clip(probs, 1e-12, 1.0)), axis=1)))
            if not np.isfinite(loss) or not np.all(np.isfinite(probs)):
                raise TrainingDivergenceError(epoch, learning_rate, loss)
            losses.append(loss)
            grad = (probs - targets) / X.n_samples
            weights = weights - learning_rate * grad.T @ features
            biases = biases - learning_rate * grad.sum(axis=0)
            if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(biases))):
                raise TrainingDivergenceError(epoch, learning_rate, loss)

    logger.debug("Trained softmax model: loss %.4f -> %.4f over %d epochs", losses[0], losses[-1], epochs)
    return LinearSoftmaxModel(weights, biases, tuple(classes), tuple(losses))


def predict_blackbox(model: LinearSoftmaxModel, X: Dataset) -> LabelVector:
    """argmax of the logits; ties go to the lowest class."""
    if X.n_features != model.n_features:
        raise InputError(f"Model expects {model.n_features} features, data has {X.n_features}")
    winners = np.argmax(model.logits(X.features), axis=1)
    return LabelVector(tuple(model.classes[i] for i in winners))


def occlusion_attributions(
    model: LinearSoftmaxModel,
    X: Dataset,
    baseline: Optional[Sequence[float]] = None,
) -> AttributionMatrix:
    """score[i, j] = p(yhat_i | x_i) - p(yhat_i | x_i with feature j set to baseline[j])."""
    if X.n_features != model.n_features:
        raise InputError(f"Model expects {model.n_features} features, data has {X.n_features}")
    base = X.features.mean(axis=0) if baseline is None else np.asarray(baseline, dtype=float).ravel()
    if base.shape[0] != X.n_features or not np.all(np.isfinite(base)):
        raise InputError("Occlusion baseline must be a finite vector with one value per feature")

    features = X.features
    rows = np.arange(X.n_samples)
    probs = model.predict_proba(features)
    predicted = np.argmax(model.logits(features), axis=1)
    original = probs[rows, predicted]

    scores = np.zeros_like(features, dtype=float)
    for j in range(X.n_features):
        occluded = features.copy()
        occluded[:, j] = base[j]
        scores[:, j] = original - model.predict_proba(occluded)[rows, predicted]
    return AttributionMatrix(scores)


@dataclass(frozen=True, eq=False)
class SyntheticTask:
    name: str
    X: Dataset
    y: LabelVector


def make_blob_task(
    name: str = "blobs",
    n_samples: int = 300,
    n_classes: int = 3,
    n_features: int = 4,
    n_informative: int = 2,
    separation: float = 2.5,
    seed: int = 0,
) -> SyntheticTask:
    """Gaussian blobs with overlapping classes.

    Class means differ only on the first ``n_informative`` features; the rest
    is unit-variance noise. Lower ``separation`` means more overlap.
    """
    if n_classes < 1 or n_features < 1 or n_samples < n_classes:
        raise ConfigError("Need at least one class, one feature and one sample per class")
    n_informative = min(n_informative, n_features)
    rng = np.random.default_rng(seed)
    means = np.zeros((n_classes, n_features))
    means[:, :n_informative] = rng.normal(scale=separation, size=(n_classes, n_informative))
    labels = np.arange(n_samples) % n_classes
    rng.shuffle(labels)
    features = means[labels] + rng.normal(size=(n_samples, n_features))
    X = Dataset.from_array(features, [f"f{j}" for j in range(n_features)])
    return SyntheticTask(name=name, X=X, y=LabelVector(tuple(int(v) for v in labels)))


def split_task(task: SyntheticTask, test_fraction: float = 0.3, seed: int = 0) -> Tuple[SyntheticTask, SyntheticTask]:
    """Shuffle and split into (extraction set, held-out test set)."""
    if not 0 < test_fraction < 1:
        raise ConfigError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    order = np.random.default_rng(seed).permutation(task.X.n_samples)
    n_test = max(1, int(round(test_fraction * task.X.n_samples)))
    test_idx, train_idx = np.sort(order[:n_test]), np.sort(order[n_test:])
    return (
        SyntheticTask(f"{task.name}-train", task.X.take(train_idx), task.y.take(train_idx)),
        SyntheticTask(f"{task.name}-test", task.X.take(test_idx), task.y.take(test_idx)),
    )
