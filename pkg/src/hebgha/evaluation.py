"""Classifiers on top of the two learning rules and the metric suite.

Metric definitions used throughout the package:

* error rate: mean normalized reconstruction error of a linear code, in
  percent (see :func:`hebgha.spectral.reconstruction_error`).
* average convergence rate: mean Frobenius norm of the per-step weight
  change over a training trace. This is a definition chosen here; a smaller
  value means smaller steps on average, not a better algorithm.
* memory usage: a parameter-count model, 8 bytes per stored real.
* energy: 10 nJ per delivered connection event, counted in integer nJ.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .core import InvalidTaskError, ShapeError, UndefinedMetricError
from .data import Dataset
from .rules import TrainingTrace, hebbian_init, hebbian_train
from .spectral import _linear_code_error

__all__ = [
    "NJ_PER_CONNECTION",
    "CentroidClassifier",
    "MetricsRow",
    "MulticlassHebbian",
    "accuracy",
    "avg_convergence_rate",
    "energy_estimate",
    "energy_nanojoules",
    "fit_centroids",
    "format_percent",
    "hebbian_classify",
    "hebbian_error_rate",
    "memory_estimate",
    "nearest_centroid_classify",
    "train_multiclass_hebbian",
]

NJ_PER_CONNECTION = 10
BYTES_PER_REAL = 8


@dataclass(frozen=True)
class MulticlassHebbian:
    """One-vs-rest Hebbian models, one per class, with bipolar targets."""

    models: tuple

    def __post_init__(self):
        if len({m.n_inputs for m in self.models}) > 1:
            raise ShapeError("per-class models disagree on n_inputs")

    @property
    def classes(self) -> int:
        return len(self.models)

    @property
    def weights(self) -> np.ndarray:
        return np.array([m.weights for m in self.models])

    @property
    def biases(self) -> np.ndarray:
        return np.array([m.bias for m in self.models])


@dataclass(frozen=True)
class CentroidClassifier:
    centroids: np.ndarray  # classes x m

    @property
    def classes(self) -> int:
        return self.centroids.shape[0]

    @property
    def m(self) -> int:
        return self.centroids.shape[1]


@dataclass
class MetricsRow:
    dataset: str
    algorithm: str  # "HA" | "GHA"
    fabric_mode: str  # "reference" | "simulated-fabric"
    split: float
    seed: int
    train_size: int = 0
    test_size: int = 0
    error_rate: float | None = None
    training_time: float | None = None
    memory_usage: int | None = None
    avg_convergence_rate: float | None = None
    classification_accuracy: float | None = None
    energy: float | None = None
    connection_events: int | None = None
    min_alignment: float | None = None
    status: str = "ok"
    extra: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for name in ("error_rate", "classification_accuracy"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 100.0:
                raise ValueError(f"{name}={v} outside [0, 100]")
        for name in ("training_time", "memory_usage", "energy"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name}={v} is negative")


def train_multiclass_hebbian(
    train: Dataset, epochs: int = 1
) -> tuple[MulticlassHebbian, TrainingTrace]:
    """Class ``k`` is imprinted with target +1 on its own samples, -1 elsewhere.

    The returned trace merges the per-class traces step by step: the delta
    norm of a step is the norm over all class models jointly.
    """
    if train.classes < 2:
        raise InvalidTaskError(f"{train.name}: classification needs >= 2 classes, got {train.classes}")
    models, traces = [], []
    for k in range(train.classes):
        targets = np.where(train.labels == k, 1.0, -1.0)
        model, trace = hebbian_train(hebbian_init(train.dim), list(zip(train.x, targets)), epochs)
        models.append(model)
        traces.append(trace)
    merged = TrainingTrace()
    for i, step in enumerate(traces[0].steps):
        d = math.sqrt(math.fsum(tr.steps[i][2] ** 2 for tr in traces))
        merged.steps.append((step[0], step[1], d))
    for e, rec in enumerate(traces[0].epochs):
        merged.epochs.append(
            (rec[0], sum(tr.epochs[e][1] for tr in traces), sum(tr.epochs[e][2] for tr in traces))
        )
    return MulticlassHebbian(tuple(models)), merged


def hebbian_classify(model: MulticlassHebbian, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    scores = model.weights @ x + model.biases
    return int(np.argmax(scores))  # first maximum wins ties


def fit_centroids(projected: Sequence, classes: int) -> CentroidClassifier:
    """Per-class mean of ``(vector, label)`` pairs."""
    vecs = np.array([np.asarray(v, dtype=np.float64) for v, _ in projected])
    labels = np.array([int(k) for _, k in projected])
    missing = [k for k in range(classes) if not np.any(labels == k)]
    if missing:
        raise InvalidTaskError(f"classes {missing} have no training samples")
    return CentroidClassifier(np.array([vecs[labels == k].mean(axis=0) for k in range(classes)]))


def nearest_centroid_classify(cc: CentroidClassifier, y) -> int:
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (cc.m,):
        raise ShapeError(f"projected vector has shape {y.shape}, classifier expects ({cc.m},)")
    d = cc.centroids - y
    return int(np.argmin(np.einsum("ij,ij->i", d, d)))


def accuracy(predictions, labels) -> float:
    p = np.asarray(predictions)
    t = np.asarray(labels)
    if p.shape != t.shape:
        raise ShapeError(f"{p.size} predictions for {t.size} labels")
    if p.size == 0:
        raise UndefinedMetricError("no predictions")
    return 100.0 * int(np.sum(p == t)) / p.size


def format_percent(value: float | None) -> str:
    """Two-decimal rendering used in every human-readable table."""
    return "" if value is None else f"{value:.2f}"


def avg_convergence_rate(trace: TrainingTrace) -> float:
    if trace.step_count == 0:
        raise UndefinedMetricError("empty training trace")
    return math.fsum(s[2] for s in trace.steps) / trace.step_count


def energy_nanojoules(connection_events: int) -> int:
    return NJ_PER_CONNECTION * int(connection_events)


def energy_estimate(connection_events: int) -> float:
    """Joules spent delivering ``connection_events`` at 10 nJ each."""
    return energy_nanojoules(connection_events) / 1_000_000_000


def memory_estimate(algorithm: str, m: int = 0, n: int = 0, classes: int = 0) -> int:
    """Bytes of model state: parameters plus working buffers, 8 bytes each."""
    if algorithm == "GHA":
        return BYTES_PER_REAL * (m * n) + BYTES_PER_REAL * (m + n)
    if algorithm == "HA":
        return BYTES_PER_REAL * classes * (n + 1) + BYTES_PER_REAL * n
    raise ValueError(f"unknown algorithm {algorithm!r}")


def hebbian_error_rate(model: MulticlassHebbian, inputs) -> float:
    """Reconstruction error of the span of the class weight rows, in percent.

    Rows are scaled to unit norm and orthonormalized (dependent rows
    dropped) so the code is a true projection; one-vs-rest rows are never
    orthogonal and for two classes they are exact negatives.
    """
    if isinstance(inputs, Dataset):
        inputs = inputs.x
    w = model.weights
    norms = np.linalg.norm(w, axis=1)
    keep = norms > 0
    if not keep.any():
        raise UndefinedMetricError("every class weight vector is zero")
    unit = w[keep] / norms[keep, None]
    q, r = np.linalg.qr(unit.T)
    d = np.abs(np.diag(r))
    code = q[:, d > 1e-10 * d.max()].T
    return _linear_code_error(code, inputs)
