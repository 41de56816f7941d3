"""Learning rules: supervised Hebbian imprinting and the Generalized Hebbian
Algorithm (Sanger's rule).

Both trainers are built from pure step functions. ``gha_step`` evaluates the
update through the residual (deflation) recurrence

    r_0 = x
    r_i = r_{i-1} - y_i * c_i          (old row c_i)
    c_i <- c_i + (eta * y_i) * r_i

which is algebraically the matrix form ``C + eta * (y x^T - LT[y y^T] C)``
but pins the floating-point evaluation order. The fabric simulator calls the
same row kernel, which is what makes distributed runs bit-identical.
"""

from __future__ import annotations

import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    DimensionError,
    EmptyDatasetError,
    RateError,
    ShapeError,
    SplitMix64,
    derive_seed,
    dot,
    seeded_uniform_matrix,
    sumsq,
)

__all__ = [
    "GhaConfig",
    "HebbianModel",
    "TrainingTrace",
    "WeightMatrix",
    "eta_schedule",
    "gha_init",
    "gha_output",
    "gha_step",
    "gha_step_matrix_form",
    "gha_train",
    "hebbian_init",
    "hebbian_step",
    "hebbian_train",
    "lower_triangular_of",
    "row_update",
]


TAU_CAP = 1000.0


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HebbianModel:
    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen(self.weights))
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def n_inputs(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class WeightMatrix:
    """GHA weights; row ``i`` is the candidate for eigenvector ``i``.

    ``oracle_mode`` lifts the ``M < N`` reduction contract so square
    matrices can be compared against a full eigenbasis.
    """

    c: np.ndarray
    oracle_mode: bool = False

    def __post_init__(self):
        c = _frozen(self.c)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise DimensionError(f"weight matrix must be 2-D and non-empty, got shape {c.shape}")
        if not self.oracle_mode and c.shape[0] >= c.shape[1]:
            raise DimensionError(
                f"dimensionality reduction needs M < N, got M={c.shape[0]}, N={c.shape[1]}"
            )
        object.__setattr__(self, "c", c)

    @property
    def m_outputs(self) -> int:
        return self.c.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.c.shape[1]


@dataclass(frozen=True)
class GhaConfig:
    """Training configuration for GHA.

    ``tau=None`` resolves at training time to
    ``min(samples * epochs / 10, TAU_CAP)``: small datasets decay over the
    whole run, long runs keep annealing so the final rate ends near zero.
    """

    eta0: float = 0.01
    tau: float | None = None
    epochs: int = 50
    seed: int = 0
    init_scale: float = 0.01
    shuffle_seed: int | None = None

    def __post_init__(self):
        if not self.eta0 > 0:
            raise RateError(f"eta0 must be > 0, got {self.eta0}")
        if self.tau is not None and not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not self.init_scale > 0:
            raise ValueError(f"init_scale must be > 0, got {self.init_scale}")

    def resolved(self, samples_per_epoch: int) -> GhaConfig:
        if self.tau is not None:
            return self
        return replace(self, tau=min(samples_per_epoch * self.epochs / 10.0, TAU_CAP))


@dataclass
class TrainingTrace:
    steps: list = field(default_factory=list)  # (step, eta, delta_norm)
    epochs: list = field(default_factory=list)  # (epoch, summed_delta_norm, seconds)

    @property
    def step_count(self) -> int:
        return len(self.steps)

    @property
    def delta_norms(self) -> np.ndarray:
        return np.array([s[2] for s in self.steps], dtype=np.float64)

    @property
    def wall_seconds(self) -> float:
        return sum(e[2] for e in self.epochs)


# -- Hebbian -----------------------------------------------------------------


def hebbian_init(n_inputs: int) -> HebbianModel:
    if n_inputs < 1:
        raise DimensionError(f"n_inputs must be >= 1, got {n_inputs}")
    return HebbianModel(np.zeros(n_inputs), 0.0)


def hebbian_step(model: HebbianModel, x, target: float) -> HebbianModel:
    # output activation is clamped to the target during training
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n_inputs,):
        raise ShapeError(f"input length {x.shape} does not match n_inputs={model.n_inputs}")
    y = float(target)
    return HebbianModel(model.weights + x * y, model.bias + y)


def hebbian_train(
    model: HebbianModel, pairs: Sequence, epochs: int = 1
) -> tuple[HebbianModel, TrainingTrace]:
    """Apply :func:`hebbian_step` over ``pairs`` in order, ``epochs`` times."""
    if len(pairs) == 0:
        raise EmptyDatasetError("no training pairs")
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    trace = TrainingTrace()
    t = 0
    for e in range(epochs):
        start = time.perf_counter()
        total = 0.0
        for x, target in pairs:
            new = hebbian_step(model, x, target)
            d = math.sqrt(sumsq(new.weights - model.weights) + (new.bias - model.bias) ** 2)
            trace.steps.append((t, 1.0, d))
            total += d
            model = new
            t += 1
        trace.epochs.append((e, total, time.perf_counter() - start))
    return model, trace


# -- GHA ---------------------------------------------------------------------


def gha_init(m: int, n: int, config: GhaConfig, oracle_mode: bool = False) -> WeightMatrix:
    if m < 1 or n < 1:
        raise DimensionError(f"need m, n >= 1, got m={m}, n={n}")
    if not oracle_mode and m >= n:
        raise DimensionError(f"dimensionality reduction needs m < n, got m={m}, n={n}")
    c = seeded_uniform_matrix(m, n, -config.init_scale, config.init_scale, config.seed)
    return WeightMatrix(c, oracle_mode=oracle_mode)


def _check_input(cw: WeightMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (cw.n_inputs,):
        raise ShapeError(f"input shape {x.shape} does not match N={cw.n_inputs}")
    return x


def gha_output(cw: WeightMatrix, x) -> np.ndarray:
    x = _check_input(cw, x)
    return np.array([dot(row, x) for row in cw.c])


def lower_triangular_of(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    return np.tril(a)


def row_update(c_row: np.ndarray, r_prev: np.ndarray, y: float, eta: float):
    """One link of the residual chain: returns ``(new_row, r, delta)``."""
    r = r_prev - y * c_row
    delta = (eta * y) * r
    return c_row + delta, r, delta


def _step(c: np.ndarray, x: np.ndarray, eta: float):
    ys = [dot(row, x) for row in c]
    new = np.empty_like(c)
    r = x
    sq = 0.0
    for i, y in enumerate(ys):
        new[i], r, delta = row_update(c[i], r, y, eta)
        sq += sumsq(delta)
    return new, sq


def gha_step(cw: WeightMatrix, x, eta: float) -> WeightMatrix:
    if not eta > 0:
        raise RateError(f"eta must be > 0, got {eta}")
    x = _check_input(cw, x)
    new, _ = _step(cw.c, x, eta)
    return WeightMatrix(new, oracle_mode=cw.oracle_mode)


def gha_step_matrix_form(cw: WeightMatrix, x, eta: float) -> WeightMatrix:
    """``C + eta * (y x^T - LT[y y^T] C)`` computed literally; a test oracle."""
    x = _check_input(cw, x)
    c = cw.c
    y = c @ x
    new = c + eta * (np.outer(y, x) - lower_triangular_of(np.outer(y, y)) @ c)
    return WeightMatrix(new, oracle_mode=cw.oracle_mode)


def eta_schedule(config: GhaConfig, t: int) -> float:
    """``eta0 / (1 + t / tau)``; ``config.tau`` must already be resolved."""
    if t < 0:
        raise ValueError(f"step index must be >= 0, got {t}")
    if config.tau is None:
        raise ValueError("tau is unresolved; call config.resolved(samples_per_epoch) first")
    return config.eta0 / (1.0 + t / config.tau)


def presentation_order(n_samples: int, config: GhaConfig, epoch: int) -> np.ndarray:
    """Dataset order, or a per-epoch seeded shuffle when ``shuffle_seed`` is set."""
    if config.shuffle_seed is None:
        return np.arange(n_samples)
    return SplitMix64(derive_seed(config.shuffle_seed, epoch)).permutation(n_samples)


def gha_train(
    cw: WeightMatrix,
    inputs,
    config: GhaConfig,
    on_epoch: Callable[[int, WeightMatrix], None] | None = None,
) -> tuple[WeightMatrix, TrainingTrace]:
    """Run Sanger's rule sample by sample for ``config.epochs`` epochs.

    ``on_epoch(epoch, weights)`` is called after each epoch; its runtime is
    excluded from the recorded wall-clock time.
    """
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDatasetError("no training inputs")
    if X.shape[1] != cw.n_inputs:
        raise ShapeError(f"inputs have {X.shape[1]} features, weights expect {cw.n_inputs}")
    cfg = config.resolved(X.shape[0])
    c = np.array(cw.c)
    trace = TrainingTrace()
    t = 0
    for e in range(cfg.epochs):
        start = time.perf_counter()
        total = 0.0
        for k in presentation_order(X.shape[0], cfg, e):
            eta = eta_schedule(cfg, t)
            c, sq = _step(c, X[k], eta)
            d = math.sqrt(sq)
            trace.steps.append((t, eta, d))
            total += d
            t += 1
        trace.epochs.append((e, total, time.perf_counter() - start))
        if on_epoch is not None:
            on_epoch(e, WeightMatrix(c, oracle_mode=cw.oracle_mode))
    return WeightMatrix(c, oracle_mode=cw.oracle_mode), trace
