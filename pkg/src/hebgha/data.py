"""Dataset ingestion, splitting, standardization and synthetic data."""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .core import DimensionError, HebGhaError, SplitMix64

__all__ = [
    "STANDARD_SPLITS",
    "Dataset",
    "LabeledSample",
    "LoadError",
    "MissingFileError",
    "MissingLabelColumnError",
    "NoUsableRowsError",
    "RaggedRowError",
    "SpectrumError",
    "SplitError",
    "SplitSpec",
    "Standardizer",
    "load_csv",
    "split",
    "standardize",
    "synth_gaussian",
]

log = logging.getLogger(__name__)

#: train fractions of the 70/30, 50/50, 80/20 and 30/70 protocol
STANDARD_SPLITS = (0.7, 0.5, 0.8, 0.3)


class LoadError(HebGhaError):
    pass


class MissingFileError(LoadError, FileNotFoundError):
    pass


class MissingLabelColumnError(LoadError, KeyError):
    pass


class NoUsableRowsError(LoadError, ValueError):
    pass


class RaggedRowError(LoadError, ValueError):
    pass


class SplitError(HebGhaError, ValueError):
    pass


class SpectrumError(HebGhaError, ValueError):
    pass


class LabeledSample(NamedTuple):
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``x`` (samples x dim) with dense integer labels."""

    name: str
    x: np.ndarray
    labels: np.ndarray
    classes: int
    provenance: str = ""
    label_names: tuple = ()
    planted_basis: np.ndarray | None = None
    diagnostics: tuple = ()

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or x.shape[1] < 1:
            raise DimensionError(f"feature matrix must be 2-D with dim >= 1, got {x.shape}")
        if labels.shape != (x.shape[0],):
            raise DimensionError("one label per sample required")
        if labels.size and (labels.min() < 0 or labels.max() >= self.classes):
            raise ValueError(f"labels must lie in [0, {self.classes})")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def __len__(self) -> int:
        return self.x.shape[0]

    def __iter__(self):
        for row, label in zip(self.x, self.labels):
            yield LabeledSample(row, int(label))

    def subset(self, idx, suffix: str = "") -> Dataset:
        idx = np.asarray(idx, dtype=np.int64)
        return replace(
            self,
            x=self.x[idx],
            labels=self.labels[idx],
            provenance=self.provenance + suffix,
        )


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise SplitError(f"train fraction must lie in (0, 1), got {self.train_fraction}")

    def sizes(self, n: int) -> tuple[int, int]:
        n_train = math.floor(self.train_fraction * n)
        if n_train < 1 or n - n_train < 1:
            raise SplitError(
                f"fraction {self.train_fraction} of {n} samples leaves an empty part"
            )
        return n_train, n - n_train


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray
    degenerate: np.ndarray = field(default=None)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        safe = np.where(self.degenerate, 1.0, self.std)
        out = (x - self.mean) / safe
        out[..., self.degenerate] = 0.0
        return out


def _resolve_label_column(label_column, header, width) -> int:
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if header is None:
            raise MissingLabelColumnError(
                f"label column {label_column!r} given by name but the file has no header"
            )
        names = [h.strip() for h in header]
        if label_column not in names:
            raise MissingLabelColumnError(f"label column {label_column!r} not in header {names}")
        return names.index(label_column)
    idx = int(label_column)
    if idx < 0:
        idx += width
    if not 0 <= idx < width:
        raise MissingLabelColumnError(f"label column index {label_column} out of range for {width} columns")
    return idx


def load_csv(
    path: str | os.PathLike,
    label_column: str | int = 0,
    has_header: bool = False,
    name: str | None = None,
) -> Dataset:
    """Read a comma-separated file into a :class:`Dataset`.

    Every column except ``label_column`` must be numeric. Rows with a
    non-numeric feature are dropped and reported in ``diagnostics`` with their
    1-based line number; rows of the wrong width raise :class:`RaggedRowError`.
    Labels become dense ids in order of first appearance.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if any(c.strip() for c in r)]
    header = None
    if has_header and rows:
        header = rows[0][1]
        rows = rows[1:]
    if not rows:
        raise NoUsableRowsError(f"{path}: no data rows")
    width = len(header) if header is not None else len(rows[0][1])
    label_idx = _resolve_label_column(label_column, header, width)

    feats, raw_labels, diags = [], [], []
    for line, row in rows:
        if len(row) != width:
            raise RaggedRowError(f"{path}:{line}: expected {width} fields, found {len(row)}")
        try:
            vals = [float(c.strip()) for j, c in enumerate(row) if j != label_idx]
        except ValueError:
            diags.append(f"line {line}: non-numeric feature value, row skipped")
            continue
        if not all(math.isfinite(v) for v in vals):
            diags.append(f"line {line}: non-finite feature value, row skipped")
            continue
        feats.append(vals)
        raw_labels.append(row[label_idx].strip())
    if not feats:
        raise NoUsableRowsError(f"{path}: no usable rows ({len(diags)} rejected)")
    if width < 2:
        raise DimensionError(f"{path}: need at least one feature column besides the label")
    for d in diags:
        log.warning("%s: %s", path, d)

    ids: dict[str, int] = {}
    labels = [ids.setdefault(lab, len(ids)) for lab in raw_labels]
    log.info("%s: %d rows, %d features, %d classes", path, len(feats), width - 1, len(ids))
    return Dataset(
        name=name or os.path.splitext(os.path.basename(path))[0],
        x=np.array(feats),
        labels=np.array(labels),
        classes=len(ids),
        provenance=path,
        label_names=tuple(ids),
        diagnostics=tuple(diags),
    )


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    n_train, _ = spec.sizes(len(ds))
    perm = SplitMix64(spec.seed).permutation(len(ds))
    tag = f" [split {spec.train_fraction:g} seed {spec.seed}]"
    return ds.subset(perm[:n_train], tag + " train"), ds.subset(perm[n_train:], tag + " test")


def standardize(train: Dataset, test: Dataset) -> tuple[Dataset, Dataset, Standardizer]:
    """Z-score both parts with the training part's mean and population std."""
    if train.dim != test.dim:
        raise DimensionError(f"train dim {train.dim} != test dim {test.dim}")
    mean = train.x.mean(axis=0)
    std = train.x.std(axis=0)
    degenerate = std == 0.0
    if degenerate.any():
        log.warning("%s: zero-variance features %s mapped to 0", train.name, np.flatnonzero(degenerate))
    st = Standardizer(mean, std, degenerate)
    return replace(train, x=st.apply(train.x)), replace(test, x=st.apply(test.x)), st


def synth_gaussian(n_samples: int, eigenvalues, seed: int) -> Dataset:
    """Zero-mean Gaussian samples whose covariance has the given spectrum.

    The eigenbasis is a seeded random rotation (QR of a Gaussian matrix with
    the sign of R's diagonal folded into Q); it is kept as ``planted_basis``,
    one eigenvector per row in the order of ``eigenvalues``.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if lam.ndim != 1 or lam.size < 1:
        raise SpectrumError("need a non-empty 1-D spectrum")
    if np.any(lam <= 0) or np.any(np.diff(lam) >= 0):
        raise SpectrumError(f"eigenvalues must be positive and strictly descending, got {lam}")
    if n_samples < 1:
        raise DimensionError("n_samples must be >= 1")
    n = lam.size
    rng = SplitMix64(seed)
    g = rng.normal(n * n).reshape(n, n)
    qm, r = np.linalg.qr(g)
    qm = qm * np.where(np.diag(r) < 0, -1.0, 1.0)
    basis = qm.T
    z = rng.normal(n_samples * n).reshape(n_samples, n)
    x = (z * np.sqrt(lam)) @ basis
    return Dataset(
        name=f"synth{n}",
        x=x,
        labels=np.zeros(n_samples, dtype=np.int64),
        classes=1,
        provenance=f"synth_gaussian(n_samples={n_samples}, eigenvalues={lam.tolist()}, seed={seed})",
        planted_basis=basis,
    )
