"""Experiment grid runner and report rendering.

A grid is ``datasets x algorithms x splits x seeds x fabric modes``; each
cell loads, splits, standardizes, trains, evaluates and yields one
:class:`~hebgha.evaluation.MetricsRow`. Configuration is a JSON document
with the keys listed in :data:`CONFIG_KEYS`; unknown keys are rejected.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .core import HebGhaError, derive_seed
from .data import Dataset, SplitSpec, load_csv, split, standardize, synth_gaussian
from .evaluation import (
    MetricsRow,
    accuracy,
    avg_convergence_rate,
    energy_estimate,
    fit_centroids,
    format_percent,
    hebbian_classify,
    hebbian_error_rate,
    memory_estimate,
    nearest_centroid_classify,
    train_multiclass_hebbian,
)
from .fabric import Topology, run_distributed_gha, run_distributed_hebbian
from .rules import GhaConfig, gha_init, gha_train
from .spectral import (
    autocorrelation,
    jacobi_eigendecompose,
    reconstruction_error,
    row_alignment,
)

log = logging.getLogger(__name__)

ALGORITHMS = ("HA", "GHA")
FABRIC_MODES = ("reference", "simulated-fabric")
FORMATS = ("csv", "markdown")

CONFIG_KEYS = {
    "datasets": "list of dataset entries (required)",
    "algorithms": 'subset of ["HA", "GHA"]',
    "splits": "train fractions, e.g. [0.7, 0.5, 0.8, 0.3]",
    "seeds": "split seeds; model seeds are derived from them",
    "gha": "object with m, eta0, tau, epochs, init_scale",
    "ha_epochs": "epochs for the Hebbian trainer",
    "fabric_modes": 'subset of ["reference", "simulated-fabric"]',
    "topology": 'simulated torus as "WxHxC"',
    "out_dir": "output directory (relative to the config file)",
    "formats": 'subset of ["csv", "markdown"]',
}
DATASET_KEYS = {"name", "path", "label_column", "has_header", "synthetic", "standardize"}
SYNTH_KEYS = {"n_samples", "eigenvalues", "seed"}
GHA_KEYS = {"m", "eta0", "tau", "epochs", "init_scale"}

CSV_COLUMNS = [f.name for f in dataclasses.fields(MetricsRow) if f.name != "extra"]
WALL_CLOCK_COLUMNS = ("training_time",)


class ConfigError(HebGhaError, ValueError):
    pass


@dataclass(frozen=True)
class DatasetSource:
    name: str
    path: str | None = None
    label_column: object = 0
    has_header: bool = False
    synthetic: dict | None = None
    standardize: bool = True

    def load(self) -> Dataset:
        if self.synthetic is not None:
            s = self.synthetic
            ds = synth_gaussian(int(s["n_samples"]), s["eigenvalues"], int(s.get("seed", 0)))
            return dataclasses.replace(ds, name=self.name)
        return load_csv(self.path, self.label_column, self.has_header, name=self.name)


@dataclass
class ExperimentConfig:
    datasets: list
    algorithms: tuple = ALGORITHMS
    splits: tuple = (0.7,)
    seeds: tuple = (0,)
    gha_m: int = 3
    gha: GhaConfig = field(default_factory=GhaConfig)
    ha_epochs: int = 1
    fabric_modes: tuple = ("reference",)
    topology: str = "3x3x18"
    out_dir: str = "results"
    formats: tuple = FORMATS
    raw: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.datasets:
            raise ConfigError("at least one dataset is required")
        for name, allowed in (
            ("algorithms", ALGORITHMS),
            ("fabric_modes", FABRIC_MODES),
            ("formats", FORMATS),
        ):
            values = getattr(self, name)
            if not values:
                raise ConfigError(f"{name} must not be empty")
            bad = [v for v in values if v not in allowed]
            if bad:
                raise ConfigError(f"{name}: unknown values {bad}; allowed {list(allowed)}")
        if not self.splits or not self.seeds:
            raise ConfigError("need at least one split and one seed")
        for f in self.splits:
            if not 0 < f < 1:
                raise ConfigError(f"split fraction {f} outside (0, 1)")
        try:
            Topology.parse(self.topology)
        except (ValueError, HebGhaError) as exc:
            raise ConfigError(str(exc)) from None

    @property
    def hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def cells(self) -> list:
        """Grid cells in report order: dataset, algorithm, split, seed, fabric mode."""
        return [
            (d, a, s, seed, mode)
            for d in range(len(self.datasets))
            for a in self.algorithms
            for s in self.splits
            for seed in self.seeds
            for mode in self.fabric_modes
        ]


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}; allowed {sorted(allowed)}")


def parse_config(doc: dict, base_dir: str = ".") -> ExperimentConfig:
    _check_keys(doc, CONFIG_KEYS, "config")
    if "datasets" not in doc:
        raise ConfigError("config: 'datasets' is required")
    sources = []
    for i, entry in enumerate(doc["datasets"]):
        _check_keys(entry, DATASET_KEYS, f"datasets[{i}]")
        synth = entry.get("synthetic")
        if synth is not None:
            _check_keys(synth, SYNTH_KEYS, f"datasets[{i}].synthetic")
            if "n_samples" not in synth or "eigenvalues" not in synth:
                raise ConfigError(f"datasets[{i}].synthetic needs n_samples and eigenvalues")
        elif "path" not in entry:
            raise ConfigError(f"datasets[{i}] needs either 'path' or 'synthetic'")
        path = entry.get("path")
        if path is not None and not os.path.isabs(path):
            path = os.path.normpath(os.path.join(base_dir, path))
        name = entry.get("name") or (
            os.path.splitext(os.path.basename(path))[0] if path else f"synthetic{i}"
        )
        sources.append(
            DatasetSource(
                name=name,
                path=path,
                label_column=entry.get("label_column", 0),
                has_header=bool(entry.get("has_header", False)),
                synthetic=synth,
                standardize=bool(entry.get("standardize", synth is None)),
            )
        )
    gha = dict(doc.get("gha", {}))
    _check_keys(gha, GHA_KEYS, "gha")
    m = int(gha.pop("m", 3))
    try:
        gha_cfg = GhaConfig(**gha)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"gha: {exc}") from None
    out_dir = doc.get("out_dir", "results")
    if not os.path.isabs(out_dir):
        out_dir = os.path.normpath(os.path.join(base_dir, out_dir))
    return ExperimentConfig(
        datasets=sources,
        algorithms=tuple(doc.get("algorithms", ALGORITHMS)),
        splits=tuple(float(s) for s in doc.get("splits", (0.7,))),
        seeds=tuple(int(s) for s in doc.get("seeds", (0,))),
        gha_m=m,
        gha=gha_cfg,
        ha_epochs=int(doc.get("ha_epochs", 1)),
        fabric_modes=tuple(doc.get("fabric_modes", ("reference",))),
        topology=str(doc.get("topology", "3x3x18")),
        out_dir=out_dir,
        formats=tuple(doc.get("formats", FORMATS)),
        raw=doc,
    )


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return parse_config(doc, os.path.dirname(os.path.abspath(path)))


# -- running -----------------------------------------------------------------


@dataclass
class CellResult:
    row: MetricsRow
    weights: np.ndarray | None = None
    biases: np.ndarray | None = None
    trace: object = None
    epoch_errors: list = field(default_factory=list)


def _prepare(config: ExperimentConfig, d: int, frac: float, seed: int):
    src = config.datasets[d]
    ds = src.load()
    train, test = split(ds, SplitSpec(frac, seed))
    if src.standardize:
        train, test, _ = standardize(train, test)
    return src, train, test


def run_cell(config: ExperimentConfig, index: int, track_epochs: bool = False) -> CellResult:
    """Run grid cell ``index`` (see :meth:`ExperimentConfig.cells`)."""
    d, algo, frac, seed, mode = config.cells()[index]
    src, train, test = _prepare(config, d, frac, seed)
    row = MetricsRow(src.name, algo, mode, frac, seed, len(train), len(test))
    topo = Topology.parse(config.topology)
    if algo == "GHA":
        return _run_gha(config, row, train, test, seed, topo, track_epochs)
    return _run_ha(config, row, train, test, topo)


def _run_gha(config, row, train, test, seed, topo, track_epochs):
    cfg = dataclasses.replace(config.gha, seed=derive_seed(seed, 1))
    m = config.gha_m
    init = gha_init(m, train.dim, cfg)
    errors = []
    hook_seconds = [0.0]
    hook = None
    if track_epochs:

        def hook(epoch, cw):
            t0 = time.perf_counter()
            errors.append(reconstruction_error(cw, train.x))
            hook_seconds[0] += time.perf_counter() - t0

    start = time.perf_counter()
    if row.fabric_mode == "reference":
        cw, trace = gha_train(init, train.x, cfg, on_epoch=hook)
        stats = None
    else:
        cw, trace, stats = run_distributed_gha(train.x, cfg, topo, m, initial=init, on_epoch=hook)
    row.training_time = time.perf_counter() - start - hook_seconds[0]
    row.error_rate = reconstruction_error(cw, test.x)
    row.memory_usage = memory_estimate("GHA", m=m, n=train.dim)
    row.avg_convergence_rate = avg_convergence_rate(trace)
    if stats is not None:
        row.connection_events = stats.connection_events
        row.energy = energy_estimate(stats.connection_events)
    basis = jacobi_eigendecompose(autocorrelation(train.x))
    row.min_alignment = float(np.min(row_alignment(cw, basis)))
    if train.classes >= 2:
        proj_train = train.x @ cw.c.T
        cc = fit_centroids(list(zip(proj_train, train.labels)), train.classes)
        preds = [nearest_centroid_classify(cc, y) for y in test.x @ cw.c.T]
        row.classification_accuracy = accuracy(preds, test.labels)
    return CellResult(row, weights=np.array(cw.c), trace=trace, epoch_errors=errors)


def _run_ha(config, row, train, test, topo):
    start = time.perf_counter()
    if row.fabric_mode == "reference":
        model, trace = train_multiclass_hebbian(train, config.ha_epochs)
        stats = None
    else:
        model, trace, stats = run_distributed_hebbian(
            train.x, train.labels, train.classes, config.ha_epochs, topo
        )
    row.training_time = time.perf_counter() - start
    row.error_rate = hebbian_error_rate(model, test.x)
    row.memory_usage = memory_estimate("HA", n=train.dim, classes=train.classes)
    row.avg_convergence_rate = avg_convergence_rate(trace)
    if stats is not None:
        row.connection_events = stats.connection_events
        row.energy = energy_estimate(stats.connection_events)
    preds = [hebbian_classify(model, x) for x in test.x]
    row.classification_accuracy = accuracy(preds, test.labels)
    return CellResult(row, weights=model.weights, biases=model.biases, trace=trace)


@dataclass
class Report:
    rows: list
    failures: list = field(default_factory=list)  # (cell index, cell description, message)
    metadata: dict = field(default_factory=dict)


def _cell_label(config, cell) -> str:
    d, algo, frac, seed, mode = cell
    return f"{config.datasets[d].name}/{algo}/split={frac:g}/seed={seed}/{mode}"


def _safe_cell(config, index):
    try:
        return index, run_cell(config, index).row, None
    except (HebGhaError, OSError, ValueError) as exc:
        return index, None, f"{type(exc).__name__}: {exc}"


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> Report:
    """Run every grid cell; failures are collected, not raised."""
    started = datetime.now(timezone.utc).isoformat()
    cells = config.cells()
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_safe_cell, [config] * len(cells), range(len(cells))))
    else:
        results = [_safe_cell(config, i) for i in range(len(cells))]
    rows, failures = [], []
    for index, row, err in sorted(results, key=lambda r: r[0]):
        if err is None:
            rows.append(row)
        else:
            label = _cell_label(config, cells[index])
            log.error("cell %d (%s) failed: %s", index, label, err)
            failures.append((index, label, err))
    meta = {
        "version": __version__,
        "config_hash": config.hash,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "cells": len(cells),
        "failures": [{"cell": i, "label": lab, "error": e} for i, lab, e in failures],
    }
    return Report(rows, failures, meta)


# -- rendering ---------------------------------------------------------------


def _csv_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_csv_value(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


_INT_COLUMNS = {"seed", "train_size", "test_size", "memory_usage", "connection_events"}
_STR_COLUMNS = {"dataset", "algorithm", "fabric_mode", "status"}


def read_csv_rows(path: str) -> list:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            kw = {}
            for col in CSV_COLUMNS:
                raw = rec.get(col, "")
                if col in _STR_COLUMNS:
                    kw[col] = raw
                elif raw == "":
                    kw[col] = None
                elif col in _INT_COLUMNS:
                    kw[col] = int(raw)
                else:
                    kw[col] = float(raw)
            rows.append(MetricsRow(**kw))
    return rows


def _fmt(v, digits=2) -> str:
    return "" if v is None else f"{v:.{digits}f}"


def _col_label(algo, mode) -> str:
    return f"{algo} {'with fabric' if mode == 'simulated-fabric' else 'without fabric'}"


def render_markdown(rows) -> str:
    """Two table families: metric-per-row comparisons and dataset-per-row accuracy/energy."""
    out = []
    groups = {}
    for r in rows:
        groups.setdefault((r.dataset, r.split, r.seed), []).append(r)
    out.append("## Quantitative analysis\n")
    for (ds, frac, seed), rs in groups.items():
        cols = sorted({(r.algorithm, r.fabric_mode) for r in rs},
                      key=lambda c: (ALGORITHMS.index(c[0]), -FABRIC_MODES.index(c[1])))
        by = {(r.algorithm, r.fabric_mode): r for r in rs}
        out.append(f"### {ds}, train {round(frac * 100)}% / test {round((1 - frac) * 100)}%, seed {seed}\n")
        out.append("| Metric | " + " | ".join(_col_label(*c) for c in cols) + " |")
        out.append("|---" * (len(cols) + 1) + "|")
        metrics = [
            ("Error Rate (%)", lambda r: format_percent(r.error_rate)),
            ("Training Time (sec)", lambda r: _fmt(r.training_time)),
            ("Memory Usage (KB)", lambda r: _fmt(None if r.memory_usage is None else r.memory_usage / 1024)),
            ("Average Convergence Rate", lambda r: _fmt(r.avg_convergence_rate, 5)),
            ("Classification Accuracy (%)", lambda r: format_percent(r.classification_accuracy)),
        ]
        for label, fn in metrics:
            out.append(f"| {label} | " + " | ".join(fn(by[c]) for c in cols) + " |")
        out.append("")

    out.append("## Classification accuracy and energy\n")
    tables = {}
    for r in rows:
        tables.setdefault((r.algorithm, r.split, r.seed), {}).setdefault(r.dataset, {})[r.fabric_mode] = r
    for (algo, frac, seed), by_ds in tables.items():
        out.append(
            f"### {algo}, train {round(frac * 100)}% / test {round((1 - frac) * 100)}%, seed {seed}\n"
        )
        out.append("| Dataset | Accuracy with fabric (%) | Accuracy without fabric (%) "
                   "| Energy with fabric (J) | Energy without fabric (J) |")
        out.append("|---|---|---|---|---|")
        for ds, modes in by_ds.items():
            fab = modes.get("simulated-fabric")
            ref = modes.get("reference")
            out.append(
                f"| {ds} | {format_percent(fab.classification_accuracy) if fab else ''} "
                f"| {format_percent(ref.classification_accuracy) if ref else ''} "
                f"| {_energy(fab)} | {_energy(ref)} |"
            )
        out.append("")
    return "\n".join(out)


def _energy(r) -> str:
    return "" if r is None or r.energy is None else f"{r.energy:.6g}"


def emit_report(report: Report, fmt: str, out_dir: str, stem: str = "results") -> str:
    """Write ``report`` as ``<stem>.csv`` or ``<stem>.md``; returns the path."""
    if not report.rows:
        raise ValueError("report has no rows")
    os.makedirs(out_dir, exist_ok=True)
    if fmt == "csv":
        path, text = os.path.join(out_dir, f"{stem}.csv"), render_csv(report.rows)
    elif fmt == "markdown":
        path, text = os.path.join(out_dir, f"{stem}.md"), render_markdown(report.rows)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def write_metadata(report: Report, out_dir: str, stem: str = "results") -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{stem}.meta.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_trace_csv(result: CellResult, path: str) -> None:
    """Per-epoch plot data: summed delta norm, seconds, train reconstruction error."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "summed_delta_norm", "seconds", "reconstruction_error"])
        for i, (e, total, secs) in enumerate(result.trace.epochs):
            err = result.epoch_errors[i] if i < len(result.epoch_errors) else None
            w.writerow([e, repr(total), repr(secs), _csv_value(err)])
