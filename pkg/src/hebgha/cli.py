"""``hebgha`` command line: bench, train, simulate, report.

Exit codes: 0 success, 1 some grid cells failed, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .bench import (
    ConfigError,
    Report,
    emit_report,
    load_config,
    read_csv_rows,
    render_markdown,
    run_cell,
    run_experiment,
    write_metadata,
    write_trace_csv,
)
from .core import HebGhaError, SplitMix64
from .data import synth_gaussian
from .evaluation import energy_estimate
from .fabric import AerPacket, Fabric, Topology, run_distributed_gha, source_key
from .rules import GhaConfig

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2


def _formats(text):
    fmts = tuple(f.strip() for f in text.split(",") if f.strip())
    for f in fmts:
        if f not in ("csv", "markdown"):
            raise argparse.ArgumentTypeError(f"unknown format {f!r}")
    return fmts


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    out_dir = args.out or cfg.out_dir
    formats = args.format or cfg.formats
    report = run_experiment(cfg, jobs=args.jobs)
    if report.rows:
        for fmt in formats:
            print(emit_report(report, fmt, out_dir))
    print(write_metadata(report, out_dir))
    for index, label, err in report.failures:
        print(f"cell {index} ({label}) failed: {err}", file=sys.stderr)
    return EXIT_PARTIAL if report.failures else EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    cells = cfg.cells()
    if not 0 <= args.cell < len(cells):
        raise ConfigError(f"cell index {args.cell} outside 0..{len(cells) - 1}")
    out_dir = args.out or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    try:
        result = run_cell(cfg, args.cell, track_epochs=True)
    except (HebGhaError, OSError, ValueError) as exc:
        print(f"cell {args.cell} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    stem = f"cell{args.cell:03d}"
    model = {"row": {k: v for k, v in vars(result.row).items() if k != "extra"}}
    model["weights"] = result.weights.tolist()
    if result.biases is not None:
        model["biases"] = result.biases.tolist()
    model_path = os.path.join(out_dir, f"{stem}_model.json")
    with open(model_path, "w", encoding="utf-8") as fh:
        json.dump(model, fh, indent=2)
    trace_path = os.path.join(out_dir, f"{stem}_trace.csv")
    write_trace_csv(result, trace_path)
    print(model_path)
    print(trace_path)
    return EXIT_OK


def cmd_simulate(args) -> int:
    topo = Topology.parse(args.topology)
    trace = open(args.trace, "w", encoding="utf-8") if args.trace else None  # noqa: SIM115
    try:
        if args.scenario == "broadcast":
            fabric = Fabric(topo, trace=trace)
            cores = list(range(topo.total_cores))
            rng = SplitMix64(args.seed)
            fabric.program_multicast(0, cores)
            fabric.inject(AerPacket(source_key(0)), 0)
            for src in range(1, min(topo.total_cores, args.packets)):
                k = 1 + rng.below(min(3, topo.total_cores))
                dests = sorted({rng.below(topo.total_cores) for _ in range(k)})
                fabric.program_multicast(src, dests)
                fabric.inject(AerPacket(source_key(src)), src)
            fabric.run()
            stats = fabric.stats
        else:
            m = min(3, topo.total_cores)
            ds = synth_gaussian(args.packets, [8, 4, 2, 1, 0.5, 0.25, 0.125, 0.0625], args.seed)
            _, _, stats = run_distributed_gha(ds.x, GhaConfig(epochs=1), topo, m, trace=trace)
    finally:
        if trace is not None:
            trace.close()
    print(f"topology        {topo.width}x{topo.height}x{topo.cores_per_node}")
    print(f"packets         {stats.packets_injected}")
    print(f"link traversals {stats.link_traversals}")
    print(f"deliveries      {stats.deliveries}")
    print(f"dropped         {stats.dropped}")
    print(f"max hops        {stats.max_hops}")
    print(f"energy (J)      {energy_estimate(stats.deliveries):.6g}")
    return EXIT_OK


def cmd_report(args) -> int:
    rows = read_csv_rows(args.input)
    if args.out:
        for fmt in args.format:
            print(emit_report(Report(rows), fmt, args.out))
    else:
        sys.stdout.write(render_markdown(rows) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hebgha", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run the full experiment grid")
    b.add_argument("--config", required=True)
    b.add_argument("--out")
    b.add_argument("--format", type=_formats)
    b.add_argument("--jobs", type=int, default=1)
    b.set_defaults(func=cmd_bench)

    t = sub.add_parser("train", help="run one grid cell, write model and trace")
    t.add_argument("--config", required=True)
    t.add_argument("--cell", type=int, required=True)
    t.add_argument("--out")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("simulate", help="fabric-only scenarios with packet trace")
    s.add_argument("--topology", default="3x3x2", help="WxHxC")
    s.add_argument("--trace")
    s.add_argument("--scenario", choices=("broadcast", "gha"), default="broadcast")
    s.add_argument("--packets", type=int, default=16, help="multicast sources or GHA samples")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="re-render a stored results CSV")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--format", type=_formats, default=("markdown",))
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        if args.command == "simulate":
            print(f"invalid arguments: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        raise


if __name__ == "__main__":
    sys.exit(main())
