"""Command-line entry point.

    temporal-ee gen-stream CONFIG [-o STREAM.jsonl] [--seed N]
    temporal-ee inspect MODEL.json
    temporal-ee run CONFIG [--output-dir DIR] [--seed N]
    temporal-ee sweep CONFIG [--output-dir DIR] [--seed N]
    temporal-ee suggest-grid CONFIG [--count N] [--exit I]

Set TEMPORAL_EE_LOG (e.g. DEBUG, INFO) to control log verbosity.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from .config import ExperimentConfig, build_stream, load_config
from .errors import ConfigError
from .evaluation import best_within, evaluate, exit_accuracies, suggest_grid, sweep
from .model import ExitGraph, load_model
from .output import write_csv, write_svg_scatter
from .policy import with_parameter
from .stream import write_stream

log = logging.getLogger("temporal_ee")


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "output_dir", None) is not None:
        cfg.output_dir = Path(args.output_dir)
    else:
        cfg.output_dir = cfg.base_dir / cfg.output_dir
    return cfg


def cmd_gen_stream(args) -> int:
    cfg = _load(args)
    if cfg.generator is None:
        raise ConfigError("generator: gen-stream needs a 'generator' section")
    samples = build_stream(cfg.generator, cfg.seed)
    out = Path(args.output) if args.output else cfg.output_dir / "stream.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_stream(samples, out)
    print(f"wrote {len(samples)} samples to {out}")
    return 0


def cmd_inspect(args) -> int:
    model = load_model(args.model)
    kind = "oracle" if not isinstance(model, ExitGraph) else "graph"
    print(f"model: {args.model} ({kind})")
    print(f"classes: {model.num_classes}  score_mode: {model.score_mode}  exits: {model.num_exits}")
    print(f"{'exit':>4} {'backbone':>10} {'branch':>10} {'cumulative':>12}")
    cumulative = model.cumulative_macs
    for i, total in enumerate(cumulative):
        if isinstance(model, ExitGraph):
            backbone, branch = model.segment_macs[i], model.exit_macs[i]
        else:
            backbone, branch = "-", "-"
        print(f"{i:>4} {backbone!s:>10} {branch!s:>10} {total:>12}")
    print(f"full early-exit cost: {cumulative[-1]}  single-exit reference: {model.single_exit_macs}")
    return 0


def _require_policies(cfg: ExperimentConfig) -> None:
    if not cfg.policies:
        raise ConfigError("policies: at least one policy is required")


def cmd_run(args) -> int:
    cfg = _load(args)
    _require_policies(cfg)
    model, stream = cfg.load_model(), cfg.load_stream()
    records = []
    for p in cfg.policies:
        config = with_parameter(p.name, p.config, p.thresholds[0])
        r = evaluate(model, stream, p.name, config)
        records.append(r)
        print(
            f"{p.label}: threshold={r.threshold:g} accuracy={r.accuracy:.4f} "
            f"mean_macs={r.mean_macs:.1f} relative_macs={r.relative_macs:.4f} scenes={r.num_scenes}"
        )
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    write_csv(records, cfg.output_dir / "run.csv")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    _require_policies(cfg)
    for p in cfg.policies:
        if not p.thresholds:
            raise ConfigError(f"{p.label}.thresholds: empty threshold grid")
    model, stream = cfg.load_model(), cfg.load_stream()
    reference = exit_accuracies(model, stream)[-1]
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    combined = []
    for p in cfg.policies:
        log.info("sweeping %s over %d values", p.label, len(p.thresholds))
        records = sweep(model, stream, p.name, p.config, p.thresholds, workers=args.workers)
        write_csv(records, cfg.output_dir / f"{p.label}.csv")
        write_svg_scatter(records, cfg.output_dir / f"{p.label}.svg", title=p.label)
        combined.extend(records)
        best = best_within(records, reference, cfg.reference_tolerance)
        if best is None:
            print(f"{p.label}: no configuration within {cfg.reference_tolerance:.0%} of reference accuracy {reference:.4f}")
        else:
            print(
                f"{p.label}: best threshold={best.threshold:g} accuracy={best.accuracy:.4f} "
                f"relative_macs={best.relative_macs:.4f} (reference accuracy {reference:.4f})"
            )
    write_csv(combined, cfg.output_dir / "sweep.csv")
    write_svg_scatter(combined, cfg.output_dir / "sweep.svg")
    return 0


def cmd_suggest_grid(args) -> int:
    cfg = _load(args)
    grid = suggest_grid(cfg.load_model(), cfg.load_stream(), args.count, args.exit)
    print(json.dumps([v if math.isfinite(v) else "inf" for v in grid]))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="temporal-ee", description="Early-exit termination policy experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-stream", help="generate a stream JSONL file from a config's generator")
    p.add_argument("config")
    p.add_argument("-o", "--output")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gen_stream)

    p = sub.add_parser("inspect", help="print per-exit MAC costs of a model")
    p.add_argument("model")
    p.set_defaults(func=cmd_inspect)

    for name, func, helptext in (
        ("run", cmd_run, "evaluate each policy at its first threshold"),
        ("sweep", cmd_sweep, "sweep each policy over its threshold grid"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config")
        p.add_argument("--output-dir")
        p.add_argument("--seed", type=int)
        if name == "sweep":
            p.add_argument("--workers", type=int, default=1)
        p.set_defaults(func=func)

    p = sub.add_parser("suggest-grid", help="threshold grid from exit-output distance percentiles")
    p.add_argument("config")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--exit", type=int, default=0)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_suggest_grid)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("TEMPORAL_EE_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
