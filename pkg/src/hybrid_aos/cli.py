"""Command line: ``hf-aos {train,run,compare,bench}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .benchmarks import REGISTRY, list_functions
from .core import HfAosError
from .harness import ExperimentConfig, offline_train, read_trials, run_experiment, write_comparison


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config)
    if args.instance:
        # Solomon files given on the command line replace the configured problems
        cfg.domain = "cvrptw"
        cfg.problems = list(args.instance)
    return cfg


def _train(args) -> int:
    cfg = _load_config(args)
    loss_csv = args.loss_csv or str(Path(args.out).with_suffix("")) + "_loss.csv"
    offline_train(cfg, args.out, loss_csv)
    print(f"model written to {args.out}; training loss in {loss_csv}")
    return 0


def _run(args) -> int:
    cfg = _load_config(args)
    if args.model:
        cfg.model_path = args.model
    out = args.out or cfg.output_dir
    results = run_experiment(cfg, out, workers=args.workers)
    print(f"{len(results)} trials written to {Path(out) / 'trials.csv'}")
    print((Path(out) / "comparison.txt").read_text(), end="")
    return 0


def _compare(args) -> int:
    results = read_trials(args.results)
    out = Path(args.out or Path(args.results).parent)
    out.mkdir(parents=True, exist_ok=True)
    modes = args.modes.split(",") if args.modes else None
    write_comparison(results, out, modes, args.alpha)
    print((out / "comparison.txt").read_text(), end="")
    return 0


def _bench(args) -> int:
    for name in list_functions():
        e = REGISTRY[name]
        print(f"{name:16s} bounds [{e.lo:g}, {e.hi:g}]  min dim {e.min_dim}  argmin {e.argmin:g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hf-aos", description="Hybrid adaptive operator selection experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="offline-train the state-based model")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True, help="model file (JSON)")
    t.add_argument("--loss-csv", help="training loss CSV (default: <out>_loss.csv)")
    t.add_argument("--instance", action="append", help="Solomon instance file (repeatable; implies cvrptw)")
    t.set_defaults(func=_train)

    r = sub.add_parser("run", help="evaluate AOS modes over many trials")
    r.add_argument("--config", required=True)
    r.add_argument("--model", help="overrides model_path from the config")
    r.add_argument("--out", help="output directory (default: output_dir from the config)")
    r.add_argument("--workers", type=int, help="worker processes (default: HF_AOS_THREADS or CPU count)")
    r.add_argument("--instance", action="append", help="Solomon instance file (repeatable; implies cvrptw)")
    r.set_defaults(func=_run)

    c = sub.add_parser("compare", help="Wilcoxon comparison table from trials.csv")
    c.add_argument("--results", required=True)
    c.add_argument("--out")
    c.add_argument("--modes", help="comma-separated mode order")
    c.add_argument("--alpha", type=float, default=0.05)
    c.set_defaults(func=_compare)

    b = sub.add_parser("bench", help="benchmark function registry")
    b.add_argument("action", choices=["list"])
    b.set_defaults(func=_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except HfAosError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
