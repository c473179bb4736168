"""Command-line entry point for the learned-optimizer toolkit."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from typing import Optional, Sequence

from config.files import FileConfig, load_config_file
from core.errors import ConfigurationError, L2SError, NumericalError
from harness.commands import cmd_compare, cmd_gen, cmd_meta_train, cmd_optimize, cmd_swap_study
from harness.context import AppContext, get_app_context
from harness.run_config import OPTIMIZER_CHOICES
from l2s.config import MODEL_PRESETS, L2SConfig
from logs.logger import setup_logger
from meta.config import META_PRESETS, MetaConfig
from optim.groups import GROUP_NAMES

logger = logging.getLogger("L2S")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--optimizer", choices=OPTIMIZER_CHOICES)
    parser.add_argument("--iterations", type=int)
    parser.add_argument("--cadence", type=_int_list, help="comma-separated evaluation iterations")
    parser.add_argument("--views", choices=("fixed-all", "fps-8"))
    parser.add_argument("--model", help="trained l2s model file")
    parser.add_argument("--lo-model", help="trained lo-baseline model file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="run_l2s", description="Learned optimizer for Gaussian splatting.")
    parser.add_argument("--seed", type=int, help="global seed (default from L2S_SEED)")
    parser.add_argument("--config", help="YAML config file with meta/model/optimizer/run/scene sections")
    parser.add_argument("--threads", type=int, help="worker threads (default from L2S_THREADS)")
    parser.add_argument("--deterministic", action="store_true", help="single-threaded, bit-reproducible runs")
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    parser.add_argument("--quiet", action="store_true", help="no progress bars")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="generate synthetic scenes")
    gen.add_argument("--out", required=True)
    gen.add_argument("--count", type=int, default=1)

    train = commands.add_parser("meta-train", help="meta-train a learned optimizer")
    train.add_argument("--out", required=True, help="model file to write")
    train.add_argument("--scenes", help="directory of scene containers (default: synthetic pool)")
    train.add_argument("--synthetic-count", type=int, default=200)
    train.add_argument("--preset", choices=sorted(META_PRESETS), help="trainer preset")
    train.add_argument("--model-preset", choices=sorted(MODEL_PRESETS))
    train.add_argument("--iterations", type=int)
    train.add_argument("--resume", help="model file to continue from")
    train.add_argument("--metrics", help="metrics CSV (default: next to the model)")

    optimize = commands.add_parser("optimize", help="optimize one scene and log metrics")
    optimize.add_argument("--scene", required=True)
    optimize.add_argument("--out", required=True)
    _run_flags(optimize)
    optimize.add_argument("--freeze", nargs="+", choices=GROUP_NAMES, default=None)
    optimize.add_argument("--only", nargs="+", choices=GROUP_NAMES, default=None)

    comp = commands.add_parser("compare", help="compare optimizers over scenes")
    comp.add_argument("--scenes", nargs="+", required=True)
    comp.add_argument("--methods", nargs="+", choices=OPTIMIZER_CHOICES, required=True)
    comp.add_argument("--reference", choices=OPTIMIZER_CHOICES, required=True)
    comp.add_argument("--out", required=True)
    _run_flags(comp)

    swap = commands.add_parser("swap-study", help="swap one parameter group's updates between optimizers")
    swap.add_argument("--scene", required=True)
    swap.add_argument("--group", choices=GROUP_NAMES, required=True)
    swap.add_argument("--source", choices=OPTIMIZER_CHOICES, required=True)
    swap.add_argument("--target", choices=OPTIMIZER_CHOICES, required=True)
    swap.add_argument("--out", required=True)
    _run_flags(swap)
    return parser


def apply_overrides(args: argparse.Namespace, context: AppContext, files: FileConfig) -> tuple[AppContext, FileConfig]:
    """CLI flags win over the config file, which wins over the environment."""
    threads = 1 if args.deterministic else args.threads
    config = context.config.with_overrides(
        seed=args.seed, threads=threads, deterministic=True if args.deterministic else None
    )
    run_changes = {
        key: value
        for key, value in (
            ("optimizer", getattr(args, "optimizer", None)),
            ("iterations", getattr(args, "iterations", None) if args.command != "meta-train" else None),
            ("cadence", getattr(args, "cadence", None)),
            ("views", getattr(args, "views", None)),
            ("freeze", getattr(args, "freeze", None)),
            ("only", getattr(args, "only", None)),
            ("seed", args.seed),
        )
        if value is not None
    }
    files = dataclasses.replace(files, run=dataclasses.replace(files.run, **run_changes))
    if args.command == "meta-train":
        meta = files.meta
        if args.preset:
            meta = MetaConfig.from_mapping({"preset": args.preset})
        if args.iterations is not None:
            meta = dataclasses.replace(meta, iterations=args.iterations)
        model = files.model
        if args.model_preset:
            model = L2SConfig.from_mapping({"preset": args.model_preset})
        files = dataclasses.replace(files, meta=meta, model=model)
    return dataclasses.replace(context, config=config), files


def dispatch(args: argparse.Namespace, context: AppContext, files: FileConfig) -> None:
    if args.command == "gen":
        cmd_gen(files.scene, context.config.seed, args.out, args.count)
    elif args.command == "meta-train":
        cmd_meta_train(context, files, args.out, args.scenes, args.synthetic_count, args.resume, args.metrics,
                       progress=not args.quiet and sys.stderr.isatty())
    elif args.command == "optimize":
        cmd_optimize(context, files, args.scene, args.out, args.model, args.lo_model)
    elif args.command == "compare":
        cmd_compare(context, files, args.scenes, args.methods, args.reference, args.out, args.model, args.lo_model)
    elif args.command == "swap-study":
        cmd_swap_study(context, files, args.scene, args.group, args.source, args.target, args.out, args.model,
                       args.lo_model)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one CLI verb; returns the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        context = get_app_context()
        if args.verbose:
            setup_logger(level="DEBUG")
        context, files = apply_overrides(args, context, load_config_file(args.config))
        dispatch(args, context, files)
    except ConfigurationError as exc:
        logger.error("Configuration error: %s", exc)
        return EXIT_CONFIG
    except NumericalError as exc:
        logger.error("Numerical abort: %s", exc)
        return EXIT_NUMERICAL
    except OSError as exc:
        logger.error("I/O failure: %s", exc)
        return EXIT_IO
    except L2SError as exc:
        logger.exception("Command %s failed: %s", args.command, exc)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
