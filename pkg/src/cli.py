"""
CLI - Command line verbs: run, grid, convert, selftest
"""

import argparse
import logging
import os
import sys
from typing import Dict, List, Optional

from config.settings import EXIT_OK, OUTPUT_DIR
from src import data_stream, experiment, online_model
from src.errors import NcldError
from src.experiment_config import load_config
from src.log import setup_logging

logger = logging.getLogger(__name__)

# Method variants by their reporting names
VARIANTS = {
    "ELM-O": {"strategy": "none"},
    "ELM-I": {"strategy": "retrain"},
    "ELM-II": {"strategy": "adjust"},
    "Abla-v1": {"beta": "1.0"},
    "Abla-v2": {"reweight_ranking": "false"},
}

# flag name -> config key, for flags that map one to one
_CONFIG_FLAGS = [
    "dataset_path", "dataset_format", "chunk_size", "hidden_units", "alpha", "beta", "gamma",
    "neighbors", "delta", "strategy", "noise_lo", "noise_hi", "drift_mode", "drift_split",
    "data_seed", "noise_seed", "model_seed", "posteriors", "repeats", "output_dir",
    "beta_grid", "gamma_grid",
]


def _add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--synthetic", action="store_true", help="generate a synthetic stream instead of reading one")
    parser.add_argument("--variant", choices=sorted(VARIANTS), help="named method variant")
    parser.add_argument("--paper-literal-r", action="store_true", help="use the literal scoring kernel form")
    for name in _CONFIG_FLAGS:
        parser.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None)


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per verb"""
    parser = argparse.ArgumentParser(prog="ncld", description="Streaming multi-label learning with noisy labels")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    verbs = parser.add_subparsers(dest="verb", required=True)

    run = verbs.add_parser("run", help="run the stream once (or --repeats times)")
    _add_config_flags(run)
    run.add_argument("--checkpoint", help="write the final model here")

    grid = verbs.add_parser("grid", help="mesh search over beta and gamma")
    _add_config_flags(grid)
    grid.add_argument("--jobs", type=int, default=os.cpu_count() or 1)

    convert = verbs.add_parser("convert", help="convert between dense CSV and sparse multi-label files")
    convert.add_argument("source")
    convert.add_argument("target")
    convert.add_argument("--from", dest="source_format", default="dense-csv")
    convert.add_argument("--to", dest="target_format", default="sparse-multilabel")

    selftest = verbs.add_parser("selftest", help="run the test suites")
    selftest.add_argument("--fast", action="store_true", help="skip tests marked slow")
    return parser


def config_flags(args: argparse.Namespace) -> Dict[str, object]:
    """Collect the flags that were actually given, variant first so explicit flags win"""
    flags: Dict[str, object] = {}
    if args.variant:
        flags.update(VARIANTS[args.variant])
    for name in _CONFIG_FLAGS:
        value = getattr(args, name)
        if value is not None:
            flags[name] = value
    if args.synthetic:
        flags["synthetic"] = True
    if args.paper_literal_r:
        flags["paper_literal_r"] = True
    return flags


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, config_flags(args))
    out_dir = cfg.output_dir or OUTPUT_DIR
    if cfg.repeats > 1:
        reports, summary = experiment.run_repeated(cfg, cfg.repeats)
        for r, report in enumerate(reports):
            experiment.emit_reports(report, os.path.join(out_dir, f"repeat_{r}"))
        for name, value in summary.items():
            print(f"{name} = {value:.6f}")
        final = reports[-1]
    else:
        final = experiment.run_experiment(cfg)
        experiment.emit_reports(final, out_dir)
        for name, value in final.summary.items():
            print(f"{name} = {value:.6f}")
    if args.checkpoint:
        online_model.save_checkpoint(final.final_state, cfg.model_seed, args.checkpoint)
    return EXIT_OK


def cmd_grid(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, config_flags(args))
    result = experiment.grid_search(cfg, cfg.beta_grid, cfg.gamma_grid, jobs=args.jobs, out_dir=cfg.output_dir)
    print(f"beta = {result.beta!r}")
    print(f"gamma = {result.gamma!r}")
    return EXIT_OK


def cmd_convert(args: argparse.Namespace) -> int:
    ds = data_stream.parse_dataset(args.source, args.source_format)
    data_stream.write_dataset(ds, args.target, args.target_format)
    logger.info(f"Converted {args.source} ({args.source_format}) -> {args.target} ({args.target_format})")
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace) -> int:
    import pytest

    tests = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "tests")
    options = [tests, "-q"]
    if args.fast:
        options += ["-m", "not slow"]
    return int(pytest.main(options))


COMMANDS = {"run": cmd_run, "grid": cmd_grid, "convert": cmd_convert, "selftest": cmd_selftest}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, dispatch the verb and map errors to exit codes

    Args:
        argv: Arguments without the program name, sys.argv[1:] by default

    Returns:
        Process exit code
    """
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return COMMANDS[args.verb](args)
    except NcldError as exc:
        logger.error(str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
