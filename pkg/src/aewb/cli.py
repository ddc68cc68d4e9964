"""``aewb`` command line: fetch-data, train, evaluate, run, list-tasks.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error. Every
failure also prints a machine-readable ``error_code=<CODE>`` line on stderr.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .autodiff import ContractError, DimensionError
from .config import ConfigError, parse_config
from .data.images import FormatError as ImageFormatError
from .data.openml import FetchError, NotFoundError, cache_path, default_cache_dir, fetch_openml
from .data.tabular import EncodingError, ParseError
from .metrics import UndefinedMetricError
from .pipelines import EVALUATORS, TASK_DEFAULTS, TASKS, TRAINERS, Report, load_source, _history_table
from .report import report_json, write_artifacts
from .serialize import FormatError as ModelFormatError
from .serialize import load

log = logging.getLogger("aewb")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

MODEL_NAMES = {"visualize": ("basic", "contractive"), "denoise": ("basic", "denoising"),
               "hash": ("hash",), "detect": ("detect",), "generate": ("vae",)}

TASK_SUMMARY = {
    "visualize": "2-D embedding: PCA vs basic AE vs contractive AE reconstruction MSE",
    "denoise": "convolutional denoising AE vs basic AE, per-image noise reduction",
    "hash": "semantic hashing of bag-of-words documents, Hamming vs cosine distance",
    "detect": "anomaly detection by reconstruction error with a mean + k sigma threshold",
    "generate": "variational AE, latent interpolation strip and prior samples",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--out", type=Path, default=Path("aewb-out"), help="output directory")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config value by dotted path (repeatable)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--cache", type=Path, help="dataset cache directory (default $AEWB_CACHE)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    parser = _Parser(prog="aewb", description="Autoencoder case-study workbench.")
    parser.add_argument("--version", action="version", version=f"aewb {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="subcommand", parser_class=_Parser)
    fetch = sub.add_parser("fetch-data", parents=[common], help="download OpenML datasets into the cache")
    fetch.add_argument("ids", nargs="*", type=int, help="OpenML dataset ids (default: the config's)")
    sub.add_parser("train", parents=[common], help="train the task's models and save them")
    sub.add_parser("evaluate", parents=[common], help="evaluate models saved by train")
    sub.add_parser("run", parents=[common], help="train and evaluate, writing the full report")
    sub.add_parser("list-tasks", parents=[common], help="list the case-study tasks")
    return parser


def _cache(args) -> Path:
    return args.cache if args.cache is not None else default_cache_dir()


def _config(args):
    if args.config is None:
        raise UsageError(f"{args.command} requires --config")
    try:
        data = args.config.read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
    return parse_config(data, args.overrides, args.seed)


def _finish(report: Report, cfg, out: Path, started: float, extra_artifacts=()) -> None:
    names = write_artifacts(report, out) + list(extra_artifacts)
    duration = round(time.perf_counter() - started, 3) if cfg.record_duration else None
    (out / "report.json").write_bytes(
        report_json(report.task, cfg.to_dict(), report.metrics, names, cfg.seed, duration, report.source))
    log.info("wrote %d artifacts to %s (%.1fs)", len(names), out, time.perf_counter() - started)


def cmd_list_tasks(args) -> int:
    for task in TASKS:
        src = TASK_DEFAULTS[task]["dataset"]
        print(f"{task:<10} {TASK_SUMMARY[task]}  [default data: {', '.join(f'{k}={v}' for k, v in src.items())}]")
    return EXIT_OK


def cmd_fetch(args) -> int:
    ids = list(args.ids)
    if not ids:
        if args.config is None:
            raise UsageError("fetch-data needs dataset ids or a --config with dataset.openml_id")
        cfg = _config(args)
        if "openml_id" not in cfg.dataset:
            raise UsageError("config dataset has no openml_id")
        ids = [cfg.dataset["openml_id"]]
    cache = _cache(args)
    for oid in ids:
        fetch_openml(oid, cache)
        print(cache_path(cache, oid))
    return EXIT_OK


def cmd_train(args) -> int:
    started = time.perf_counter()
    cfg = _config(args)
    data, source = load_source(cfg.dataset, _cache(args))
    trained = TRAINERS[cfg.task](cfg, data)
    metrics = {}
    for name, hist in trained.histories.items():
        metrics[f"{name}_final_loss"] = hist[-1]
        metrics[f"{name}_epochs"] = len(hist)
    report = Report(cfg.task, metrics, {"training": _history_table(trained.histories)},
                    models=trained.models, source=source)
    _finish(report, cfg, args.out, started)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    cfg = _config(args)
    models = {}
    for name in MODEL_NAMES[cfg.task]:
        path = args.out / f"model_{name}.aewb"
        if not path.exists():
            raise FileNotFoundError(f"{path} not found; run `aewb train` with the same --out first")
        models[name] = load(path)
    data, source = load_source(cfg.dataset, _cache(args))
    report = EVALUATORS[cfg.task](cfg, data, models)
    report.source = source
    report.models = {}  # already on disk; rewriting would be a no-op
    _finish(report.validate(), cfg, args.out, started,
            [f"model_{n}.aewb{s}" for n in models for s in ("", ".json")])
    return EXIT_OK


def cmd_run(args) -> int:
    from .pipelines import run

    started = time.perf_counter()
    cfg = _config(args)
    report = run(cfg, cache_dir=_cache(args))
    _finish(report, cfg, args.out, started)
    return EXIT_OK


COMMANDS = {"list-tasks": cmd_list_tasks, "fetch-data": cmd_fetch, "train": cmd_train,
            "evaluate": cmd_evaluate, "run": cmd_run}

# exception type -> (error code, exit status); first match wins
ERRORS = (
    (UsageError, "USAGE", EXIT_USAGE),
    (ConfigError, "CONFIG", EXIT_USAGE),
    (NotFoundError, "NOT_FOUND", EXIT_RUNTIME),
    (FetchError, "FETCH", EXIT_RUNTIME),
    ((ParseError, EncodingError, ImageFormatError, ModelFormatError), "DATA_FORMAT", EXIT_RUNTIME),
    ((ContractError, DimensionError, UndefinedMetricError), "CONTRACT", EXIT_RUNTIME),
    (OSError, "IO", EXIT_RUNTIME),
)


def _fail(code: str, status: int, message: str) -> int:
    print(f"aewb: error: {message}", file=sys.stderr)
    print(f"error_code={code}", file=sys.stderr)
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand (one of: " + ", ".join(COMMANDS) + ")")
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        return _fail("USAGE", EXIT_USAGE, str(exc))
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:  # mapped to exit codes below
        for types, code, status in ERRORS:
            if isinstance(exc, types):
                return _fail(code, status, str(exc))
        log.debug("unexpected failure", exc_info=True)
        return _fail("INTERNAL", EXIT_RUNTIME, f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
