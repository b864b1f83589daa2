"""Command-line surface: train, annotate, eval, decode, sweep-dim, ablate.

Exit codes: 0 success, 2 usage errors, 3 configuration or data errors,
4 unexpected failures. ``SRLFUSE_OUTPUT_ROOT`` relocates relative output
directories.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, RunConfig
from .datasets import DataError
from .metrics import format_report_table

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DATA = 3
EXIT_INTERNAL = 4


def _parse_overrides(pairs: list[str]) -> dict:
    overrides = {}
    known = RunConfig.field_names()
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        if key not in known:
            raise ConfigError(f"--set: unknown config key {key!r}")
        try:
            overrides[key] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key] = raw
    return overrides


def _load_config(args) -> RunConfig:
    return RunConfig.from_file(args.config, _parse_overrides(args.set)).validate()


def _add_config_options(sub):
    sub.add_argument("--config", required=True, help="JSON run configuration")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override a config field (repeatable; overrides the file)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="srlfuse",
                                     description="role labeling and tag-embedding fusion toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="info-level logging")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="multi-seed training run")
    _add_config_options(train)

    annotate = commands.add_parser("annotate", help="label a text file, one sentence per line")
    annotate.add_argument("--checkpoint", required=True)
    annotate.add_argument("--input", required=True)
    annotate.add_argument("--output", required=True)

    evaluate = commands.add_parser("eval", help="score a checkpoint on a dataset")
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--data", required=True, help="dataset path or builtin:NAME")

    decode = commands.add_parser("decode", help="constrained-decode an emission matrix file")
    decode.add_argument("--roles", required=True, help="comma-separated role names")
    decode.add_argument("--emissions", required=True, help="whitespace-separated matrix file")

    sweep = commands.add_parser("sweep-dim", help="tag-embedding dimension sweep")
    _add_config_options(sweep)
    sweep.add_argument("--dims", default="1,2,5,10,20,50,100",
                       help="comma-separated dimensions (default: 1,2,5,10,20,50,100)")

    ablate = commands.add_parser("ablate", help="context/tags ablation grid")
    _add_config_options(ablate)
    ablate.add_argument("--tag-sources", action="store_true",
                        help="compare tag sources (srl/pos/ne) instead of the 2x2 grid")
    return parser


def _run(args) -> int:
    from . import experiments

    if args.command == "train":
        config = _load_config(args)
        result = experiments.cmd_train(config)
        print(format_report_table(result.reports), end="")
        print(f"results written to {config.resolved_output_dir()}")
        return EXIT_OK
    if args.command == "annotate":
        written, failed = experiments.cmd_annotate(args.input, args.checkpoint, args.output)
        print(f"annotated {written} sentences ({failed} failed) -> {args.output}")
        return EXIT_OK
    if args.command == "eval":
        reports = experiments.cmd_eval(args.checkpoint, args.data)
        print(format_report_table(reports), end="")
        return EXIT_OK
    if args.command == "decode":
        roles = [r for r in args.roles.split(",") if r]
        tags, score = experiments.cmd_decode(roles, args.emissions)
        print(" ".join(tags))
        print(f"score: {score:.6f}")
        return EXIT_OK
    if args.command == "sweep-dim":
        config = _load_config(args)
        dims = [int(d) for d in args.dims.split(",") if d]
        rows = experiments.cmd_sweep_dim(config, dims)
        for row in rows:
            print(json.dumps(row, sort_keys=True))
        return EXIT_OK
    if args.command == "ablate":
        config = _load_config(args)
        rows = experiments.cmd_ablate(config, tag_sources=args.tag_sources)
        for row in rows:
            print(json.dumps(row, sort_keys=True))
        return EXIT_OK
    raise AssertionError(f"unhandled command {args.command}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except (ConfigError, DataError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        logger.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
