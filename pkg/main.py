#!/usr/bin/env python3
"""
Tax FAVAR command line.

Each stage subcommand runs the pipeline up to that stage and writes its
artifacts; `report` renders the manifest of a previous run.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv
from rich.console import Console
from rich.markdown import Markdown

load_dotenv()

from tax_favar.core.config import OVERRIDE_KEYS, load_config
from tax_favar.core.errors import ConfigError, FavarError
from tax_favar.core.logger import LogLevel, get_logger, set_global_log_level
from tax_favar.core.pipeline import COMMAND_STAGES, FavarPipeline, load_manifest
from tax_favar.core.report import emit_report
from tax_favar.core.tools.synthetic import write_fixture

logger = get_logger("Main")

REPORT_NAME = "report.md"


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="TOML config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--r", type=int, help="number of factors (default: information criterion)")
    parser.add_argument("--r-max", dest="r_max", type=int)
    parser.add_argument("--p", type=int, help="VAR lag order")
    parser.add_argument("--horizon", type=int, help="response horizon in quarters")
    parser.add_argument("--draws", type=int, help="accepted rotation draws")
    parser.add_argument("--bootstrap", type=int, help="bootstrap replications")
    parser.add_argument("--level", type=float, help="band level")
    parser.add_argument("--mode", choices=["rejection", "penalty", "both"])
    parser.add_argument("--output-dir", dest="output_dir", type=Path)
    parser.add_argument("--panel", type=Path)
    parser.add_argument("--events", type=Path)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--log-level", dest="log_level")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tax-favar", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)
    for name, stage in COMMAND_STAGES.items():
        _add_run_flags(commands.add_parser(name, help=f"run the pipeline through the {stage} stage"))
    report = commands.add_parser("report", help="render the report of a finished run")
    _add_run_flags(report)
    fixture = commands.add_parser("fixture", help="write the synthetic fixture")
    fixture.add_argument("directory", type=Path)
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    return {key: getattr(args, key, None) for key in OVERRIDE_KEYS}


def _apply_log_level(value: Optional[str]) -> None:
    if value:
        set_global_log_level(LogLevel.parse(value))


def _print_report(text: str) -> None:
    Console().print(Markdown(text))


def run_command(args: argparse.Namespace) -> int:
    if args.command == "fixture":
        paths = write_fixture(args.directory)
        for name, path in paths.items():
            logger.list_item(f"{name}: {path}")
        return 0

    _apply_log_level(args.log_level)
    if args.command == "report":
        if args.config is None and args.output_dir is None:
            raise ConfigError("report needs --config or --output-dir")
        output_dir = args.output_dir
        if output_dir is None:
            output_dir = load_config(args.config, _overrides(args)).paths.output_dir
        text = emit_report(load_manifest(output_dir))
        _print_report(text)
        return 0

    config = load_config(args.config, _overrides(args))
    _apply_log_level(config.run.log_level)
    manifest = FavarPipeline(config).run(COMMAND_STAGES[args.command])
    if args.command in ("run-all", "diagnose") or manifest["status"] != "ok":
        text = emit_report(manifest)
        (config.paths.output_dir / REPORT_NAME).write_text(text)
        _print_report(text)
    if manifest["status"] == "ok":
        logger.success(f"Artifacts written to {config.paths.output_dir}", "file")
    return manifest["exit_code"]


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run_command(args)
    except FavarError as exc:
        logger.error(f"{exc.stage} failed: {exc}", exc.stage)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
