import argparse
import logging
import sys
from typing import List, Optional

from app.core.config import settings
from app.logging_config import setup_logging
from app.cli.exception_handlers import EXIT_FAILED, EXIT_OK, run_guarded
from app.services.experiment_service import ExperimentService
from app.services.preset_service import PresetService

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manifold-toolkit",
        description="Forward and backward inertial manifold constructions for Galerkin-truncated equations",
    )
    parser.add_argument("--log-level", default=settings.log_level)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("--config", required=True, help="experiment TOML file")
    run.add_argument("--out", default=None, help="output directory (overrides the config)")
    run.add_argument("--jobs", type=int, default=None, help="worker processes")

    describe = sub.add_parser("describe", help="print a preset's spectrum and rate constants")
    describe.add_argument("preset")
    sub.add_parser("presets", help="list available presets")
    return parser


def run_command(args: argparse.Namespace) -> int:
    service = ExperimentService()
    config = service.load_config(args.config)
    report = service.run(config, output_dir=args.out, jobs=args.jobs)
    print(ExperimentService.summary(report))
    return EXIT_OK if report.passed else EXIT_FAILED


def describe_command(args: argparse.Namespace) -> int:
    service = PresetService()
    print(PresetService.format_description(service.describe(args.preset)))
    return EXIT_OK


def presets_command(args: argparse.Namespace) -> int:
    for name in PresetService().list_presets():
        print(name)
    return EXIT_OK


COMMANDS = {
    "run": run_command,
    "describe": describe_command,
    "presets": presets_command,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    setup_logging(log_level=args.log_level, use_json=settings.log_format == "json")
    return run_guarded(lambda: COMMANDS[args.command](args))


if __name__ == "__main__":
    sys.exit(main())
