"""
Command line entry point.

    python -m gou_ruin <command> --config <path> [--force] [--out <dir>] [--workers N]

Commands: analyze, simulate, ruin, ldp, constant, verify. Exit codes: 0
success, 1 configuration error, 2 condition gate, 3 numerical failure.
"""

import argparse
import logging
import sys
from typing import List, Optional

from gou_ruin.commands import COMMANDS, load_config, run_command
from gou_ruin.core.config import settings
from gou_ruin.core.exceptions import GouRuinError

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.project_name,
        description="Cramér-type ruin asymptotics for generalised Ornstein-Uhlenbeck processes",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.project_version}")
    parser.add_argument("command", choices=list(COMMANDS), help="Command to run")
    parser.add_argument("--config", required=True, help="Path to the TOML run configuration")
    parser.add_argument("--force", action="store_true", help="Proceed past unverified conditions")
    parser.add_argument("--out", default=None, help="Output directory (overrides output.directory)")
    parser.add_argument("--workers", type=int, default=None, help="Worker processes (overrides simulation.workers)")
    parser.add_argument("--log-level", default=settings.log_level, help="Logging level")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format=settings.log_format)

    try:
        config = load_config(args.config, force=args.force)
        if args.workers is not None:
            simulation = config.simulation.model_copy(update={"workers": args.workers})
            config = config.model_copy(update={"simulation": simulation})
    except GouRuinError as e:
        logger.error(f"Invalid configuration ({type(e).__name__}): {e}")
        return e.exit_code

    return run_command(args.command, config, out_dir=args.out, force=args.force)


if __name__ == "__main__":
    sys.exit(main())
