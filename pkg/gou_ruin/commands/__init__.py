"""
Command package.

This package organizes the command handlers and provides the central
``run_command`` dispatcher used by the command line.
"""

import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, Optional, Union

from gou_ruin.core.exceptions import ConfigError, GouRuinError
from gou_ruin.schemas.config import RunConfig
from gou_ruin.utils.io import sha256_bytes

from .analysis import run_analyze
from .config import load_config, parse_config, render_config
from .context import CommandContext
from .estimation import run_constant, run_ldp, run_ruin
from .manifest import update_manifest
from .plots import MissingInputError, emit_plots
from .simulation import run_simulate
from .verify import run_verify

logger = logging.getLogger(__name__)

CommandHandler = Callable[[CommandContext], None]

# Register all command handlers
COMMANDS: Dict[str, CommandHandler] = {
    "analyze": run_analyze,
    "simulate": run_simulate,
    "ruin": run_ruin,
    "ldp": run_ldp,
    "constant": run_constant,
    "verify": run_verify,
}

PLOTTED_COMMANDS = {"analyze", "ruin", "ldp", "verify"}


def execute_command(
    cmd: str,
    config: RunConfig,
    out_dir: Optional[Union[str, Path]] = None,
    force: bool = False,
) -> CommandContext:
    """
    Run a command and update the manifest, raising on failure.

    Args:
        cmd: One of ``COMMANDS``
        config: Parsed configuration
        out_dir: Output directory; ``output.directory`` of the config when omitted
        force: Proceed past unverified conditions

    Returns:
        The command context with the list of written files
    """
    handler = COMMANDS.get(cmd)
    if handler is None:
        raise ConfigError(f"unknown command '{cmd}', expected one of {', '.join(COMMANDS)}")

    out = Path(out_dir if out_dir is not None else config.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    ctx = CommandContext(config=config, out_dir=out, force=force or config.overrides.force)

    started = datetime.now(timezone.utc)
    logger.info(f"Running '{cmd}' into {out}")
    handler(ctx)
    if config.output.plots and cmd in PLOTTED_COMMANDS:
        try:
            for path in emit_plots(out):
                ctx.record(path)
        except MissingInputError as e:
            logger.warning(f"No plots rendered: {e}")

    update_manifest(
        out,
        cmd,
        config_digest=sha256_bytes(render_config(config).encode("utf-8")),
        seed=config.simulation.seed,
        outputs=ctx.written,
        started_at=started,
        finished_at=datetime.now(timezone.utc),
        conditions=ctx.condition_summary(),
        forced=ctx.force,
    )
    return ctx


def run_command(
    cmd: str,
    config: RunConfig,
    out_dir: Optional[Union[str, Path]] = None,
    force: bool = False,
) -> int:
    """
    Run a command and map failures to exit codes.

    Returns:
        0 on success, 1 for configuration errors, 2 when the condition gate
        stops the run, 3 for numerical failures
    """
    try:
        execute_command(cmd, config, out_dir, force)
    except GouRuinError as e:
        logger.error(f"'{cmd}' failed ({type(e).__name__}): {e}")
        return e.exit_code
    return 0


__all__ = [
    "COMMANDS",
    "CommandContext",
    "execute_command",
    "run_command",
    "emit_plots",
    "parse_config",
    "render_config",
    "load_config",
]
