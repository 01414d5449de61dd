"""
simulate command: path dumps, their summary and the iid diagnostics of the
discrete embedding.
"""

import logging
import math
from typing import List, Optional

from gou_ruin.commands.context import CommandContext
from gou_ruin.core.streams import StreamTag, make_stream
from gou_ruin.schemas.estimates import IidReport, PathSummary, SimulateSummary
from gou_ruin.services.path_simulation import (
    discrete_embedding,
    gou_path,
    iid_diagnostics,
    path_frame,
    simulate_path,
)
from gou_ruin.utils.io import write_frame, write_json

logger = logging.getLogger(__name__)


def _iid_report(ctx: CommandContext) -> Optional[IidReport]:
    sim = ctx.config.simulation
    n_paths = ctx.config.analysis.iid_paths
    if n_paths == 0 or sim.horizon != math.floor(sim.horizon) or sim.horizon < 2:
        logger.info("Skipping iid diagnostics (disabled or horizon not an integer >= 2)")
        return None
    embeddings = [
        discrete_embedding(simulate_path(ctx.model, sim.horizon, sim.step, make_stream(sim.seed, StreamTag.PATH, i)))
        for i in range(n_paths)
    ]
    report = iid_diagnostics(embeddings)
    if not report.passed:
        logger.warning(f"iid diagnostics rejected at level {report.significance}")
    return report


def run_simulate(ctx: CommandContext) -> None:
    """Write paths/path_<id>.csv for the first ``n_dump_paths`` path ids and simulate_summary.json."""
    sim = ctx.config.simulation
    output = ctx.config.output
    v0 = ctx.config.analysis.v0

    summaries: List[PathSummary] = []
    for path_id in range(output.n_dump_paths):
        rng = make_stream(sim.seed, StreamTag.PATH, path_id)
        path = simulate_path(ctx.model, sim.horizon, sim.step, rng, seed=sim.seed, path_id=path_id)
        if output.dump_paths:
            ctx.record(write_frame(ctx.path(f"paths/path_{path_id}.csv"), path_frame(path, v0)))
        summaries.append(PathSummary(
            path_id=path_id,
            points=len(path.times),
            jumps=len(path.grid.jump_times),
            final_xi=float(path.xi[-1]),
            final_z=float(path.z[-1]),
            min_z=float(path.runmin_z[-1]),
            ruin_time=gou_path(path, v0).ruin_time if v0 is not None else None,
            underflow=path.underflow,
        ))

    summary = SimulateSummary(
        seed=sim.seed,
        horizon=sim.horizon,
        step=sim.step,
        v0=v0,
        paths=summaries,
        iid=_iid_report(ctx),
    )
    ctx.record(write_json(ctx.path("simulate_summary.json"), summary))
    logger.info(f"Simulated {len(summaries)} dumped paths on horizon {sim.horizon}")
