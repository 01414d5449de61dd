"""
ruin, ldp and constant commands.
"""

import logging
from typing import Optional

from gou_ruin.commands.context import CommandContext
from gou_ruin.schemas.estimates import CramerConstantEstimate, CramerFit, RuinCurve
from gou_ruin.services.ruin_estimation import (
    InsufficientRuinsError,
    estimate_cramer_constant,
    estimate_ruin_curve,
    estimate_ruin_time_cdf,
    fit_cramer_asymptotics,
)
from gou_ruin.utils.io import write_frame, write_json

logger = logging.getLogger(__name__)


def ruin_curve(ctx: CommandContext) -> RuinCurve:
    curve = estimate_ruin_curve(
        ctx.model, ctx.config.analysis.z_grid, ctx.estimation, force=ctx.force, report=ctx.report()
    )
    ctx.record(write_frame(ctx.path("ruin_curve.csv"), curve.to_frame()))
    return curve


def cramer_constant(ctx: CommandContext) -> CramerConstantEstimate:
    estimate = estimate_cramer_constant(
        ctx.model, ctx.profile(), ctx.estimation, force=ctx.force, report=ctx.report()
    )
    ctx.record(write_json(ctx.path("cramer_constant.json"), estimate))
    return estimate


def cramer_fit(
    ctx: CommandContext,
    curve: RuinCurve,
    constant: Optional[CramerConstantEstimate] = None,
) -> CramerFit:
    profile = ctx.profile()
    fit = fit_cramer_asymptotics(
        curve, profile.w, profile.mu_star, constant, plateau_top=ctx.config.verify.plateau_top
    )
    ctx.record(write_json(ctx.path("cramer_fit.json"), fit))
    logger.info(f"Fitted slope {fit.slope:.4g} ± {fit.slope_se:.2g} against -w = {-profile.w:.4g}")
    return fit


def run_ruin(ctx: CommandContext) -> None:
    """Write ruin_curve.csv, and cramer_fit.json when the curve supports a fit."""
    curve = ruin_curve(ctx)
    if ctx.optional_profile() is None:
        return
    try:
        cramer_fit(ctx, curve)
    except InsufficientRuinsError as e:
        logger.warning(f"Skipping Cramér fit: {e}")


def run_ldp(ctx: CommandContext) -> None:
    """Write ruin_time_cdf.csv at z = analysis.ldp_z."""
    profile = ctx.optional_profile()
    xs = ctx.default_x_grid() if profile is not None or ctx.config.analysis.x_grid is not None else None
    if xs is None:
        xs = [0.5, 1.0, 2.0, 4.0, 8.0]
        logger.warning(f"No profile to place the x grid; using {xs}")
    table = estimate_ruin_time_cdf(
        ctx.model,
        ctx.config.analysis.ldp_z,
        xs,
        ctx.estimation,
        profile=profile,
        force=ctx.force,
        report=ctx.report(),
    )
    ctx.record(write_frame(ctx.path("ruin_time_cdf.csv"), table.to_frame()))


def run_constant(ctx: CommandContext) -> None:
    """Write cramer_constant.json."""
    cramer_constant(ctx)
