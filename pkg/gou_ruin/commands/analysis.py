"""
analyze command: Cramér profile, condition report, rate function table and
the Monte Carlo cross-checks of the closed forms.
"""

import logging
from typing import List

import numpy as np

from gou_ruin.commands.context import CommandContext
from gou_ruin.core.streams import StreamTag, make_stream
from gou_ruin.schemas.profile import AnalysisReport, CramerProfile
from gou_ruin.services.cramer_analysis import rate_function_table, tilted_mean_monte_carlo
from gou_ruin.services.levy_models import exponent_domain, mean_drift
from gou_ruin.services.ruin_estimation import empirical_laplace_check
from gou_ruin.utils.io import write_frame, write_json

logger = logging.getLogger(__name__)

RATE_GRID_POINTS = 200


def default_alpha_grid(ctx: CommandContext, profile: CramerProfile) -> List[float]:
    """Eleven α values from max(-1, α_lo/2) to min(α_hi/2, max(1, w))."""
    if ctx.config.analysis.alpha_grid is not None:
        return list(ctx.config.analysis.alpha_grid)
    domain = exponent_domain(ctx.model)
    lo = max(0.5 * domain.lower, -1.0)
    hi = min(0.5 * domain.upper, max(1.0, profile.w))
    return [float(a) for a in np.linspace(lo, hi, 11)]


def rate_grid(profile: CramerProfile, points: int = RATE_GRID_POINTS) -> List[float]:
    """x grid from just above x₀ to twice 1/μ*."""
    start = profile.x0 + 0.02 * (profile.x_flat - profile.x0)
    return [float(x) for x in np.linspace(start, 2.0 * profile.x_flat, points)]


def run_analyze(ctx: CommandContext) -> None:
    """
    Write profile.json, rate_function.csv and laplace_check.csv.

    Raises:
        NoPositiveRootError: The Lundberg coefficient does not exist
    """
    model = ctx.model
    profile = ctx.profile()
    report = ctx.report()
    analysis = ctx.config.analysis
    seed = ctx.config.simulation.seed

    tilted, tilted_se = tilted_mean_monte_carlo(
        model, profile.w, analysis.laplace_samples, make_stream(seed, StreamTag.TILTED_MEAN)
    )
    logger.info(f"mu_star closed form {profile.mu_star:.6g}, Monte Carlo {tilted:.6g} (se {tilted_se:.2g})")

    parameters = model.model_dump(mode="json", exclude={"variant"})
    ctx.record(write_json(ctx.path("profile.json"), AnalysisReport(
        variant=model.variant,
        parameters=parameters,
        mean_drift=mean_drift(model),
        profile=profile,
        conditions=report,
        tilted_mean_estimate=tilted,
        tilted_mean_se=tilted_se,
    )))

    xs = analysis.x_grid if analysis.x_grid is not None else rate_grid(profile)
    xs = [x for x in xs if x > profile.x0]
    ctx.record(write_frame(ctx.path("rate_function.csv"), rate_function_table(profile, model, xs)))

    laplace = empirical_laplace_check(
        model, default_alpha_grid(ctx, profile), analysis.laplace_samples, make_stream(seed, StreamTag.LAPLACE)
    )
    ctx.record(write_frame(ctx.path("laplace_check.csv"), laplace.to_frame()))
    logger.info(
        f"Analyze: w={profile.w:.10g}, mu_star={profile.mu_star:.10g}, conditions {report.summary()}, "
        f"max |z| of Laplace check {laplace.max_abs_z:.2f}"
    )
