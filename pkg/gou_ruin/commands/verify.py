"""
verify command: runs ruin, constant, fit and the ruin-time law, and checks
the Cramér limits against the thresholds of the ``[verify]`` section.

The command completes (exit 0) whether or not the checks pass; the verdicts
are in verify_report.json.
"""

import logging
import math
from typing import List, Optional, Tuple

from gou_ruin.commands.context import CommandContext
from gou_ruin.commands.estimation import cramer_constant, cramer_fit, ruin_curve
from gou_ruin.schemas.estimates import (
    CramerConstantEstimate,
    CramerFit,
    RuinTimeRow,
    RuinTimeTable,
    VerifyCheck,
    VerifyReport,
)
from gou_ruin.services.ruin_estimation import InsufficientRuinsError, estimate_ruin_time_cdf
from gou_ruin.utils.io import write_frame, write_json

logger = logging.getLogger(__name__)


def slope_checks(fit: CramerFit, tolerance: float) -> List[VerifyCheck]:
    target = -fit.w
    deviation = abs(fit.slope - target) / fit.w
    return [
        VerifyCheck(
            name="slope_within_tolerance",
            passed=deviation <= tolerance,
            value=fit.slope,
            threshold=tolerance,
            detail=f"relative deviation {deviation:.4f} from -w = {target:.6g}",
        ),
        VerifyCheck(
            name="slope_interval_covers_minus_w",
            passed=fit.slope_ci_lo <= target <= fit.slope_ci_hi,
            value=target,
            detail=f"95% interval [{fit.slope_ci_lo:.6g}, {fit.slope_ci_hi:.6g}]",
        ),
    ]


def plateau_checks(
    fit: CramerFit,
    constant: Optional[CramerConstantEstimate],
    max_ratio: float,
    factor: float,
) -> List[VerifyCheck]:
    checks = [
        VerifyCheck(
            name="plateau_ratio",
            passed=fit.plateau_ratio <= max_ratio,
            value=fit.plateau_ratio,
            threshold=max_ratio,
            detail="max/min of z^w psi_hat over the top levels",
        )
    ]
    if constant is None:
        return checks
    ratio = constant.estimate / fit.plateau_mean if fit.plateau_mean > 0 else math.inf
    checks.append(VerifyCheck(
        name="constant_within_factor_of_plateau",
        passed=1.0 / factor <= ratio <= factor,
        value=ratio,
        threshold=factor,
        detail=f"C = {constant.estimate:.6g}, plateau mean = {fit.plateau_mean:.6g}",
    ))
    overlap = constant.ci_lo <= fit.plateau_ci_hi and fit.plateau_ci_lo <= constant.ci_hi
    checks.append(VerifyCheck(
        name="constant_and_plateau_intervals_overlap",
        passed=overlap,
        detail=(
            f"constant [{constant.ci_lo:.6g}, {constant.ci_hi:.6g}], "
            f"plateau [{fit.plateau_ci_lo:.6g}, {fit.plateau_ci_hi:.6g}]"
        ),
    ))
    return checks


def _rate_interval(row: RuinTimeRow, log_z: float) -> Tuple[float, float]:
    """Interval of r(x) = -(ln z)^{-1} ln P(T_z <= x ln z) from the binomial interval of the row."""
    low = -math.log(row.ci_hi) / log_z if row.ci_hi > 0 else math.inf
    high = -math.log(row.ci_lo) / log_z if row.ci_lo > 0 else math.inf
    return low, high


def ldp_checks(table: RuinTimeTable, w: float, x_flat: float, tolerance: float) -> List[VerifyCheck]:
    """
    Compare the rate estimates r(x) = -(ln z)^{-1} ln P̂(T_z <= x ln z) with R(x).

    At finite z both r(x) and the estimate r_psi = -(ln z)^{-1} ln psi_hat(z)
    carry the prefactor of the level, so the excess r(x) - r_psi is compared
    with R(x) - w. It must agree within ``tolerance`` (widened by the
    interval of r(x)) below 1/mu*, vanish from 1/mu* on, and decrease
    strictly across the rows below 1/mu*.

    Args:
        table: Ruin-time law with R(x) filled in for x > x₀
        w: Lundberg coefficient
        x_flat: 1/mu*, where R reaches w
        tolerance: Allowed absolute deviation of the excess rate

    Returns:
        The checks ldp_rates_match_rate_function, ldp_rates_flat_beyond_tilted_mean
        and ldp_rates_decreasing_before_tilted_mean
    """
    log_z = math.log(table.z)
    rows = [row for row in table.rows if row.rate is not None]
    if table.psi_hat <= 0:
        return [
            VerifyCheck(name=name, passed=False, detail=f"no ruins at z = {table.z:g}")
            for name in (
                "ldp_rates_match_rate_function",
                "ldp_rates_flat_beyond_tilted_mean",
                "ldp_rates_decreasing_before_tilted_mean",
            )
        ]
    r_psi = -table.psi_normalized_log

    def deviation(row: RuinTimeRow) -> float:
        target = r_psi + (row.rate - w)
        low, high = _rate_interval(row, log_z)
        if target < low:
            return low - target
        if target > high:
            return target - high
        return 0.0

    below = [row for row in rows if row.x < x_flat]
    beyond = [row for row in rows if row.x >= x_flat]
    below_dev = max((deviation(row) for row in below), default=0.0)
    beyond_dev = max((deviation(row) for row in beyond), default=0.0)
    rates = [-row.normalized_log for row in below]
    decreasing = all(later < earlier for earlier, later in zip(rates, rates[1:]))
    return [
        VerifyCheck(
            name="ldp_rates_match_rate_function",
            passed=below_dev <= tolerance,
            value=below_dev,
            threshold=tolerance,
            detail=(
                f"{len(below)} rows in (x0, 1/mu*); excess rates "
                + ", ".join(f"{-row.normalized_log - r_psi:.4g} vs {row.rate - w:.4g}" for row in below)
            ),
        ),
        VerifyCheck(
            name="ldp_rates_flat_beyond_tilted_mean",
            passed=beyond_dev <= tolerance,
            value=beyond_dev,
            threshold=tolerance,
            detail=f"{len(beyond)} rows at x >= 1/mu* = {x_flat:.6g}; r_psi = {r_psi:.4g}",
        ),
        VerifyCheck(
            name="ldp_rates_decreasing_before_tilted_mean",
            passed=decreasing,
            detail="rate estimates " + ", ".join(f"{r:.4g}" for r in rates),
        ),
    ]


def run_verify(ctx: CommandContext) -> None:
    """Write the outputs of ruin, constant and ldp plus verify_report.json."""
    thresholds = ctx.config.verify
    checks: List[VerifyCheck] = []

    curve = ruin_curve(ctx)
    constant = cramer_constant(ctx)
    try:
        fit = cramer_fit(ctx, curve, constant)
        checks += slope_checks(fit, thresholds.slope_tolerance)
        checks += plateau_checks(fit, constant, thresholds.plateau_max_ratio, thresholds.constant_factor)
    except InsufficientRuinsError as e:
        logger.warning(f"Cramér fit failed: {e}")
        checks.append(VerifyCheck(name="cramer_fit", passed=False, detail=str(e)))

    profile = ctx.profile()
    table = estimate_ruin_time_cdf(
        ctx.model,
        ctx.config.analysis.ldp_z,
        ctx.default_x_grid(),
        ctx.estimation,
        profile=profile,
        force=ctx.force,
        report=ctx.report(),
    )
    ctx.record(write_frame(ctx.path("ruin_time_cdf.csv"), table.to_frame()))
    checks += ldp_checks(table, profile.w, profile.x_flat, thresholds.ldp_tolerance)

    report = VerifyReport(checks=checks)
    ctx.record(write_json(ctx.path("verify_report.json"), report))
    failed = [check.name for check in checks if not check.passed]
    if failed:
        logger.warning(f"Verify: {len(failed)} of {len(checks)} checks failed: {', '.join(failed)}")
    else:
        logger.info(f"Verify: all {len(checks)} checks passed")
