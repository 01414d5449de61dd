"""
Monte Carlo ruin estimators.

Path blocks are simulated by the batch engine, one random stream per block
of path ids, so that estimates do not depend on the number of worker
processes. All levels of a ruin curve share the same paths.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from gou_ruin.core.config import settings
from gou_ruin.core.exceptions import ConditionGateError, ConfigError, NumericalError
from gou_ruin.core.streams import StreamTag, make_stream
from gou_ruin.schemas.estimates import (
    CramerConstantEstimate,
    CramerFit,
    EstimationConfig,
    LaplaceCheckReport,
    LaplaceCheckRow,
    RuinCurve,
    RuinCurveRow,
    RuinTimeRow,
    RuinTimeTable,
)
from gou_ruin.schemas.model import ModelSpec
from gou_ruin.schemas.profile import ConditionReport, CramerProfile
from gou_ruin.services.cramer_analysis import check_conditions, rate_function
from gou_ruin.services.levy_models import laplace_exponent, sample_increments
from gou_ruin.services.path_simulation import EXP_CLAMP, RuinBatch, StopReason, simulate_ruin_batch

logger = logging.getLogger(__name__)

# Two-sided 95% normal quantile
Z_95 = float(stats.norm.ppf(0.975))
# Asymptotic standard deviation of the median relative to the mean, sqrt(π/2)
MEDIAN_EFFICIENCY = math.sqrt(math.pi / 2.0)
UNSTABLE_WEIGHT_SHARE = 0.05


class ZeroPathsError(ConfigError):
    """Raised when an estimator is asked to run on zero paths."""
    pass


class InsufficientRuinsError(NumericalError):
    """Raised when too few levels carry enough ruins for the regression."""
    pass


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> Tuple[float, float]:
    """
    Wilson score interval for a binomial proportion.

    For k = 0 the upper bound is the rule-of-three value 3/n.

    Raises:
        ZeroPathsError: n = 0
    """
    if n <= 0:
        raise ZeroPathsError("binomial interval needs at least one path")
    if k == 0:
        return 0.0, min(1.0, 3.0 / n)
    interval = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    p = k / n
    return min(float(interval.low), p), max(float(interval.high), p)


def ensure_conditions(
    model: ModelSpec,
    force: bool = False,
    report: Optional[ConditionReport] = None,
) -> ConditionReport:
    """
    Gate an estimator on Conditions A, B and C.

    Args:
        model: Validated model
        force: Continue with a warning when a condition is not verified
        report: Precomputed report

    Returns:
        The condition report

    Raises:
        ConditionGateError: A condition is not verified and ``force`` is False
    """
    report = report or check_conditions(model)
    if report.all_verified:
        return report
    failing = ", ".join(
        f"{name}={result.verdict.value} ({result.reason})"
        for name, result in (("A", report.condition_a), ("B", report.condition_b), ("C", report.condition_c))
        if not result.verified
    )
    if not force:
        raise ConditionGateError(f"conditions not verified: {failing}")
    logger.warning(f"Proceeding despite unverified conditions (forced): {failing}")
    return report


# ---------------------------------------------------------------------------
# Block fan-out
# ---------------------------------------------------------------------------

def _simulate_block(
    block: int,
    model: ModelSpec,
    levels: Tuple[float, ...],
    n_paths: int,
    config: EstimationConfig,
    tag: StreamTag,
    theta: float,
    t_max: float,
    stop_at_largest: bool,
) -> RuinBatch:
    start = block * config.batch_size
    size = min(config.batch_size, n_paths - start)
    rng = make_stream(config.seed, tag, block)
    return simulate_ruin_batch(model, levels, size, config.step, theta, t_max, rng, stop_at_largest)


def simulate_blocks(
    model: ModelSpec,
    levels: Sequence[float],
    n_paths: int,
    config: EstimationConfig,
    tag: StreamTag,
    theta: Optional[float] = None,
    t_max: Optional[float] = None,
    stop_at_largest: bool = True,
) -> RuinBatch:
    """
    Simulate ``n_paths`` paths in fixed-size blocks and join them in block order.

    Block b covers path ids [b·batch_size, (b+1)·batch_size) and draws from
    the stream (seed, tag, b), whichever worker runs it.
    """
    if n_paths <= 0:
        raise ZeroPathsError("n_paths must be > 0")
    n_blocks = math.ceil(n_paths / config.batch_size)
    run = partial(
        _simulate_block,
        model=model,
        levels=tuple(float(z) for z in levels),
        n_paths=n_paths,
        config=config,
        tag=tag,
        theta=config.theta if theta is None else theta,
        t_max=config.t_max if t_max is None else t_max,
        stop_at_largest=stop_at_largest,
    )
    logger.info(f"Simulating {n_paths} paths in {n_blocks} blocks ({tag.name.lower()}, workers={config.workers})")
    if config.workers == 1 or n_blocks == 1:
        batches = [run(block) for block in range(n_blocks)]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            batches = list(executor.map(run, range(n_blocks)))
    return RuinBatch.concatenate(batches)


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def estimate_ruin_curve(
    model: ModelSpec,
    z_grid: Sequence[float],
    config: EstimationConfig,
    force: bool = False,
    report: Optional[ConditionReport] = None,
) -> RuinCurve:
    """
    Estimate ψ(z) on a grid of levels from common random numbers.

    Args:
        model: Validated model
        z_grid: Ascending levels
        config: Sampling parameters
        force: Pass the condition gate with a warning
        report: Precomputed condition report

    Returns:
        One row per level, with Wilson intervals and stop diagnostics

    Raises:
        ConditionGateError: Conditions not verified and not forced
        ZeroPathsError: n_paths = 0
    """
    levels = [float(z) for z in z_grid]
    if not levels or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError("z grid must be nonempty and strictly ascending")
    if config.n_paths <= 0:
        raise ZeroPathsError("n_paths must be > 0")
    ensure_conditions(model, force, report)

    batch = simulate_blocks(model, levels, config.n_paths, config, StreamTag.RUIN)
    n = batch.size
    rows: List[RuinCurveRow] = []
    for i, z in enumerate(levels):
        ruined = ~np.isnan(batch.ruin_times[:, i])
        k = int(ruined.sum())
        lo, hi = wilson_interval(k, n)
        rows.append(
            RuinCurveRow(
                z=z,
                psi_hat=k / n,
                ci_lo=lo,
                ci_hi=hi,
                n_paths=n,
                n_ruined=k,
                censored_frac=float((~ruined & (batch.stop_reason == StopReason.T_MAX)).mean()),
                underflow_frac=float((~ruined & (batch.stop_reason == StopReason.THETA)).mean()),
                clamped_frac=float(batch.clamped.mean()),
            )
        )
        if rows[-1].censored_frac > 0.01:
            logger.warning(f"z={z}: {rows[-1].censored_frac:.2%} of unruined paths censored at t_max")
    if batch.clamped.any():
        logger.warning(f"{batch.clamped.mean():.2%} of paths had e^(-xi) clamped at xi < -{EXP_CLAMP:g}")
    logger.info(f"Ruin curve over {len(levels)} levels from {n} paths")
    return RuinCurve(rows=rows, step=config.step, theta=config.theta, t_max=config.t_max, seed=config.seed)


def estimate_ruin_time_cdf(
    model: ModelSpec,
    z: float,
    x_grid: Sequence[float],
    config: EstimationConfig,
    profile: Optional[CramerProfile] = None,
    force: bool = False,
    report: Optional[ConditionReport] = None,
) -> RuinTimeTable:
    """
    Estimate P(T_z <= x ln z) on a grid of x.

    Thresholds beyond t_max give the finite-horizon ruin probability. The
    normalized log-estimate (ln z)^{-1} ln P̂ is reported next to R(x) when a
    profile is given and x > x₀.

    Raises:
        ConfigError: z <= 1 (ln z must be positive) or an unsorted x grid
    """
    if z <= 1:
        raise ConfigError(f"z must be > 1 for the ln z time scale, got {z}")
    xs = [float(x) for x in x_grid]
    if not xs or any(b <= a for a, b in zip(xs, xs[1:])):
        raise ConfigError("x grid must be nonempty and strictly ascending")
    if config.n_paths <= 0:
        raise ZeroPathsError("n_paths must be > 0")
    ensure_conditions(model, force, report)

    batch = simulate_blocks(model, [z], config.n_paths, config, StreamTag.RUIN)
    times = batch.ruin_times[:, 0]
    n = batch.size
    log_z = math.log(z)
    ruined_total = int((~np.isnan(times)).sum())
    psi_hat = ruined_total / n

    rows: List[RuinTimeRow] = []
    for x in xs:
        threshold = x * log_z
        k = int((times <= threshold).sum())
        lo, hi = wilson_interval(k, n)
        p_hat = k / n
        rate = None
        if profile is not None and x > profile.x0:
            rate = rate_function(profile, model, x)
        rows.append(
            RuinTimeRow(
                x=x,
                threshold=threshold,
                p_hat=p_hat,
                ci_lo=lo,
                ci_hi=hi,
                n_ruined=k,
                normalized_log=math.log(p_hat) / log_z if k else -math.inf,
                rate=rate,
            )
        )
    return RuinTimeTable(
        z=z,
        n_paths=n,
        psi_hat=psi_hat,
        psi_normalized_log=math.log(psi_hat) / log_z if ruined_total else -math.inf,
        rows=rows,
    )


def _negative_part(values: np.ndarray) -> np.ndarray:
    return np.maximum(-values, 0.0)


def cramer_constant_from_samples(
    m: np.ndarray,
    q: np.ndarray,
    l_bar: np.ndarray,
    inf_z: np.ndarray,
    w: float,
    mu_star: float,
    blocks: int = settings.median_of_means_blocks,
    dispersion_gate: float = 1.0,
) -> CramerConstantEstimate:
    """
    Median-of-means evaluation of
    C₋ = E[((Q + M min{L̄, I})⁻)^w - ((M I)⁻)^w] / (wμ*).

    Samples are split into ``blocks`` consecutive blocks in index (path id)
    order.

    Args:
        m, q, l_bar: Unit-interval samples of M, Q and L̄
        inf_z: Independent samples of I = inf_{t>0} Z_t
        w: Lundberg coefficient
        mu_star: Tilted mean
        blocks: Number of median-of-means blocks
        dispersion_gate: Relative spread (max - min)/|median| of block means
            above which the heavy-tail flag is set

    Returns:
        The estimate with a normal interval from the block means
    """
    n = len(m)
    if n < blocks:
        raise ZeroPathsError(f"need at least {blocks} samples for {blocks} blocks, got {n}")
    bracket = (
        _negative_part(q + m * np.minimum(l_bar, inf_z)) ** w
        - _negative_part(m * inf_z) ** w
    )
    block_means = np.array([chunk.mean() for chunk in np.array_split(bracket, blocks)])
    scale = w * mu_star
    median = float(np.median(block_means))
    spread = float(block_means.max() - block_means.min())
    heavy_tail = spread > dispersion_gate * abs(median) if median != 0 else True
    if heavy_tail:
        logger.warning(f"Cramér constant block means disperse (spread={spread:.3g}, median={median:.3g})")

    estimate = median / scale
    se = MEDIAN_EFFICIENCY * float(block_means.std(ddof=1)) / math.sqrt(blocks) / scale if blocks > 1 else 0.0
    return CramerConstantEstimate(
        estimate=estimate,
        ci_lo=estimate - Z_95 * se,
        ci_hi=estimate + Z_95 * se,
        standard_error=se,
        block_means=[float(b) for b in block_means],
        n_samples=n,
        w=w,
        mu_star=mu_star,
        heavy_tail_flag=heavy_tail,
    )


def sample_constant_inputs(
    model: ModelSpec,
    config: EstimationConfig,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Draw (M, Q, L̄) from unit-interval paths and I = inf Z from independent long paths.

    Returns:
        Arrays (m, q, l_bar, inf_z) of length ``config.constant_paths``
    """
    n = config.constant_paths
    unit = simulate_blocks(model, [], n, config, StreamTag.CONSTANT_UNIT, theta=math.inf, t_max=1.0)
    tail = simulate_blocks(model, [], n, config, StreamTag.CONSTANT_TAIL)
    if np.any(tail.stop_reason == StopReason.T_MAX):
        share = float(np.mean(tail.stop_reason == StopReason.T_MAX))
        logger.warning(f"{share:.2%} of inf Z samples stopped at t_max before xi reached theta")
    xi_1 = unit.final_xi
    z_1 = unit.final_z
    m = np.exp(-xi_1)
    q = z_1
    l_bar = -np.exp(xi_1) * (z_1 - unit.inf_z)
    return m, q, l_bar, tail.inf_z


def estimate_cramer_constant(
    model: ModelSpec,
    profile: CramerProfile,
    config: EstimationConfig,
    force: bool = False,
    report: Optional[ConditionReport] = None,
) -> CramerConstantEstimate:
    """
    Estimate the Cramér constant C₋.

    The infimum factor is sampled independently of (M, Q, L̄).

    Raises:
        ConditionGateError: Conditions not verified and not forced
        ZeroPathsError: constant_paths = 0
    """
    ensure_conditions(model, force, report)
    if config.constant_paths <= 0:
        raise ZeroPathsError("constant_paths must be > 0")
    m, q, l_bar, inf_z = sample_constant_inputs(model, config)
    estimate = cramer_constant_from_samples(
        m, q, l_bar, inf_z, profile.w, profile.mu_star, config.constant_blocks, config.dispersion_gate
    )
    logger.info(f"Cramér constant estimate {estimate.estimate:.6g} [{estimate.ci_lo:.6g}, {estimate.ci_hi:.6g}]")
    return estimate


def fit_cramer_asymptotics(
    curve: RuinCurve,
    w: float,
    mu_star: Optional[float] = None,
    constant: Optional[CramerConstantEstimate] = None,
    plateau_top: int = 3,
) -> CramerFit:
    """
    Fit ln ψ̂ against ln z and build the plateau z^w ψ̂.

    Weighted least squares uses levels with at least ``min_ruins_for_fit``
    ruins and delta-method variances (1 - ψ̂)/n_ruined of ln ψ̂.

    Args:
        curve: Ruin curve
        w: Lundberg coefficient
        mu_star: Tilted mean (recorded only)
        constant: Cramér constant estimate to record next to the plateau
        plateau_top: Number of top levels in the max/min plateau ratio

    Returns:
        The fit

    Raises:
        InsufficientRuinsError: Fewer than 4 usable levels
    """
    usable = [row for row in curve.rows if row.n_ruined >= settings.min_ruins_for_fit and row.z > 0]
    if len(usable) < 4:
        raise InsufficientRuinsError(
            f"need >= 4 levels with >= {settings.min_ruins_for_fit} ruins, got {len(usable)}"
        )

    log_z = np.log([row.z for row in usable])
    log_psi = np.log([row.psi_hat for row in usable])
    variance = np.maximum([(1.0 - row.psi_hat) / row.n_ruined for row in usable], 1e-12)
    weights = 1.0 / variance

    design = np.column_stack([np.ones_like(log_z), log_z])
    normal = design.T @ (weights[:, None] * design)
    covariance = np.linalg.inv(normal)
    beta = covariance @ (design.T @ (weights * log_psi))
    slope = float(beta[1])
    slope_se = float(math.sqrt(covariance[1, 1]))

    z = np.array([row.z for row in curve.rows])
    scale = z ** w
    plateau = scale * np.array([row.psi_hat for row in curve.rows])
    top = plateau[-plateau_top:]
    plateau_ratio = float(top.max() / top.min()) if top.min() > 0 else math.inf

    half = max(1, math.ceil(len(curve.rows) / 2))
    plateau_mean = float(plateau[-half:].mean())
    plateau_lo = float((scale * np.array([row.ci_lo for row in curve.rows]))[-half:].mean())
    plateau_hi = float((scale * np.array([row.ci_hi for row in curve.rows]))[-half:].mean())

    return CramerFit(
        w=w,
        mu_star=mu_star,
        slope=slope,
        slope_se=slope_se,
        slope_ci_lo=slope - Z_95 * slope_se,
        slope_ci_hi=slope + Z_95 * slope_se,
        z_used=[row.z for row in usable],
        plateau=[float(p) for p in plateau],
        plateau_ratio=plateau_ratio,
        plateau_mean=plateau_mean,
        plateau_ci_lo=plateau_lo,
        plateau_ci_hi=plateau_hi,
        constant=constant.estimate if constant else None,
        constant_ci_lo=constant.ci_lo if constant else None,
        constant_ci_hi=constant.ci_hi if constant else None,
    )


def empirical_laplace_check(
    model: ModelSpec,
    alphas: Sequence[float],
    n: int,
    rng: np.random.Generator,
) -> LaplaceCheckReport:
    """
    Compare ln of the sample mean of e^{-αΔξ} over ``n`` unit increments with c(α).

    A single sample of increments serves the whole grid. The standard error
    of the log-mean is the delta-method value std/(√n · mean). A row is
    flagged unstable when one draw carries more than 5% of the sum.

    Raises:
        OutOfDomainError: An α outside the exponent domain
        ZeroPathsError: n = 0
    """
    if n <= 0:
        raise ZeroPathsError("n must be > 0")
    closed_forms = [laplace_exponent(model, float(alpha)) for alpha in alphas]
    d_xi = sample_increments(model, 1.0, n, rng).d_xi

    rows: List[LaplaceCheckRow] = []
    with np.errstate(over="ignore", invalid="ignore"):
        for alpha, closed_form in zip(alphas, closed_forms):
            values = np.exp(-float(alpha) * d_xi)
            mean = float(values.mean())
            total = float(values.sum())
            estimate = math.log(mean) if mean > 0 else -math.inf
            se = float(values.std(ddof=1)) / (math.sqrt(n) * mean) if n > 1 and math.isfinite(mean) else math.inf
            share = float(values.max() / total) if math.isfinite(total) and total > 0 else 1.0
            if se > 0 and math.isfinite(se):
                z_score = (estimate - closed_form) / se
            else:
                z_score = 0.0 if estimate == closed_form else math.inf
            unstable = share > UNSTABLE_WEIGHT_SHARE or not math.isfinite(estimate)
            if unstable:
                logger.warning(f"alpha={alpha}: empirical Laplace transform dominated by a single draw")
            rows.append(
                LaplaceCheckRow(
                    alpha=float(alpha),
                    estimate=estimate,
                    closed_form=closed_form,
                    standard_error=se,
                    z_score=z_score,
                    max_weight_share=share,
                    unstable=unstable,
                )
            )
    return LaplaceCheckReport(n=n, rows=rows)
