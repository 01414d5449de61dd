import json
import math

import numpy as np
import pytest

from gou_ruin.commands import execute_command, parse_config
from gou_ruin.core.exceptions import ConditionGateError, ConfigError
from gou_ruin.core.streams import StreamTag, make_stream
from gou_ruin.schemas.estimates import EstimationConfig, RuinCurve, RuinCurveRow
from gou_ruin.schemas.model import BrownianDriftModel
from gou_ruin.services.cramer_analysis import lundberg_and_profile
from gou_ruin.services.levy_models import unchecked_model, unit_jump_model, validate
from gou_ruin.services.ruin_estimation import (
    InsufficientRuinsError,
    ZeroPathsError,
    cramer_constant_from_samples,
    empirical_laplace_check,
    estimate_cramer_constant,
    estimate_ruin_curve,
    estimate_ruin_time_cdf,
    fit_cramer_asymptotics,
    sample_constant_inputs,
    wilson_interval,
)


@pytest.fixture
def small_config() -> EstimationConfig:
    return EstimationConfig(
        seed=20240601,
        n_paths=2000,
        step=2.0 ** -5,
        batch_size=500,
        constant_paths=4000,
    )


def _synthetic_curve(psi, z_grid, n):
    rows = []
    for z in z_grid:
        k = int(round(psi(z) * n))
        lo, hi = wilson_interval(k, n)
        rows.append(RuinCurveRow(z=z, psi_hat=k / n, ci_lo=lo, ci_hi=hi, n_paths=n, n_ruined=k,
                                 censored_frac=0.0, underflow_frac=0.0))
    return RuinCurve(rows=rows, step=0.01, theta=30.0, t_max=200.0, seed=0)


# ---------------------------------------------------------------------------
# Binomial intervals
# ---------------------------------------------------------------------------

def test_wilson_interval_without_ruins():
    assert wilson_interval(0, 1000) == (0.0, 0.003)


def test_wilson_interval_contains_proportion():
    lo, hi = wilson_interval(37, 400)
    assert lo < 37 / 400 < hi


def test_wilson_interval_rejects_zero_paths():
    with pytest.raises(ZeroPathsError):
        wilson_interval(0, 0)


def test_wilson_interval_coverage():
    rng = np.random.default_rng(5)
    p, n = 0.05, 500
    covered = 0
    for k in rng.binomial(n, p, size=1000):
        lo, hi = wilson_interval(int(k), n)
        covered += lo <= p <= hi
    assert covered >= 930


# ---------------------------------------------------------------------------
# Ruin curve
# ---------------------------------------------------------------------------

def test_unit_jump_curve_never_ruins_above_one():
    config = EstimationConfig(seed=7, n_paths=2000, step=2.0 ** -6, batch_size=500)
    curve = estimate_ruin_curve(unit_jump_model(), [0.5, 2.0], config, force=True)
    high = curve.rows[1]
    assert high.psi_hat == 0.0 and high.n_ruined == 0
    assert high.ci_lo == 0.0
    assert high.ci_hi == pytest.approx(3.0 / 2000)
    assert curve.rows[0].n_ruined > 0


def test_unit_jump_curve_requires_force():
    config = EstimationConfig(seed=7, n_paths=100, step=2.0 ** -6)
    with pytest.raises(ConditionGateError):
        estimate_ruin_curve(unit_jump_model(), [0.5, 2.0], config)


def test_curve_is_monotone_under_common_random_numbers(reference_bm, small_config):
    curve = estimate_ruin_curve(reference_bm, [1.0, 2.0, 4.0, 8.0, 16.0], small_config)
    ruined = [row.n_ruined for row in curve.rows]
    assert ruined == sorted(ruined, reverse=True)
    for row in curve.rows:
        assert row.ci_lo <= row.psi_hat <= row.ci_hi
        assert row.n_paths == small_config.n_paths


def test_curve_rejects_unsorted_grid(reference_bm, small_config):
    with pytest.raises(ConfigError):
        estimate_ruin_curve(reference_bm, [4.0, 2.0], small_config)


def test_curve_rejects_zero_paths(reference_bm):
    with pytest.raises(ZeroPathsError):
        estimate_ruin_curve(reference_bm, [2.0], EstimationConfig(seed=1, n_paths=0))


def test_curve_does_not_depend_on_worker_count(reference_bm, small_config):
    serial = estimate_ruin_curve(reference_bm, [2.0, 4.0, 8.0], small_config)
    parallel = estimate_ruin_curve(reference_bm, [2.0, 4.0, 8.0], small_config.model_copy(update={"workers": 2}))
    assert serial.rows == parallel.rows


def test_doubling_paths_halves_interval_variance(reference_bm, small_config):
    """Interval widths scale as n^{-1/2}: squared widths halve within 20% when n_paths doubles."""
    levels = [2.0, 4.0]
    base = estimate_ruin_curve(reference_bm, levels, small_config)
    doubled = estimate_ruin_curve(reference_bm, levels, small_config.model_copy(update={"n_paths": 4000}))
    for small, large in zip(base.rows, doubled.rows):
        ratio = ((large.ci_hi - large.ci_lo) / (small.ci_hi - small.ci_lo)) ** 2
        assert ratio == pytest.approx(0.5, rel=0.2)


def test_raising_theta_stays_within_half_width(reference_bm, small_config):
    levels = [2.0, 4.0, 8.0]
    base = estimate_ruin_curve(reference_bm, levels, small_config)
    raised = estimate_ruin_curve(reference_bm, levels, small_config.model_copy(update={"theta": 40.0}))
    for low, high in zip(base.rows, raised.rows):
        assert abs(high.psi_hat - low.psi_hat) < (low.ci_hi - low.ci_lo) / 2


def test_curve_reports_clamped_weights():
    """ξ drifts far below -700 before t_max while Z only grows, so every path is clamped and none ruins."""
    model = unchecked_model("brownian_drift", gamma_xi=-1000.0, gamma_eta=1.0, sigma_xi2=1e-4, sigma_eta2=1e-8)
    config = EstimationConfig(seed=3, n_paths=200, step=2.0 ** -6, t_max=1.0, batch_size=100)
    curve = estimate_ruin_curve(model, [2.0], config, force=True)
    row = curve.rows[0]
    assert row.n_ruined == 0
    assert row.clamped_frac == 1.0
    assert row.censored_frac == 1.0
    assert row.underflow_frac == 0.0


def test_reference_curve_has_no_clamped_weights(reference_bm, small_config):
    curve = estimate_ruin_curve(reference_bm, [2.0, 4.0], small_config)
    assert all(row.clamped_frac == 0.0 for row in curve.rows)
    assert "clamped_frac" in curve.to_frame().columns


def test_curve_frame_round_trip(reference_bm, small_config):
    curve = estimate_ruin_curve(reference_bm, [2.0, 4.0], small_config)
    restored = RuinCurve.from_frame(curve.to_frame(), curve.step, curve.theta, curve.t_max, curve.seed)
    assert restored == curve


# ---------------------------------------------------------------------------
# Ruin-time law
# ---------------------------------------------------------------------------

def test_ruin_time_cdf_is_monotone(reference_bm, small_config):
    profile = lundberg_and_profile(reference_bm)
    table = estimate_ruin_time_cdf(reference_bm, 4.0, [0.5, 1.0, 2.0, 4.0, 150.0], small_config, profile=profile)
    p_hats = [row.p_hat for row in table.rows]
    assert p_hats == sorted(p_hats)
    # 150 ln 4 exceeds t_max, so the last row is the finite-horizon ruin probability
    assert table.rows[-1].p_hat == table.psi_hat
    assert table.rows[0].rate == pytest.approx((1 + 0.5) ** 2 / (4 * 0.5))


def test_ruin_time_cdf_rejects_levels_below_one(reference_bm, small_config):
    with pytest.raises(ConfigError):
        estimate_ruin_time_cdf(reference_bm, 1.0, [1.0, 2.0], small_config)


# ---------------------------------------------------------------------------
# Cramér constant
# ---------------------------------------------------------------------------

def test_constant_is_scale_equivariant_on_samples(reference_bm, small_config):
    m, q, l_bar, inf_z = sample_constant_inputs(reference_bm, small_config)
    w, mu_star, k = 1.3, 0.8, 2.5
    base = cramer_constant_from_samples(m, q, l_bar, inf_z, w, mu_star)
    scaled = cramer_constant_from_samples(m, k * q, k * l_bar, k * inf_z, w, mu_star)
    assert scaled.estimate == pytest.approx(k ** w * base.estimate, rel=1e-12)
    assert scaled.standard_error == pytest.approx(k ** w * base.standard_error, rel=1e-12)


def test_constant_scales_with_eta(reference_bm, small_config):
    """Scaling η by k scales Z by k and C₋ by k^w; the ξ draws are unchanged."""
    k = 3.0
    scaled_model = validate(BrownianDriftModel(
        gamma_xi=reference_bm.gamma_xi,
        gamma_eta=k * reference_bm.gamma_eta,
        sigma_xi2=reference_bm.sigma_xi2,
        sigma_eta2=k * k * reference_bm.sigma_eta2,
    ))
    profile = lundberg_and_profile(reference_bm)
    base = estimate_cramer_constant(reference_bm, profile, small_config)
    scaled = estimate_cramer_constant(scaled_model, lundberg_and_profile(scaled_model), small_config)
    assert scaled.estimate == pytest.approx(k ** profile.w * base.estimate, rel=1e-9)


def test_constant_is_positive_for_brownian_reference(reference_bm, small_config):
    profile = lundberg_and_profile(reference_bm)
    estimate = estimate_cramer_constant(reference_bm, profile, small_config)
    assert estimate.estimate > 0
    assert estimate.ci_lo <= estimate.estimate <= estimate.ci_hi
    assert len(estimate.block_means) == small_config.constant_blocks
    assert estimate.n_samples == small_config.constant_paths


def test_constant_needs_samples_for_every_block():
    values = np.ones(5)
    with pytest.raises(ZeroPathsError):
        cramer_constant_from_samples(values, values, values, values, 1.0, 1.0, blocks=20)


# ---------------------------------------------------------------------------
# Asymptotic fit
# ---------------------------------------------------------------------------

def test_fit_recovers_exact_power_law():
    curve = _synthetic_curve(lambda z: 0.3 / z, [5.0, 10.0, 20.0, 40.0], 1_000_000)
    fit = fit_cramer_asymptotics(curve, w=1.0, mu_star=1.0)
    assert fit.slope == pytest.approx(-1.0, abs=1e-9)
    assert fit.slope_ci_lo <= -1.0 <= fit.slope_ci_hi
    np.testing.assert_allclose(fit.plateau, 0.3, rtol=1e-12)
    assert fit.plateau_ratio == pytest.approx(1.0)
    assert fit.plateau_mean == pytest.approx(0.3)
    assert fit.plateau_ci_lo <= 0.3 <= fit.plateau_ci_hi


def test_fit_interval_coverage_on_binomial_noise():
    rng = np.random.default_rng(21)
    z_grid = np.array([5.0, 10.0, 20.0, 40.0])
    constant, w, n = 0.3, 1.0, 100_000
    covered = 0
    replications = 200
    for _ in range(replications):
        counts = rng.binomial(n, constant * z_grid ** -w)
        rows = []
        for z, k in zip(z_grid, counts):
            lo, hi = wilson_interval(int(k), n)
            rows.append(RuinCurveRow(z=z, psi_hat=k / n, ci_lo=lo, ci_hi=hi, n_paths=n, n_ruined=int(k),
                                     censored_frac=0.0, underflow_frac=0.0))
        fit = fit_cramer_asymptotics(RuinCurve(rows=rows, step=0.01, theta=30.0, t_max=200.0, seed=0), w=w)
        covered += fit.slope_ci_lo <= -w <= fit.slope_ci_hi
    assert covered >= 0.9 * replications


def test_fit_needs_four_levels_with_ruins():
    curve = _synthetic_curve(lambda z: 0.3 / z, [5.0, 10.0, 20.0, 40.0], 1000)
    with pytest.raises(InsufficientRuinsError):
        fit_cramer_asymptotics(curve, w=1.0)


# ---------------------------------------------------------------------------
# Empirical Laplace check
# ---------------------------------------------------------------------------

def test_laplace_check_at_origin(reference_bm):
    report = empirical_laplace_check(reference_bm, [0.0], 100, make_stream(1, StreamTag.LAPLACE))
    row = report.rows[0]
    assert row.estimate == 0.0 and row.closed_form == 0.0
    assert row.z_score == 0.0
    assert not row.unstable


def test_laplace_check_brownian_agrees(reference_bm):
    report = empirical_laplace_check(reference_bm, [0.25, 0.5, 1.0], 50_000, make_stream(2, StreamTag.LAPLACE))
    assert report.max_abs_z <= 4.0
    assert len(report.to_frame()) == 3


@pytest.mark.parametrize(
    "model_name, alphas",
    [
        ("reference_bm", np.linspace(-0.4, 1.2, 11)),
        ("cp_gaussian", np.linspace(-0.4, 1.2, 11)),
        ("gaussian_jd", np.linspace(-0.4, 1.2, 11)),
        ("laplace_jd", np.linspace(-0.4, 1.0, 11)),
        ("variance_gamma", np.linspace(-0.4, 0.8, 11)),
    ],
)
def test_laplace_check_on_eleven_points(request, model_name, alphas):
    model = request.getfixturevalue(model_name)
    report = empirical_laplace_check(model, alphas, 100_000, make_stream(31, StreamTag.LAPLACE))
    assert len(report.rows) == 11
    assert report.max_abs_z <= 3.0


def test_laplace_check_flags_heavy_tail_near_domain_edge(laplace_jd):
    flagged = 0
    for seed in range(10):
        report = empirical_laplace_check(laplace_jd, [2.99], 2000, make_stream(seed, StreamTag.LAPLACE))
        flagged += report.rows[0].unstable
    assert flagged >= 5


def test_laplace_check_rejects_zero_samples(reference_bm):
    with pytest.raises(ZeroPathsError):
        empirical_laplace_check(reference_bm, [0.5], 0, make_stream(0, StreamTag.LAPLACE))


# ---------------------------------------------------------------------------
# Desk-scale reproduction of the Cramér limits
# ---------------------------------------------------------------------------

DESK_CONFIG = """
[model]
variant = "brownian_drift"
gamma_xi = 1.0
gamma_eta = -1.0
sigma_xi2 = 2.0
sigma_eta2 = 1.0

[simulation]
seed = 20240601
step = 0.0078125
n_paths = 1000000
batch_size = 8192
workers = 4

[analysis]
z_grid = [5.0, 10.0, 20.0, 40.0, 80.0]
x_grid = [0.5, 1.0, 2.0, 4.0, 8.0]
ldp_z = 40.0
constant_paths = 1000000

[output]
plots = false
"""


@pytest.mark.slow
def test_desk_scale_cramer_limits(tmp_path):
    execute_command("verify", parse_config(DESK_CONFIG), tmp_path)
    report = json.loads((tmp_path / "verify_report.json").read_text())
    verdicts = {check["name"]: check["passed"] for check in report["checks"]}
    assert verdicts["slope_within_tolerance"]
    assert verdicts["slope_interval_covers_minus_w"]
    assert verdicts["plateau_ratio"]
    assert verdicts["constant_within_factor_of_plateau"]
    assert verdicts["constant_and_plateau_intervals_overlap"]
    assert verdicts["ldp_rates_match_rate_function"]
    assert verdicts["ldp_rates_flat_beyond_tilted_mean"]
    assert verdicts["ldp_rates_decreasing_before_tilted_mean"]
    assert math.isfinite(report["checks"][0]["value"])


@pytest.mark.slow
def test_desk_scale_theta_sensitivity(reference_bm):
    config = EstimationConfig(seed=20240601, n_paths=100_000, batch_size=8192, workers=4)
    levels = [5.0, 10.0, 20.0, 40.0]
    base = estimate_ruin_curve(reference_bm, levels, config)
    raised = estimate_ruin_curve(reference_bm, levels, config.model_copy(update={"theta": 40.0}))
    for low, high in zip(base.rows, raised.rows):
        assert abs(high.psi_hat - low.psi_hat) < (low.ci_hi - low.ci_lo) / 2


@pytest.mark.slow
def test_desk_scale_fit_coverage():
    rng = np.random.default_rng(22)
    z_grid = np.array([5.0, 10.0, 20.0, 40.0, 80.0])
    covered = 0
    for _ in range(1000):
        counts = rng.binomial(1_000_000, 0.3 / z_grid)
        curve = _synthetic_curve(dict(zip(z_grid, counts / 1_000_000)).__getitem__, z_grid, 1_000_000)
        fit = fit_cramer_asymptotics(curve, w=1.0)
        covered += fit.slope_ci_lo <= -1.0 <= fit.slope_ci_hi
    assert covered >= 900
