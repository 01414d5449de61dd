import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import stats

from gou_ruin.core.streams import StreamTag, make_stream
from gou_ruin.schemas.model import CPGaussianModel, VarianceGammaModel
from gou_ruin.services.levy_models import (
    ConditionAViolation,
    DriftViolation,
    NonPositiveDefinite,
    NonPositiveIntensity,
    OutOfDomainError,
    build_model,
    exponent_domain,
    unit_jump_model,
    laplace_exponent,
    laplace_exponent_derivatives,
    mean_drift,
    sample_increment,
    sample_increments,
    sample_jump_marks,
    unchecked_model,
    validate,
)


def _interior_grid(model, points=21):
    domain = exponent_domain(model)
    lo = max(domain.lower, -3.0)
    hi = min(domain.upper, 3.0)
    pad = 0.05 * (hi - lo)
    return np.linspace(lo + pad, hi - pad, points)


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def test_validate_accepts_positive_compound_drift():
    model = build_model({
        "variant": "cp_gaussian", "gamma_xi": 0.1, "gamma_eta": -1.0, "intensity": 1.0,
        "m_x": 0.5, "m_y": 0.0, "sigma_x2": 1.0, "sigma_y2": 1.0,
    })
    assert isinstance(model, CPGaussianModel)
    assert mean_drift(model) == pytest.approx(0.6)


def test_validate_rejects_negative_compound_drift():
    with pytest.raises(DriftViolation):
        build_model({
            "variant": "cp_gaussian", "gamma_xi": -1.0, "gamma_eta": -1.0, "intensity": 1.0,
            "m_x": 0.5, "m_y": 0.0, "sigma_x2": 1.0, "sigma_y2": 1.0,
        })


def test_validate_rejects_zero_intensity():
    model = unchecked_model(
        "cp_gaussian", gamma_xi=1.0, gamma_eta=-1.0, intensity=0.0,
        m_x=0.0, m_y=0.0, sigma_x2=1.0, sigma_y2=1.0,
    )
    with pytest.raises(NonPositiveIntensity):
        validate(model)


def test_validate_rejects_degenerate_covariance():
    model = unchecked_model("brownian_drift", gamma_xi=1.0, gamma_eta=-1.0, sigma_xi2=1.0, sigma_xieta=1.0,
                            sigma_eta2=1.0)
    with pytest.raises(NonPositiveDefinite):
        validate(model)


def test_unit_jump_model_is_rejected_by_validate():
    with pytest.raises(NonPositiveDefinite):
        validate(unit_jump_model())


def test_variance_gamma_positive_eta_drift_violates_condition_a():
    model = VarianceGammaModel(gamma_xi=0.5, gamma_eta=0.5, mu=1.0, shape=1.0, rate=2.0)
    with pytest.raises(ConditionAViolation) as excinfo:
        validate(model)
    assert excinfo.value.exit_code == 2
    assert validate(model, allow_condition_a_violation=True) is model


def test_jump_diffusion_drift_uses_gaussian_jump_mean():
    with pytest.raises(DriftViolation):
        build_model({
            "variant": "jump_diffusion", "gamma_xi": 0.5, "gamma_eta": -1.0, "sigma2": 1.0,
            "intensity": 1.0, "m_x": -1.0, "sigma_x2": 0.1,
        })


def test_unknown_model_field_is_rejected():
    with pytest.raises(ValidationError):
        build_model({"variant": "brownian_drift", "gamma_xi": 1.0, "gamma_eta": -1.0,
                     "sigma_xi2": 2.0, "sigma_eta2": 1.0, "kappa": 1.0})


# ---------------------------------------------------------------------------
# Laplace exponent
# ---------------------------------------------------------------------------

def test_brownian_exponent_vanishes_at_one(reference_bm):
    assert laplace_exponent(reference_bm, 1.0) == pytest.approx(0.0, abs=1e-15)


def test_compound_exponent_jump_term_vanishes():
    model = CPGaussianModel(gamma_xi=0.1, gamma_eta=-1.0, intensity=1.0, m_x=0.5, m_y=0.0,
                            sigma_x2=1.0, sigma_y2=1.0)
    assert laplace_exponent(model, 1.0) == pytest.approx(-0.1, abs=1e-14)


def test_variance_gamma_out_of_domain(symmetric_vg):
    with pytest.raises(OutOfDomainError) as excinfo:
        laplace_exponent(symmetric_vg, 2.0)
    assert excinfo.value.domain.lower == pytest.approx(-2.0)
    assert excinfo.value.domain.upper == pytest.approx(2.0)
    assert laplace_exponent(symmetric_vg, 2.0, strict=False) == math.inf


def test_laplace_jump_domain(laplace_jd):
    domain = exponent_domain(laplace_jd)
    assert (domain.lower, domain.upper) == (-3.0, 3.0)
    assert domain.upper_singular
    with pytest.raises(OutOfDomainError):
        laplace_exponent_derivatives(laplace_jd, 3.0)


def test_exponent_is_zero_at_origin(any_model):
    assert laplace_exponent(any_model, 0.0) == 0.0


def test_derivative_at_origin_is_negative(any_model):
    first, second = laplace_exponent_derivatives(any_model, 0.0)
    assert first == pytest.approx(-mean_drift(any_model), rel=1e-12)
    assert first < 0
    assert second > 0


def test_brownian_derivatives(reference_bm):
    assert laplace_exponent_derivatives(reference_bm, 1.0) == pytest.approx((1.0, 2.0))


def test_laplace_jump_derivative_at_origin(laplace_jd):
    assert laplace_exponent_derivatives(laplace_jd, 0.0)[0] == pytest.approx(-1.0)


def test_first_derivative_matches_finite_differences(any_model):
    h = 1e-5
    for alpha in _interior_grid(any_model):
        numeric = (laplace_exponent(any_model, alpha + h) - laplace_exponent(any_model, alpha - h)) / (2 * h)
        first, _ = laplace_exponent_derivatives(any_model, alpha)
        assert abs(numeric - first) <= 1e-6 * max(1.0, abs(first))


def test_second_derivative_matches_finite_differences(any_model):
    h = 1e-5
    for alpha in _interior_grid(any_model):
        upper = laplace_exponent_derivatives(any_model, alpha + h)[0]
        lower = laplace_exponent_derivatives(any_model, alpha - h)[0]
        _, second = laplace_exponent_derivatives(any_model, alpha)
        assert abs((upper - lower) / (2 * h) - second) <= 1e-4 * max(1.0, abs(second))


def test_exponent_is_convex(any_model):
    grid = _interior_grid(any_model, points=101)
    values = np.array([laplace_exponent(any_model, a) for a in grid])
    assert np.all(values[:-2] - 2 * values[1:-1] + values[2:] >= -1e-9)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def test_brownian_increment_moments(reference_bm):
    sample = sample_increments(reference_bm, 1.0, 100_000, make_stream(11, StreamTag.PATH))
    n = len(sample.d_xi)
    mean_se = math.sqrt(reference_bm.sigma_xi2 / n)
    var_se = reference_bm.sigma_xi2 * math.sqrt(2.0 / (n - 1))
    assert abs(sample.d_xi.mean() - reference_bm.gamma_xi) <= 4 * mean_se
    assert abs(sample.d_xi.var(ddof=1) - reference_bm.sigma_xi2) <= 4 * var_se


def test_compound_jump_counts_are_poisson(cp_gaussian):
    counts = sample_increments(cp_gaussian, 1.0, 100_000, make_stream(12, StreamTag.PATH)).jump_counts
    bins = np.arange(6)
    observed = np.array([(counts == k).sum() for k in bins] + [(counts >= 6).sum()])
    probabilities = np.append(stats.poisson.pmf(bins, cp_gaussian.intensity),
                              stats.poisson.sf(5, cp_gaussian.intensity))
    expected = probabilities * len(counts)
    assert stats.chisquare(observed, expected).pvalue > 0.01


def test_compound_mark_correlation(cp_gaussian):
    marks = sample_jump_marks(cp_gaussian, 100_000, make_stream(13, StreamTag.PATH))
    target = cp_gaussian.sigma_xy / math.sqrt(cp_gaussian.sigma_x2 * cp_gaussian.sigma_y2)
    observed = np.corrcoef(marks[:, 0], marks[:, 1])[0, 1]
    se = (1 - target ** 2) / math.sqrt(len(marks))
    assert abs(observed - target) <= 4 * se


def test_variance_gamma_empirical_laplace_transform(variance_gamma):
    d_xi = sample_increments(variance_gamma, 1.0, 100_000, make_stream(14, StreamTag.PATH)).d_xi
    for alpha in np.linspace(-0.4, 0.8, 11):
        values = np.exp(-alpha * d_xi)
        estimate = math.log(values.mean())
        se = values.std(ddof=1) / (math.sqrt(len(values)) * values.mean())
        assert abs(estimate - laplace_exponent(variance_gamma, alpha)) <= 3 * se + 1e-12


def test_single_increment_carries_sorted_jumps(cp_gaussian):
    increment = sample_increment(cp_gaussian, 5.0, make_stream(15, StreamTag.PATH))
    times = [jump.time for jump in increment.jumps]
    assert times == sorted(times)
    assert all(0.0 <= t <= 5.0 for t in times)
    jumps_x = sum(jump.x for jump in increment.jumps)
    jumps_y = sum(jump.y for jump in increment.jumps)
    assert increment.d_xi == pytest.approx(cp_gaussian.gamma_xi * 5.0 + jumps_x)
    assert increment.d_eta == pytest.approx(cp_gaussian.gamma_eta * 5.0 + jumps_y)


def test_jump_diffusion_shares_brownian_motion():
    model = unchecked_model("jump_diffusion", gamma_xi=1.0, gamma_eta=-1.0, sigma2=1.0, intensity=0.0)
    sample = sample_increments(model, 0.5, 1000, make_stream(16, StreamTag.PATH))
    np.testing.assert_allclose(sample.d_xi - sample.d_eta, 2.0 * 0.5)


def test_increment_requires_positive_step(reference_bm):
    with pytest.raises(ValueError):
        sample_increment(reference_bm, 0.0, make_stream(17, StreamTag.PATH))


def test_streams_are_reproducible(variance_gamma):
    first = sample_increments(variance_gamma, 0.25, 64, make_stream(3, StreamTag.PATH, 9))
    second = sample_increments(variance_gamma, 0.25, 64, make_stream(3, StreamTag.PATH, 9))
    np.testing.assert_array_equal(first.d_xi, second.d_xi)
    np.testing.assert_array_equal(first.d_eta, second.d_eta)
