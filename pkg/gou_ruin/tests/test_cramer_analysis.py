import math

import numpy as np
import pytest
from pydantic import ValidationError

from gou_ruin.core.streams import StreamTag, make_stream
from gou_ruin.schemas.model import (
    BrownianDriftModel,
    CPGaussianModel,
    ExponentDomain,
    JumpDiffusionModel,
    JumpLaw,
    ModelVariant,
    VarianceGammaModel,
)
from gou_ruin.schemas.profile import ConditionVerdict, CramerProfile
from gou_ruin.services.cramer_analysis import (
    CONDITION_A_CHECKS,
    BelowX0Error,
    ROOT_TOLERANCE,
    check_conditions,
    condition_c_witness,
    derivative_limits,
    fenchel_legendre,
    lundberg_and_profile,
    rate_function,
    rate_function_table,
    tilted_mean_monte_carlo,
)
from gou_ruin.services.levy_models import (
    exponent_domain,
    unit_jump_model,
    laplace_exponent,
    laplace_exponent_derivatives,
    validate,
)


def _random_models(family: str, count: int = 50, seed: int = 2024):
    rng = np.random.default_rng(seed)
    models = []
    for _ in range(count):
        if family == "brownian_drift":
            model = BrownianDriftModel(
                gamma_xi=rng.uniform(0.1, 2.0),
                gamma_eta=-rng.uniform(0.1, 1.0),
                sigma_xi2=rng.uniform(0.2, 3.0),
                sigma_eta2=rng.uniform(0.2, 2.0),
            )
        elif family == "cp_gaussian":
            intensity = rng.uniform(0.2, 3.0)
            m_x = rng.uniform(-0.5, 1.0)
            gamma_xi = max(rng.uniform(0.05, 1.0), 0.1 - intensity * m_x)
            model = CPGaussianModel(
                gamma_xi=gamma_xi,
                gamma_eta=-rng.uniform(0.1, 1.0),
                intensity=intensity,
                m_x=m_x,
                m_y=rng.uniform(-1.0, 1.0),
                sigma_x2=rng.uniform(0.1, 2.0),
                sigma_xy=0.0,
                sigma_y2=rng.uniform(0.1, 2.0),
            )
        elif family == "jump_diffusion":
            model = JumpDiffusionModel(
                gamma_xi=rng.uniform(0.1, 2.0),
                gamma_eta=-rng.uniform(0.1, 1.0),
                sigma2=rng.uniform(0.2, 2.0),
                intensity=rng.uniform(0.2, 2.0),
                jump_law=JumpLaw.LAPLACE,
                rho=rng.uniform(1.5, 4.0),
            )
        else:
            shape = rng.uniform(0.5, 2.0)
            rate = rng.uniform(0.5, 3.0)
            mu = rng.uniform(-0.5, 1.0)
            model = VarianceGammaModel(
                gamma_xi=max(rng.uniform(0.1, 1.0), 0.1 - shape * mu / rate),
                gamma_eta=-rng.uniform(0.0, 1.0),
                mu=mu,
                shape=shape,
                rate=rate,
            )
        models.append(validate(model))
    return models


# ---------------------------------------------------------------------------
# Cramér profile
# ---------------------------------------------------------------------------

def test_brownian_reference_profile(reference_bm):
    profile = lundberg_and_profile(reference_bm)
    assert profile.w == pytest.approx(1.0, abs=1e-8)
    assert profile.mu_star == pytest.approx(1.0, abs=1e-8)
    assert profile.x0 == 0.0
    assert profile.alpha0_is_infinite
    assert profile.x_flat == pytest.approx(1.0, abs=1e-8)


def test_laplace_jump_root_below_rho(laplace_jd):
    profile = lundberg_and_profile(laplace_jd)
    assert 0 < profile.w < 3.0
    assert abs(laplace_exponent(laplace_jd, profile.w)) <= ROOT_TOLERANCE
    assert profile.alpha0 == 3.0
    assert profile.alpha0_certified
    assert profile.x0 == 0.0


def test_variance_gamma_root_exists(variance_gamma):
    profile = lundberg_and_profile(variance_gamma)
    assert exponent_domain(variance_gamma).contains(profile.w)
    assert abs(laplace_exponent(variance_gamma, profile.w)) <= ROOT_TOLERANCE
    assert profile.mu_star > 0


def test_profile_invariants(any_model):
    profile = lundberg_and_profile(any_model)
    assert profile.w > 0
    assert profile.mu_star == pytest.approx(laplace_exponent_derivatives(any_model, profile.w)[0])
    assert 0 <= profile.x0 < profile.x_flat
    assert profile.w < profile.alpha0


@pytest.mark.parametrize("family", ["brownian_drift", "cp_gaussian", "jump_diffusion", "variance_gamma"])
def test_root_residual_on_random_parameters(family):
    for model in _random_models(family):
        profile = lundberg_and_profile(model)
        domain = exponent_domain(model)
        assert domain.contains(profile.w)
        assert abs(laplace_exponent(model, profile.w)) <= ROOT_TOLERANCE
        if family == "jump_diffusion":
            assert profile.w < model.rho


def test_unit_jump_model_has_no_root():
    report = check_conditions(unit_jump_model())
    assert report.condition_b.verdict == ConditionVerdict.FAILED
    assert report.condition_c.verdict == ConditionVerdict.NOT_VERIFIED


def test_derivative_limits(reference_bm, symmetric_vg):
    assert derivative_limits(reference_bm) == (-math.inf, math.inf)
    assert derivative_limits(symmetric_vg) == (-math.inf, math.inf)
    drift_only = BrownianDriftModel(gamma_xi=1.0, gamma_eta=-1.0, sigma_xi2=0.0, sigma_eta2=1.0)
    assert derivative_limits(drift_only) == (-1.0, -1.0)


# ---------------------------------------------------------------------------
# Fenchel–Legendre transform and rate function
# ---------------------------------------------------------------------------

def test_brownian_conjugate(reference_bm):
    assert fenchel_legendre(reference_bm, 1.0) == pytest.approx(1.0, abs=1e-10)
    for v in (-2.0, -0.5, 0.5, 3.0):
        assert fenchel_legendre(reference_bm, v) == pytest.approx((v + 1.0) ** 2 / 4.0, abs=1e-10)


def test_conjugate_envelope_identity(any_model):
    domain = exponent_domain(any_model)
    for alpha in (-0.5, 0.3, 1.0):
        if not domain.contains(alpha):
            continue
        v = laplace_exponent_derivatives(any_model, alpha)[0]
        expected = alpha * v - laplace_exponent(any_model, alpha)
        assert fenchel_legendre(any_model, v) == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("fixture", ["reference_bm", "laplace_jd", "variance_gamma"])
def test_fenchel_young_inequality(request, fixture):
    model = request.getfixturevalue(fixture)
    domain = exponent_domain(model)
    rng = np.random.default_rng(5)
    lo, hi = max(domain.lower, -4.0), min(domain.upper, 4.0)
    alphas = rng.uniform(lo, hi, 200) * 0.98
    values = np.array([laplace_exponent(model, a) for a in alphas])
    for v in rng.uniform(-4.0, 4.0, 50):
        conjugate = fenchel_legendre(model, v)
        assert np.all(conjugate >= alphas * v - values - 1e-9)


def test_conjugate_is_convex(laplace_jd):
    grid = np.linspace(-3.0, 3.0, 61)
    values = np.array([fenchel_legendre(laplace_jd, v) for v in grid])
    assert np.all(np.isfinite(values))
    assert np.all(values[:-2] - 2 * values[1:-1] + values[2:] >= -1e-9)


def test_conjugate_matches_dense_grid_supremum(symmetric_vg):
    alphas = np.linspace(-2.0, 2.0, 40_001)[1:-1]
    values = np.array([laplace_exponent(symmetric_vg, a) for a in alphas])
    v = -3.0
    dense = np.max(alphas * v - values)
    assert fenchel_legendre(symmetric_vg, v) >= dense - 1e-9
    assert fenchel_legendre(symmetric_vg, v) == pytest.approx(dense, abs=1e-3)


def test_conjugate_is_infinite_beyond_derivative_range():
    drift_only = BrownianDriftModel(gamma_xi=1.0, gamma_eta=-1.0, sigma_xi2=0.0, sigma_eta2=1.0)
    assert fenchel_legendre(drift_only, 0.0) == math.inf
    assert fenchel_legendre(drift_only, -1.0) == 0.0


def test_brownian_rate_function(reference_bm):
    profile = lundberg_and_profile(reference_bm)
    assert rate_function(profile, reference_bm, 0.5) == pytest.approx(1.125, abs=1e-9)
    assert rate_function(profile, reference_bm, 2.0) == profile.w
    assert rate_function(profile, reference_bm, 1.0 - 1e-6) == pytest.approx(1.0, abs=1e-4)


def test_rate_function_below_x0(reference_bm):
    profile = lundberg_and_profile(reference_bm)
    with pytest.raises(BelowX0Error):
        rate_function(profile, reference_bm, 0.0)


def test_cramer_point_identity(laplace_jd):
    profile = lundberg_and_profile(laplace_jd)
    value = profile.x_flat * fenchel_legendre(laplace_jd, profile.mu_star)
    assert value == pytest.approx(profile.w, abs=1e-8)


@pytest.mark.parametrize("fixture", ["reference_bm", "laplace_jd", "cp_gaussian", "variance_gamma"])
def test_rate_function_shape(request, fixture):
    model = request.getfixturevalue(fixture)
    profile = lundberg_and_profile(model)
    xs = np.linspace(profile.x0 + 0.01 * (profile.x_flat - profile.x0), 2.0 * profile.x_flat, 200)
    table = rate_function_table(profile, model, xs)
    assert list(table.columns) == ["x", "rate", "flat"]

    steep = table[~table["flat"]]["rate"].to_numpy()
    assert np.all(np.diff(steep) < -1e-12)
    assert np.all(table[table["flat"]]["rate"] == profile.w)
    near = rate_function(profile, model, profile.x_flat * (1.0 - 1e-7))
    assert near == pytest.approx(profile.w, abs=1e-6)


# ---------------------------------------------------------------------------
# Conditions
# ---------------------------------------------------------------------------

def test_compound_poisson_conditions_verified(cp_gaussian):
    report = check_conditions(cp_gaussian)
    assert report.all_verified
    assert report.summary() == {"A": "verified", "B": "verified", "C": "verified"}


def test_variance_gamma_positive_eta_drift_fails_condition_a():
    model = VarianceGammaModel(gamma_xi=0.5, gamma_eta=0.5, mu=1.0, shape=1.0, rate=2.0)
    report = check_conditions(model)
    assert report.condition_a.verdict == ConditionVerdict.FAILED
    assert report.condition_b.verified


def test_laplace_jump_moment_witness(laplace_jd):
    report = check_conditions(laplace_jd)
    witness = report.witness
    assert report.condition_c.verified
    assert witness is not None
    assert witness.k == max(1.0, witness.w + witness.epsilon)
    assert witness.k * witness.p < laplace_jd.rho
    assert witness.q == pytest.approx(witness.p / (witness.p - 1.0))


def test_moment_witness_near_domain_edge(laplace_jd):
    witness = condition_c_witness(laplace_jd, 2.99)
    assert witness is not None
    assert witness.k * witness.p < 3.0


def test_moment_witness_missing_when_domain_ends_below_one():
    # Exponent domain (−1 − √1.6, −1 + √1.6) ends below 1, so max{1, w + ε}·p leaves it.
    model = VarianceGammaModel(gamma_xi=0.5, gamma_eta=-0.5, mu=-1.0, shape=1.0, rate=0.3)
    assert exponent_domain(model).upper < 1.0
    assert condition_c_witness(model, 0.2) is None


def test_degenerate_compound_marks_leave_condition_a_open():
    degenerate = CPGaussianModel(gamma_xi=1.0, gamma_eta=-1.0, intensity=1.0, m_x=0.5, m_y=-0.5,
                                 sigma_x2=1.0, sigma_xy=1.0, sigma_y2=1.0)
    report = check_conditions(degenerate)
    assert report.condition_a.verdict == ConditionVerdict.NOT_VERIFIED
    assert not report.all_verified


def test_every_model_variant_has_a_positivity_check():
    assert set(CONDITION_A_CHECKS) == set(ModelVariant)


def test_unbounded_domain_witness(reference_bm, laplace_jd):
    assert not exponent_domain(reference_bm).is_bounded_above
    assert exponent_domain(laplace_jd).is_bounded_above
    witness = condition_c_witness(reference_bm, 1.0)
    assert witness.p == 2.0 and witness.epsilon == 0.1


def test_tilted_mean_cross_check(reference_bm):
    profile = lundberg_and_profile(reference_bm)
    estimate, se = tilted_mean_monte_carlo(reference_bm, profile.w, 100_000, make_stream(21, StreamTag.TILTED_MEAN))
    assert abs(estimate - profile.mu_star) <= 4 * se


# ---------------------------------------------------------------------------
# Profile invariants
# ---------------------------------------------------------------------------

def _profile_fields(**overrides):
    fields = dict(
        w=1.0,
        mu_star=1.0,
        alpha0=math.inf,
        alpha0_certified=True,
        x0=0.0,
        domain=ExponentDomain(lower=-math.inf, upper=math.inf),
        root_residual=0.0,
    )
    fields.update(overrides)
    return fields


def test_profile_accepts_reference_values():
    assert CramerProfile(**_profile_fields()).x_flat == 1.0


@pytest.mark.parametrize(
    "overrides",
    [
        {"alpha0": 0.8, "domain": ExponentDomain(lower=-1.0, upper=0.8)},
        {"alpha0": 2.0, "domain": ExponentDomain(lower=-1.0, upper=0.8)},
        {"x0": 1.0},
        {"x0": 0.6, "mu_star": 2.0},
        {"x0": -0.1},
    ],
)
def test_profile_rejects_inconsistent_ordering(overrides):
    with pytest.raises(ValidationError):
        CramerProfile(**_profile_fields(**overrides))


def test_computed_profiles_are_ordered(any_model):
    profile = lundberg_and_profile(any_model)
    assert profile.w < profile.alpha0
    assert 0.0 <= profile.x0 < profile.x_flat
