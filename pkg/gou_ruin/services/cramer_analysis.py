"""
Cramér analysis of the Laplace exponent.

Computes the Lundberg coefficient w (positive root of c), the tilted mean
μ* = c'(w), α₀, x₀, the Fenchel–Legendre transform c* and the finite-time
rate function R, and checks the positivity (A), Cramér (B) and moment (C)
conditions with the per-model sufficient arguments.
"""

import logging
import math
from typing import Callable, Dict, Iterable, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import optimize

from gou_ruin.core.exceptions import NumericalError
from gou_ruin.schemas.model import (
    BrownianDriftModel,
    CPGaussianModel,
    JumpDiffusionModel,
    ModelSpec,
    ModelVariant,
    VarianceGammaModel,
)
from gou_ruin.schemas.profile import (
    ConditionReport,
    ConditionResult,
    ConditionVerdict,
    ConditionWitness,
    CramerProfile,
)
from gou_ruin.services.levy_models import (
    exponent_domain,
    laplace_exponent,
    laplace_exponent_derivatives,
    sample_increments,
)

logger = logging.getLogger(__name__)

ROOT_TOLERANCE = 1e-10
_BRACKET_START = 1e-8
_MAX_EXPANSIONS = 2000


class NoPositiveRootError(NumericalError):
    """Raised when c < 0 on the whole domain right of 0 (the Cramér condition fails)."""
    pass


class NonNegativeDriftDerivativeError(NumericalError):
    """Raised when c'(0) >= 0, i.e. a model bypassed validation."""
    pass


class BelowX0Error(NumericalError):
    """Raised when the rate function is requested at x <= x₀."""
    pass


def _c(model: ModelSpec) -> Callable[[float], float]:
    return lambda alpha: laplace_exponent(model, alpha, strict=False)


def _c_prime(model: ModelSpec) -> Callable[[float], float]:
    return lambda alpha: laplace_exponent_derivatives(model, alpha)[0]


def _gaussian_jump_slope_limit(intensity: float, mean: float, var: float, upward: bool) -> float:
    """Limit of λ d/dα E e^{-αX} for Gaussian X as α → ±∞ (+inf, -inf or 0)."""
    if intensity == 0 or (var == 0 and mean == 0):
        return 0.0
    if var > 0:
        return math.inf if upward else -math.inf
    # Degenerate jumps X ≡ m: λ(-m)e^{-mα}
    if upward:
        return 0.0 if mean > 0 else math.inf
    return -math.inf if mean > 0 else 0.0


def derivative_limits(model: ModelSpec) -> Tuple[float, float]:
    """
    Limits of c'(α) toward the lower and upper ends of the exponent domain.

    Every finite endpoint of the supported models is a singularity where
    c' diverges; on infinite ends the limit follows from the closed forms.
    """
    domain = exponent_domain(model)
    limits = []
    for upward in (False, True):
        endpoint = domain.upper if upward else domain.lower
        sign = math.inf if upward else -math.inf
        if math.isfinite(endpoint):
            limits.append(sign)
            continue
        if isinstance(model, BrownianDriftModel):
            limits.append(sign if model.sigma_xi2 > 0 else -model.gamma_xi)
            continue
        diffusion = model.sigma2 if isinstance(model, JumpDiffusionModel) else 0.0
        if diffusion > 0:
            limits.append(sign)
            continue
        jump = _gaussian_jump_slope_limit(model.intensity, model.m_x, model.sigma_x2, upward)
        limits.append(-model.gamma_xi + jump)
    return limits[0], limits[1]


def _expand_toward(
    func: Callable[[float], float],
    lower: float,
    start: float,
    upper: float,
) -> Tuple[float, float]:
    """
    Walk right from ``start`` until ``func`` turns positive; ``func(lower)`` must be <= 0.

    Doubles on infinite domains, halves the distance to a finite ``upper``,
    and backs off when ``func`` overflows. Returns (a, b) with func(a) <= 0 < func(b).

    Raises:
        NoPositiveRootError: No sign change before the walk stalls
    """
    a, b = lower, start
    value = func(b)
    for _ in range(_MAX_EXPANSIONS):
        if value > 0 and math.isfinite(value):
            return a, b
        if math.isinf(value) or math.isnan(value):
            b = 0.5 * (a + b)
        else:
            a = b
            b = 2.0 * b if math.isinf(upper) else b + 0.5 * (upper - b)
            if b == a:
                break
        value = func(b)
    raise NoPositiveRootError(f"no sign change found right of {start} (domain upper end {upper})")


def find_lundberg_root(model: ModelSpec) -> float:
    """
    Positive root w of c on (0, α_hi).

    The search starts from [1e-8, min(1, 0.9 α_hi)], expands the right end
    toward α_hi until c changes sign, solves with Brent's method and polishes
    with one Newton step.

    Raises:
        NonNegativeDriftDerivativeError: c'(0) >= 0
        NoPositiveRootError: c stays negative right of 0
    """
    domain = exponent_domain(model)
    slope_at_zero = laplace_exponent_derivatives(model, 0.0)[0]
    if slope_at_zero >= 0:
        raise NonNegativeDriftDerivativeError(f"c'(0) = {slope_at_zero} must be < 0")

    c = _c(model)
    a, b = _expand_toward(c, _BRACKET_START, min(1.0, 0.9 * domain.upper), domain.upper)

    w = optimize.brentq(c, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)

    # One Newton polish; kept only if it reduces the residual.
    slope = _c_prime(model)(w)
    if slope > 0:
        polished = w - c(w) / slope
        if domain.contains(polished) and polished > 0 and abs(c(polished)) < abs(c(w)):
            w = polished

    residual = abs(c(w))
    if residual > ROOT_TOLERANCE:
        raise NumericalError(f"Lundberg root residual {residual:.3e} exceeds {ROOT_TOLERANCE}")
    return w


def lundberg_and_profile(model: ModelSpec) -> CramerProfile:
    """
    Compute the Cramér profile of a validated model.

    Args:
        model: Validated model with c'(0) < 0

    Returns:
        Profile with w, μ* = c'(w), α₀, x₀ and the exponent domain

    Raises:
        NonNegativeDriftDerivativeError: c'(0) >= 0
        NoPositiveRootError: Condition B fails

    Example:
        >>> m = BrownianDriftModel(gamma_xi=1, gamma_eta=-1, sigma_xi2=2, sigma_eta2=1)
        >>> p = lundberg_and_profile(m)
        >>> round(p.w, 12), round(p.mu_star, 12), p.x0
        (1.0, 1.0, 0.0)
    """
    domain = exponent_domain(model)
    w = find_lundberg_root(model)
    mu_star = _c_prime(model)(w)

    # For all supported models the moment bound on Z_1 reaches the ξ domain end;
    # it is a certified value only when that end exceeds 1.
    alpha0 = domain.upper
    alpha0_certified = alpha0 > 1.0

    upper_limit = derivative_limits(model)[1]
    x0 = 0.0 if math.isinf(upper_limit) else 1.0 / upper_limit

    profile = CramerProfile(
        w=w,
        mu_star=mu_star,
        alpha0=alpha0,
        alpha0_certified=alpha0_certified,
        x0=x0,
        domain=domain,
        root_residual=abs(laplace_exponent(model, w)),
    )
    logger.debug(f"Cramér profile for {model.variant}: w={w:.12g}, mu_star={mu_star:.12g}, x0={x0:.6g}")
    return profile


def _tail_limit(func: Callable[[float], float], sign: float) -> float:
    """Limit of ``func`` along α = sign·2^k, stopping once successive values agree."""
    previous = func(sign)
    for k in range(1, 1024):
        current = func(sign * 2.0 ** k)
        if not math.isfinite(current):
            return current
        if abs(current - previous) <= 1e-13 * (1.0 + abs(current)):
            return current
        previous = current
    return previous


def fenchel_legendre(model: ModelSpec, v: float) -> float:
    """
    Convex conjugate c*(v) = sup_α {αv - c(α)}.

    Solves c'(α) = v by bracketing from 0 toward the side where the solution
    lies. When v is outside the range of c' the supremum is the limit toward
    the domain end (+inf when αv - c(α) grows without bound).

    Args:
        model: Validated model
        v: Argument

    Returns:
        c*(v), possibly +inf
    """
    domain = exponent_domain(model)
    c = _c(model)
    c_prime = _c_prime(model)
    slope_at_zero = c_prime(0.0)
    if v == slope_at_zero:
        return 0.0

    upward = v > slope_at_zero
    endpoint = domain.upper if upward else domain.lower
    lower_limit, upper_limit = derivative_limits(model)
    limit = upper_limit if upward else lower_limit
    sign = 1.0 if upward else -1.0

    if (upward and v >= limit) or (not upward and v <= limit):
        if v != limit:
            return math.inf
        return _tail_limit(lambda alpha: alpha * v - c(alpha), sign)

    def gap(alpha: float) -> float:
        # Oriented so the walk always moves toward positive values.
        value = c_prime(sign * alpha) - v if domain.contains(sign * alpha) else math.inf
        return sign * value if math.isfinite(value) else math.inf

    a, b = _expand_toward(gap, 0.0, min(1.0, 0.5 * abs(endpoint)), abs(endpoint))
    root = optimize.brentq(gap, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    alpha_hat = sign * root
    return alpha_hat * v - c(alpha_hat)


def rate_function(profile: CramerProfile, model: ModelSpec, x: float) -> float:
    """
    Finite-time rate R(x) = x c*(1/x) on (x₀, 1/μ*), w on [1/μ*, ∞).

    Raises:
        BelowX0Error: x <= x₀
    """
    if x <= profile.x0:
        raise BelowX0Error(f"x={x} must exceed x0={profile.x0}")
    if x >= profile.x_flat:
        return profile.w
    return x * fenchel_legendre(model, 1.0 / x)


def rate_function_table(profile: CramerProfile, model: ModelSpec, xs: Iterable[float]) -> pd.DataFrame:
    """
    Tabulate R on a grid of x values above x₀.

    Returns:
        DataFrame with columns x, rate, flat (True where R = w)
    """
    rows = []
    for x in xs:
        rows.append({"x": float(x), "rate": rate_function(profile, model, x), "flat": bool(x >= profile.x_flat)})
    return pd.DataFrame(rows, columns=["x", "rate", "flat"])


def condition_c_witness(model: ModelSpec, w: float) -> Optional[ConditionWitness]:
    """
    Exponents (ε, p, q) with E e^{-max{1,w+ε}pξ_1} < ∞ and E|η_1|^{max{1,w+ε}q} < ∞.

    ε = min(0.1, (α_hi - w)/4); p is the geometric midpoint of (1, α_hi/k)
    on bounded domains and 2 otherwise. η moments of every order are finite
    for all supported models, so only the ξ side can fail.

    Returns:
        The witness, or None when α_hi / max{1, w+ε} <= 1
    """
    domain = exponent_domain(model)
    epsilon = min(0.1, (domain.upper - w) / 4.0) if domain.is_bounded_above else 0.1
    if epsilon <= 0:
        return None
    k = max(1.0, w + epsilon)
    if not domain.is_bounded_above:
        p = 2.0
    else:
        ratio = domain.upper / k
        if ratio <= 1.0:
            return None
        p = math.sqrt(ratio)
    return ConditionWitness(w=w, epsilon=epsilon, k=k, p=p, q=p / (p - 1.0))


Verdict = Tuple[ConditionVerdict, str]


def _cp_gaussian_positivity(model: CPGaussianModel) -> Optional[Verdict]:
    cov = model.jump_covariance
    if model.intensity > 0 and cov[0, 0] > 0 and np.linalg.det(cov) > 0:
        return (
            ConditionVerdict.VERIFIED,
            "Gaussian jump marks with positive definite covariance give P(X <= 0, Y < 0) > 0",
        )
    return None


def _brownian_positivity(model: BrownianDriftModel) -> Optional[Verdict]:
    cov = model.covariance
    if cov[0, 0] > 0 and np.linalg.det(cov) > 0:
        return ConditionVerdict.VERIFIED, "non-degenerate Gaussian part"
    return None


def _jump_diffusion_positivity(model: JumpDiffusionModel) -> Optional[Verdict]:
    if model.sigma2 > 0:
        return ConditionVerdict.VERIFIED, "non-degenerate shared Brownian part"
    return None


def _variance_gamma_positivity(model: VarianceGammaModel) -> Optional[Verdict]:
    if model.gamma_eta <= 0:
        return ConditionVerdict.VERIFIED, "gamma_eta <= 0 so the lower bound of η paths is negative"
    return ConditionVerdict.FAILED, f"gamma_eta = {model.gamma_eta} > 0 breaks the positivity argument"


# Sufficient arguments for Condition A per model family; None means none applies
CONDITION_A_CHECKS: Dict[ModelVariant, Callable[..., Optional[Verdict]]] = {
    ModelVariant.CP_GAUSSIAN: _cp_gaussian_positivity,
    ModelVariant.BROWNIAN_DRIFT: _brownian_positivity,
    ModelVariant.JUMP_DIFFUSION: _jump_diffusion_positivity,
    ModelVariant.VARIANCE_GAMMA: _variance_gamma_positivity,
}


def _condition_a(model: ModelSpec) -> ConditionResult:
    outcome = CONDITION_A_CHECKS[ModelVariant(model.variant)](model)
    if outcome is None:
        return ConditionResult(
            verdict=ConditionVerdict.NOT_VERIFIED, reason="no sufficient argument applies to these parameters"
        )
    verdict, reason = outcome
    return ConditionResult(verdict=verdict, reason=reason)


def check_conditions(model: ModelSpec, profile: Optional[CramerProfile] = None) -> ConditionReport:
    """
    Check Conditions A, B and C.

    Condition A is verified only through the per-model sufficient checks and
    otherwise reported as not verified. Condition B holds iff the Lundberg
    root exists. Condition C is verified by an explicit moment witness.

    Args:
        model: Validated model
        profile: Precomputed profile; computed here when omitted

    Returns:
        The condition report (never raises for failed conditions)
    """
    condition_a = _condition_a(model)

    if profile is None:
        try:
            profile = lundberg_and_profile(model)
        except (NoPositiveRootError, NonNegativeDriftDerivativeError) as e:
            logger.warning(f"Condition B fails for {model.variant}: {e}")
            return ConditionReport(
                condition_a=condition_a,
                condition_b=ConditionResult(verdict=ConditionVerdict.FAILED, reason=str(e)),
                condition_c=ConditionResult(
                    verdict=ConditionVerdict.NOT_VERIFIED,
                    reason="no Lundberg coefficient to build the moment witness from",
                ),
            )

    condition_b = ConditionResult(
        verdict=ConditionVerdict.VERIFIED,
        reason=f"root w={profile.w:.12g} with |c(w)|={profile.root_residual:.2e}",
    )

    witness = condition_c_witness(model, profile.w)
    if witness is None:
        condition_c = ConditionResult(
            verdict=ConditionVerdict.FAILED,
            reason=f"no p > 1 with max(1, w + eps) * p inside the exponent domain (upper end {profile.domain.upper})",
        )
    else:
        condition_c = ConditionResult(
            verdict=ConditionVerdict.VERIFIED,
            reason=f"k*p = {witness.k * witness.p:.6g} inside the exponent domain; all moments of η finite",
        )

    return ConditionReport(
        condition_a=condition_a,
        condition_b=condition_b,
        condition_c=condition_c,
        witness=witness,
    )


def tilted_mean_monte_carlo(
    model: ModelSpec,
    w: float,
    n: int,
    rng: np.random.Generator,
) -> Tuple[float, float]:
    """
    Monte Carlo estimate of μ* = -E[ξ_1 e^{-wξ_1}] from ``n`` unit increments.

    Returns:
        (estimate, standard error)
    """
    sample = sample_increments(model, 1.0, n, rng)
    values = -sample.d_xi * np.exp(-w * sample.d_xi)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(n))
