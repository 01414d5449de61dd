"""
Laplace exponents and exact increment samplers of the bivariate Lévy models.

This module validates model parameters, evaluates the closed-form Laplace
exponent c(α) = ln E e^{-αξ_1} and its first two derivatives on the
exponent domain, and samples exact increments of (ξ, η) over any time step.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from gou_ruin.core.exceptions import ConditionGateError, ConfigError, NumericalError
from gou_ruin.schemas.model import (
    BrownianDriftModel,
    CPGaussianModel,
    ExponentDomain,
    JumpDiffusionModel,
    JumpLaw,
    ModelSpec,
    VarianceGammaModel,
    model_adapter,
)

logger = logging.getLogger(__name__)

# Largest argument passed to exp before the result is treated as +inf.
_EXP_LIMIT = 700.0


class ModelValidationError(ConfigError):
    """Custom exception for model parameters violating a model invariant."""
    pass


class DriftViolation(ModelValidationError):
    """Raised when the mean drift constraint of ξ fails."""
    pass


class NonPositiveDefinite(ModelValidationError):
    """Raised when a covariance matrix that must be positive definite is not."""
    pass


class NonPositiveIntensity(ModelValidationError):
    """Raised when a jump intensity is not strictly positive."""
    pass


class ConditionAViolation(ModelValidationError, ConditionGateError):
    """Raised when parameters contradict the sufficient argument for Condition A."""
    exit_code = 2


class OutOfDomainError(NumericalError):
    """Raised when α lies outside the domain where c(α) is finite."""

    def __init__(self, alpha: float, domain: ExponentDomain):
        self.alpha = alpha
        self.domain = domain
        super().__init__(f"alpha={alpha} outside exponent domain ({domain.lower}, {domain.upper})")


@dataclass(frozen=True)
class JumpEvent:
    """A jump at ``time`` within an increment, with marks (x, y) on (ξ, η)."""
    time: float
    x: float
    y: float


@dataclass(frozen=True)
class Increment:
    """One exact increment of (ξ, η) over a step of length ``dt``."""
    dt: float
    d_xi: float
    d_eta: float
    jumps: Tuple[JumpEvent, ...]


@dataclass(frozen=True)
class IncrementSample:
    """Vectorised iid increments of (ξ, η) over steps of length ``dt``."""
    dt: float
    d_xi: np.ndarray
    d_eta: np.ndarray
    jump_counts: np.ndarray


# ---------------------------------------------------------------------------
# Construction and validation
# ---------------------------------------------------------------------------

def _is_positive_definite(cov: np.ndarray) -> bool:
    return bool(cov[0, 0] > 0 and np.linalg.det(cov) > 0)


def validate(model: ModelSpec, allow_condition_a_violation: bool = False) -> ModelSpec:
    """
    Check the invariants of a model record.

    Args:
        model: Model parameters (possibly built without checks)
        allow_condition_a_violation: Log instead of raising when only the
            Condition A constraint of the variance gamma model fails

    Returns:
        The same model when every invariant holds

    Raises:
        NonPositiveIntensity: Jump intensity is not strictly positive
        NonPositiveDefinite: A required covariance is not positive definite
        DriftViolation: The mean drift of ξ is not strictly positive
        ConditionAViolation: Variance gamma model with γ_η > 0

    Example:
        >>> validate(BrownianDriftModel(gamma_xi=1, gamma_eta=-1, sigma_xi2=2, sigma_eta2=1))
        BrownianDriftModel(...)
    """
    if isinstance(model, CPGaussianModel):
        if model.intensity <= 0:
            raise NonPositiveIntensity(f"intensity must be > 0, got {model.intensity}")
        if not _is_positive_definite(model.jump_covariance):
            raise NonPositiveDefinite("jump covariance of (X, Y) must be positive definite")
        drift = model.gamma_xi + model.intensity * model.m_x
        if drift <= 0:
            raise DriftViolation(f"gamma_xi + intensity * m_x must be > 0, got {drift}")

    elif isinstance(model, BrownianDriftModel):
        if model.gamma_xi <= 0:
            raise DriftViolation(f"gamma_xi must be > 0, got {model.gamma_xi}")
        if not _is_positive_definite(model.covariance):
            raise NonPositiveDefinite("covariance of (B_xi, B_eta) must be positive definite")

    elif isinstance(model, JumpDiffusionModel):
        if model.gamma_xi <= 0:
            raise DriftViolation(f"gamma_xi must be > 0, got {model.gamma_xi}")
        if model.intensity <= 0:
            raise NonPositiveIntensity(f"intensity must be > 0, got {model.intensity}")
        drift = model.gamma_xi + model.intensity * model.jump_mean
        if drift <= 0:
            raise DriftViolation(f"gamma_xi + intensity * E[X] must be > 0, got {drift}")

    elif isinstance(model, VarianceGammaModel):
        drift = model.gamma_xi + model.shape * model.mu / model.rate
        if drift <= 0:
            raise DriftViolation(f"gamma_xi + shape * mu / rate must be > 0, got {drift}")
        if model.gamma_eta > 0:
            message = f"gamma_eta must be <= 0 for the Condition A argument, got {model.gamma_eta}"
            if not allow_condition_a_violation:
                raise ConditionAViolation(message)
            logger.warning(f"Accepting model despite condition A violation: {message}")

    return model


def build_model(params: Dict[str, Any], checked: bool = True) -> ModelSpec:
    """
    Build a model from a raw parameter mapping containing a ``variant`` key.

    Args:
        params: Raw parameters, e.g. a parsed configuration section
        checked: Run ``validate`` on the result

    Returns:
        The model record
    """
    model = model_adapter.validate_python(params)
    return validate(model) if checked else model


def unchecked_model(variant: str, **params: Any) -> ModelSpec:
    """
    Build a model without enforcing the invariants of ``validate``.

    Intended for test oracles only: degenerate records (zero intensity, zero
    covariance) have closed-form paths.

    Example:
        >>> drift_only = unchecked_model("cp_gaussian", gamma_xi=1, gamma_eta=-1,
        ...     intensity=0, m_x=0, m_y=0, sigma_x2=0, sigma_y2=0)
    """
    return build_model({"variant": variant, **params}, checked=False)


def unit_jump_model() -> CPGaussianModel:
    """The golden model (ξ, η)_t = (t + N_t, -t) with a unit-rate Poisson process N."""
    return unchecked_model(
        "cp_gaussian",
        gamma_xi=1.0,
        gamma_eta=-1.0,
        intensity=1.0,
        m_x=1.0,
        m_y=0.0,
        sigma_x2=0.0,
        sigma_xy=0.0,
        sigma_y2=0.0,
    )


def mean_drift(model: ModelSpec) -> float:
    """E ξ_1 = -c'(0)."""
    if isinstance(model, CPGaussianModel):
        return model.gamma_xi + model.intensity * model.m_x
    if isinstance(model, BrownianDriftModel):
        return model.gamma_xi
    if isinstance(model, JumpDiffusionModel):
        return model.gamma_xi + model.intensity * model.jump_mean
    return model.gamma_xi + model.shape * model.mu / model.rate


def has_finite_activity_jumps(model: ModelSpec) -> bool:
    """Whether paths carry finitely many jumps whose times can be inserted into the grid."""
    return isinstance(model, (CPGaussianModel, JumpDiffusionModel)) and model.intensity > 0


# ---------------------------------------------------------------------------
# Laplace exponent
# ---------------------------------------------------------------------------

def exponent_domain(model: ModelSpec) -> ExponentDomain:
    """
    Domain of c(α) for the model.

    Gaussian and compound Poisson Gaussian models have full domain; Laplace
    jumps confine α to (-ρ, ρ); the variance gamma model to
    (μ - √(μ²+2λ), μ + √(μ²+2λ)).
    """
    if isinstance(model, JumpDiffusionModel) and model.jump_law == JumpLaw.LAPLACE and model.intensity > 0:
        return ExponentDomain(lower=-model.rho, upper=model.rho, lower_singular=True, upper_singular=True)
    if isinstance(model, VarianceGammaModel):
        root = math.sqrt(model.mu ** 2 + 2.0 * model.rate)
        return ExponentDomain(
            lower=model.mu - root,
            upper=model.mu + root,
            lower_singular=True,
            upper_singular=True,
        )
    return ExponentDomain(lower=-math.inf, upper=math.inf)


def _safe_exp(x: float) -> float:
    return math.inf if x > _EXP_LIMIT else math.exp(x)


def _gaussian_jump_transform(alpha: float, mean: float, var: float) -> Tuple[float, float, float]:
    """E e^{-αX} for X ~ N(mean, var) and its first two α-derivatives."""
    value = _safe_exp(-mean * alpha + 0.5 * var * alpha * alpha)
    slope = -mean + var * alpha
    if math.isinf(value):
        return value, math.copysign(math.inf, slope) if slope else math.inf, math.inf
    return value, slope * value, (var + slope * slope) * value


def _laplace_jump_transform(alpha: float, rho: float) -> Tuple[float, float, float]:
    """E e^{-αX} = ρ²/(ρ²-α²) for Laplace(ρ) jumps and its first two derivatives."""
    gap = rho * rho - alpha * alpha
    value = rho * rho / gap
    first = 2.0 * alpha * rho * rho / (gap * gap)
    second = 2.0 * rho * rho * (rho * rho + 3.0 * alpha * alpha) / (gap ** 3)
    return value, first, second


def _compound_terms(
    intensity: float,
    alpha: float,
    mean: float = 0.0,
    var: float = 0.0,
    rho: Optional[float] = None,
) -> Tuple[float, float, float]:
    """-λ(1 - E e^{-αX}) and its first two α-derivatives; zero when λ = 0."""
    if intensity == 0:
        return 0.0, 0.0, 0.0
    if rho is not None:
        phi, dphi, ddphi = _laplace_jump_transform(alpha, rho)
    else:
        phi, dphi, ddphi = _gaussian_jump_transform(alpha, mean, var)
    return -intensity * (1.0 - phi), intensity * dphi, intensity * ddphi


def _exponent_terms(model: ModelSpec, alpha: float) -> Tuple[float, float, float]:
    """(c, c', c'') at an α inside the domain."""
    if isinstance(model, BrownianDriftModel):
        s2 = model.sigma_xi2
        return -alpha * model.gamma_xi + 0.5 * alpha * alpha * s2, -model.gamma_xi + alpha * s2, s2

    if isinstance(model, CPGaussianModel):
        jump, djump, ddjump = _compound_terms(model.intensity, alpha, model.m_x, model.sigma_x2)
        return -alpha * model.gamma_xi + jump, -model.gamma_xi + djump, ddjump

    if isinstance(model, JumpDiffusionModel):
        s2 = model.sigma2
        if model.jump_law == JumpLaw.LAPLACE:
            jump, djump, ddjump = _compound_terms(model.intensity, alpha, rho=model.rho)
        else:
            jump, djump, ddjump = _compound_terms(model.intensity, alpha, model.m_x, model.sigma_x2)
        return (
            -alpha * model.gamma_xi + jump + 0.5 * alpha * alpha * s2,
            -model.gamma_xi + djump + alpha * s2,
            ddjump + s2,
        )

    # Variance gamma: c(α) = -αγ_ξ - c ln g(α), g(α) = 1 + αμ/λ - α²/(2λ)
    lam = model.rate
    g = 1.0 + alpha * model.mu / lam - alpha * alpha / (2.0 * lam)
    dg = (model.mu - alpha) / lam
    return (
        -alpha * model.gamma_xi - model.shape * math.log(g),
        -model.gamma_xi - model.shape * dg / g,
        model.shape * (g / lam + dg * dg) / (g * g),
    )


def laplace_exponent(model: ModelSpec, alpha: float, strict: bool = True) -> float:
    """
    Evaluate c(α) = ln E e^{-αξ_1}.

    Args:
        model: Model parameters
        alpha: Argument α
        strict: Raise outside the domain; otherwise return +inf there

    Returns:
        c(α), or +inf when ``strict`` is False and α is outside the domain

    Raises:
        OutOfDomainError: α outside the exponent domain and ``strict`` is True

    Example:
        >>> m = BrownianDriftModel(gamma_xi=1, gamma_eta=0, sigma_xi2=2, sigma_eta2=1)
        >>> laplace_exponent(m, 1.0)
        0.0
    """
    domain = exponent_domain(model)
    if not domain.contains(alpha):
        if strict:
            raise OutOfDomainError(alpha, domain)
        return math.inf
    return _exponent_terms(model, alpha)[0]


def laplace_exponent_derivatives(model: ModelSpec, alpha: float) -> Tuple[float, float]:
    """
    Closed-form c'(α) and c''(α) strictly inside the exponent domain.

    Raises:
        OutOfDomainError: α outside the exponent domain
    """
    domain = exponent_domain(model)
    if not domain.contains(alpha):
        raise OutOfDomainError(alpha, domain)
    _, first, second = _exponent_terms(model, alpha)
    return first, second


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def covariance_factor(cov: np.ndarray) -> np.ndarray:
    """
    Lower factor L with L Lᵀ = cov.

    Cholesky for positive definite matrices, so that scaling the second
    coordinate scales the second row exactly; a symmetric square root for
    degenerate ones.
    """
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        values, vectors = np.linalg.eigh(cov)
        return vectors * np.sqrt(np.clip(values, 0.0, None))


def sample_jump_marks(model: ModelSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw ``size`` iid jump marks (X, Y) as an array of shape (size, 2).

    For the jump diffusion model Y is identically zero (η has no jumps).
    """
    if isinstance(model, CPGaussianModel):
        normals = rng.standard_normal((size, 2))
        factor = covariance_factor(model.jump_covariance)
        return np.array([model.m_x, model.m_y]) + normals @ factor.T
    if isinstance(model, JumpDiffusionModel):
        marks = np.zeros((size, 2))
        if model.jump_law == JumpLaw.LAPLACE:
            marks[:, 0] = rng.laplace(0.0, 1.0 / model.rho, size)
        else:
            marks[:, 0] = model.m_x + math.sqrt(model.sigma_x2) * rng.standard_normal(size)
        return marks
    raise ValueError(f"Model variant '{model.variant}' has no finite-activity jumps")


def continuous_increments(
    model: ModelSpec,
    dt: np.ndarray,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exact increments of the jump-free part of (ξ, η) over steps ``dt``.

    For the variance gamma model this is the full increment (the subordinator
    is sampled exactly); for the finite-activity models the compound Poisson
    jumps are excluded and handled by the caller.
    """
    dt = np.asarray(dt, dtype=float)
    if isinstance(model, CPGaussianModel):
        return model.gamma_xi * dt, model.gamma_eta * dt

    if isinstance(model, BrownianDriftModel):
        normals = rng.standard_normal(dt.shape + (2,))
        factor = covariance_factor(model.covariance)
        scaled = (normals @ factor.T) * np.sqrt(dt)[..., None]
        return model.gamma_xi * dt + scaled[..., 0], model.gamma_eta * dt + scaled[..., 1]

    if isinstance(model, JumpDiffusionModel):
        shared = math.sqrt(model.sigma2) * np.sqrt(dt) * rng.standard_normal(dt.shape)
        return model.gamma_xi * dt + shared, model.gamma_eta * dt + shared

    subordinator = rng.gamma(model.shape * dt, 1.0 / model.rate)
    brownian = np.sqrt(subordinator) * rng.standard_normal(dt.shape)
    d_xi = model.gamma_xi * dt + brownian + model.mu * subordinator
    d_eta = model.gamma_eta * dt + subordinator
    return d_xi, d_eta


def sample_increment(model: ModelSpec, dt: float, rng: np.random.Generator) -> Increment:
    """
    Exact joint sample of (ξ_{t+dt} - ξ_t, η_{t+dt} - η_t).

    For the finite-activity models the returned jump list carries the exact
    jump times within (0, dt] and the marks.

    Args:
        model: Model parameters
        dt: Step length (> 0)
        rng: Random stream

    Returns:
        The increment with its jump list
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    d_xi, d_eta = continuous_increments(model, np.array([dt]), rng)
    d_xi, d_eta = float(d_xi[0]), float(d_eta[0])

    jumps: Tuple[JumpEvent, ...] = ()
    if has_finite_activity_jumps(model):
        count = int(rng.poisson(model.intensity * dt))
        if count:
            times = np.sort(rng.uniform(0.0, dt, count))
            marks = sample_jump_marks(model, count, rng)
            jumps = tuple(JumpEvent(float(t), float(x), float(y)) for t, (x, y) in zip(times, marks))
            d_xi += float(marks[:, 0].sum())
            d_eta += float(marks[:, 1].sum())
    return Increment(dt=dt, d_xi=d_xi, d_eta=d_eta, jumps=jumps)


def sample_increments(model: ModelSpec, dt: float, size: int, rng: np.random.Generator) -> IncrementSample:
    """
    Vectorised version of ``sample_increment`` returning ``size`` iid increments.

    Jump times are not retained; ``jump_counts`` holds the number of jumps in
    each increment.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    d_xi, d_eta = continuous_increments(model, np.full(size, dt), rng)
    counts = np.zeros(size, dtype=np.int64)
    if has_finite_activity_jumps(model):
        counts = rng.poisson(model.intensity * dt, size)
        total = int(counts.sum())
        if total:
            marks = sample_jump_marks(model, total, rng)
            owner = np.repeat(np.arange(size), counts)
            d_xi = d_xi + np.bincount(owner, weights=marks[:, 0], minlength=size)
            d_eta = d_eta + np.bincount(owner, weights=marks[:, 1], minlength=size)
    return IncrementSample(dt=dt, d_xi=d_xi, d_eta=d_eta, jump_counts=counts)
