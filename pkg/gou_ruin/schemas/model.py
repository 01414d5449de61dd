"""
Bivariate Lévy model schemas.

This module defines the parameter records of the four parametric models
(ξ, η) supported by the package, as a pydantic discriminated union on the
``variant`` tag, together with the domain of the Laplace exponent.

Field constraints here only reject values that make no sense for any use
(negative variances, non-positive scale parameters). The model invariants
(drift positivity, positive definiteness, ...) are enforced by
``gou_ruin.services.levy_models.validate`` so that degenerate records can
still be built as test oracles.
"""

import math
from enum import Enum
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter


class ModelVariant(str, Enum):
    """Enumeration of the supported model families."""
    CP_GAUSSIAN = "cp_gaussian"
    BROWNIAN_DRIFT = "brownian_drift"
    JUMP_DIFFUSION = "jump_diffusion"
    VARIANCE_GAMMA = "variance_gamma"


class JumpLaw(str, Enum):
    """Jump size law of ξ in the jump diffusion model."""
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"


class ExponentDomain(BaseModel):
    """
    Open interval on which c(α) = ln E e^{-αξ_1} is finite.

    Endpoints may be infinite. ``*_singular`` is set when c blows up at a
    finite endpoint.
    """
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    lower: float = Field(..., description="Lower endpoint (may be -inf)")
    upper: float = Field(..., description="Upper endpoint (may be +inf)")
    lower_singular: bool = Field(False, description="c(α) → ∞ at a finite lower endpoint")
    upper_singular: bool = Field(False, description="c(α) → ∞ at a finite upper endpoint")

    def contains(self, alpha: float) -> bool:
        """Whether α lies strictly inside the domain."""
        return self.lower < alpha < self.upper

    @property
    def is_bounded_above(self) -> bool:
        return math.isfinite(self.upper)


class ModelBase(BaseModel):
    """Fields shared by every model: the linear drifts of ξ and η."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma_xi: float = Field(..., description="Drift rate of ξ per unit time")
    gamma_eta: float = Field(..., description="Drift rate of η per unit time")


class CPGaussianModel(ModelBase):
    """
    Bivariate compound Poisson process with drift.

    (ξ_t, η_t) = (γ_ξ, γ_η)t + Σ_{i ≤ N_t} (X_i, Y_i) with N a Poisson
    process and (X_i, Y_i) iid bivariate Gaussian jump marks.
    """
    variant: Literal["cp_gaussian"] = "cp_gaussian"
    intensity: float = Field(..., ge=0, description="Jump intensity λ per unit time")
    m_x: float = Field(..., description="Mean of the ξ jump mark X")
    m_y: float = Field(..., description="Mean of the η jump mark Y")
    sigma_x2: float = Field(..., ge=0, description="Variance of X")
    sigma_xy: float = Field(0.0, description="Covariance of X and Y")
    sigma_y2: float = Field(..., ge=0, description="Variance of Y")

    @property
    def jump_covariance(self) -> np.ndarray:
        return np.array([[self.sigma_x2, self.sigma_xy], [self.sigma_xy, self.sigma_y2]])


class BrownianDriftModel(ModelBase):
    """Bivariate Brownian motion with drift."""
    variant: Literal["brownian_drift"] = "brownian_drift"
    sigma_xi2: float = Field(..., ge=0, description="Variance of B_ξ per unit time")
    sigma_xieta: float = Field(0.0, description="Covariance of B_ξ and B_η per unit time")
    sigma_eta2: float = Field(..., ge=0, description="Variance of B_η per unit time")

    @property
    def covariance(self) -> np.ndarray:
        return np.array([[self.sigma_xi2, self.sigma_xieta], [self.sigma_xieta, self.sigma_eta2]])


class JumpDiffusionModel(ModelBase):
    """
    Jump diffusion ξ and Brownian motion η sharing the same Brownian motion.

    (ξ_t, η_t) = (γ_ξ, γ_η)t + (B_t + Σ_{i ≤ N_t} X_i, B_t).
    """
    variant: Literal["jump_diffusion"] = "jump_diffusion"
    sigma2: float = Field(..., ge=0, description="Variance σ² of the shared Brownian motion")
    intensity: float = Field(..., ge=0, description="Jump intensity λ per unit time")
    jump_law: JumpLaw = Field(JumpLaw.GAUSSIAN, description="Law of the jump sizes X")
    m_x: float = Field(0.0, description="Mean of Gaussian jumps")
    sigma_x2: float = Field(0.0, ge=0, description="Variance of Gaussian jumps")
    rho: float = Field(1.0, gt=0, description="Rate ρ of Laplace jumps, density ρe^{-ρ|x|}/2")

    @property
    def jump_mean(self) -> float:
        return self.m_x if self.jump_law == JumpLaw.GAUSSIAN else 0.0


class VarianceGammaModel(ModelBase):
    """
    Subordinated Brownian motion ξ and spectrally positive η.

    (ξ_t, η_t) = (γ_ξ, γ_η)t + (B(S_t) + μS_t, S_t) with S a gamma
    subordinator, E e^{-uS_t} = (1 + u/λ)^{-ct}.
    """
    variant: Literal["variance_gamma"] = "variance_gamma"
    mu: float = Field(..., description="Drift μ of the subordinated Brownian motion")
    shape: float = Field(..., gt=0, description="Gamma subordinator parameter c")
    rate: float = Field(..., gt=0, description="Gamma subordinator parameter λ")


ModelSpec = Annotated[
    Union[CPGaussianModel, BrownianDriftModel, JumpDiffusionModel, VarianceGammaModel],
    Field(discriminator="variant"),
]

model_adapter: TypeAdapter = TypeAdapter(ModelSpec)
