"""
Cramér profile and condition report schemas.
"""

import math
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from gou_ruin.schemas.model import ExponentDomain


class ConditionVerdict(str, Enum):
    """Outcome of a condition check."""
    VERIFIED = "verified"
    NOT_VERIFIED = "not_verified"
    FAILED = "failed"


class CramerProfile(BaseModel):
    """Derived Cramér analytics of a model."""
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    w: float = Field(..., gt=0, description="Lundberg coefficient, the positive root of c")
    mu_star: float = Field(..., gt=0, description="Tilted mean c'(w)")
    alpha0: float = Field(..., description="Order up to which c and the moments of Z_1 are finite (may be +inf)")
    alpha0_certified: bool = Field(
        ...,
        description="False when alpha0 rests only on a sufficient moment bound and may underestimate",
    )
    x0: float = Field(..., ge=0, description="Left end of the rate function domain, lim 1/c'(α) as α → α₀")
    domain: ExponentDomain
    root_residual: float = Field(..., description="|c(w)| at the returned root")

    @model_validator(mode="after")
    def check_ordering(self) -> "CramerProfile":
        if not self.w < self.alpha0:
            raise ValueError(f"w = {self.w} must lie below alpha0 = {self.alpha0}")
        if not self.domain.contains(self.w):
            raise ValueError(f"w = {self.w} must lie inside the exponent domain")
        if not self.x0 < self.x_flat:
            raise ValueError(f"x0 = {self.x0} must lie below 1/mu_star = {self.x_flat}")
        return self

    @property
    def x_flat(self) -> float:
        """1/μ*, where the rate function reaches w."""
        return 1.0 / self.mu_star

    @property
    def alpha0_is_infinite(self) -> bool:
        return math.isinf(self.alpha0)


class ConditionWitness(BaseModel):
    """Exponents witnessing the moment condition E e^{-kpξ_1} < ∞, E|η_1|^{kq} < ∞."""
    model_config = ConfigDict(frozen=True)

    w: float
    epsilon: float = Field(..., gt=0)
    k: float = Field(..., description="max{1, w + ε}")
    p: float = Field(..., gt=1)
    q: float = Field(..., gt=1, description="Conjugate exponent p/(p-1)")


class ConditionResult(BaseModel):
    """Verdict for a single condition with its human-readable reason."""
    model_config = ConfigDict(frozen=True)

    verdict: ConditionVerdict
    reason: str

    @property
    def verified(self) -> bool:
        return self.verdict == ConditionVerdict.VERIFIED


class ConditionReport(BaseModel):
    """Verdicts for the positivity (A), Cramér (B) and moment (C) conditions."""
    model_config = ConfigDict(frozen=True)

    condition_a: ConditionResult
    condition_b: ConditionResult
    condition_c: ConditionResult
    witness: Optional[ConditionWitness] = None

    @property
    def all_verified(self) -> bool:
        return self.condition_a.verified and self.condition_b.verified and self.condition_c.verified

    def summary(self) -> dict:
        """Verdict strings keyed by condition name, as stored in the run manifest."""
        return {
            "A": self.condition_a.verdict.value,
            "B": self.condition_b.verdict.value,
            "C": self.condition_c.verdict.value,
        }


class AnalysisReport(BaseModel):
    """Content of profile.json written by the analyze command."""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    variant: str
    parameters: dict
    mean_drift: float
    profile: Optional[CramerProfile] = None
    conditions: ConditionReport
    tilted_mean_estimate: Optional[float] = Field(None, description="Monte Carlo -E[ξ_1 e^{-wξ_1}]")
    tilted_mean_se: Optional[float] = None
