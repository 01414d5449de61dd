"""
Monte Carlo estimate schemas.

Records produced by the path diagnostics and the ruin estimators. Tabular
records expose ``to_frame`` so the command layer can write them as
delimited text.
"""

from typing import Dict, List, Optional

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from gou_ruin.core.config import settings

RUIN_CURVE_COLUMNS = [
    "z", "psi_hat", "ci_lo", "ci_hi", "n_paths", "n_ruined", "censored_frac", "underflow_frac", "clamped_frac",
]


class EstimationConfig(BaseModel):
    """Sampling parameters shared by the estimators."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(..., ge=0, description="Run seed; every stream derives from it")
    n_paths: int = Field(..., ge=0, description="Paths for the ruin estimators")
    step: float = Field(settings.default_step, gt=0, description="Mesh width h")
    theta: float = Field(settings.default_theta, gt=0, description="Stopping level Θ for ξ")
    t_max: float = Field(settings.default_t_max, gt=0, description="Time horizon of a ruin path")
    batch_size: int = Field(settings.default_batch_size, gt=0, description="Paths per block and stream")
    workers: int = Field(1, ge=1, description="Worker processes")
    constant_paths: int = Field(100_000, ge=0, description="Sample size of the Cramér constant estimator")
    constant_blocks: int = Field(settings.median_of_means_blocks, ge=1, description="Median-of-means blocks")
    dispersion_gate: float = Field(1.0, gt=0, description="Relative block-mean spread flagging a heavy tail")


class KsComparison(BaseModel):
    """Two-sample Kolmogorov–Smirnov comparison of one quantity at two indices."""
    quantity: str
    index_a: int
    index_b: int
    statistic: float
    p_value: float


class IidReport(BaseModel):
    """Result of the iid diagnostics on the discrete embedding."""
    n_paths: int
    n_intervals: int
    significance: float
    ks: List[KsComparison]
    autocorrelations: Dict[str, float]
    autocorrelation_bound: float
    passed: bool


class RuinCurveRow(BaseModel):
    """Estimate of ψ(z) at one level."""
    z: float = Field(..., ge=0)
    psi_hat: float = Field(..., ge=0, le=1)
    ci_lo: float = Field(..., ge=0, le=1)
    ci_hi: float = Field(..., ge=0, le=1)
    n_paths: int = Field(..., gt=0)
    n_ruined: int = Field(..., ge=0)
    censored_frac: float = Field(..., ge=0, le=1, description="Unruined paths stopped at t_max")
    underflow_frac: float = Field(
        ..., ge=0, le=1, description="Unruined paths stopped at ξ >= Θ, where later e^{-ξ} contributions are truncated"
    )
    clamped_frac: float = Field(0.0, ge=0, le=1, description="Paths whose e^{-ξ} weight was clamped at ξ < -700")

    @model_validator(mode="after")
    def check_interval(self) -> "RuinCurveRow":
        if not self.ci_lo <= self.psi_hat <= self.ci_hi:
            raise ValueError("confidence interval must contain psi_hat")
        return self


class RuinCurve(BaseModel):
    """Monte Carlo ruin probabilities over a grid of levels, from common random numbers."""
    rows: List[RuinCurveRow]
    step: float
    theta: float
    t_max: float
    seed: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.model_dump() for row in self.rows], columns=RUIN_CURVE_COLUMNS)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, step: float = 0.0, theta: float = 0.0, t_max: float = 0.0,
                   seed: int = 0) -> "RuinCurve":
        rows = [RuinCurveRow(**record) for record in frame[RUIN_CURVE_COLUMNS].to_dict("records")]
        return cls(rows=rows, step=step, theta=theta, t_max=t_max, seed=seed)


class CramerFit(BaseModel):
    """Regression of ln ψ̂ on ln z and the plateau z^w ψ̂."""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    w: float
    mu_star: Optional[float] = None
    slope: float
    slope_se: float
    slope_ci_lo: float
    slope_ci_hi: float
    z_used: List[float]
    plateau: List[float] = Field(..., description="z^w psi_hat for every level of the curve")
    plateau_ratio: float = Field(..., description="max/min of the plateau over the top levels")
    plateau_mean: float
    plateau_ci_lo: float
    plateau_ci_hi: float
    constant: Optional[float] = Field(None, description="C₋ from the constant estimator, when run")
    constant_ci_lo: Optional[float] = None
    constant_ci_hi: Optional[float] = None


class RuinTimeRow(BaseModel):
    """Estimate of P(T_z <= x ln z) at one x."""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    x: float
    threshold: float = Field(..., description="x ln z")
    p_hat: float = Field(..., ge=0, le=1)
    ci_lo: float
    ci_hi: float
    n_ruined: int
    normalized_log: float = Field(..., description="(ln z)^{-1} ln p_hat, -inf when nothing ruined")
    rate: Optional[float] = Field(None, description="R(x), when x > x₀")


class RuinTimeTable(BaseModel):
    """Finite-time ruin law at a fixed level z."""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    z: float
    n_paths: int
    psi_hat: float
    psi_normalized_log: float
    rows: List[RuinTimeRow]

    def to_frame(self) -> pd.DataFrame:
        columns = ["x", "threshold", "p_hat", "ci_lo", "ci_hi", "n_ruined", "normalized_log", "rate"]
        return pd.DataFrame([row.model_dump() for row in self.rows], columns=columns)


class CramerConstantEstimate(BaseModel):
    """Median-of-means estimate of C₋."""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    estimate: float
    ci_lo: float
    ci_hi: float
    standard_error: float
    block_means: List[float]
    n_samples: int
    w: float
    mu_star: float
    heavy_tail_flag: bool = Field(..., description="Block means disperse beyond the gate")


class LaplaceCheckRow(BaseModel):
    """Empirical versus closed-form Laplace exponent at one α."""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    alpha: float
    estimate: float
    closed_form: float
    standard_error: float
    z_score: float
    max_weight_share: float = Field(..., description="Largest single draw's share of the sum")
    unstable: bool


class LaplaceCheckReport(BaseModel):
    """Empirical Laplace check over an α grid."""
    n: int
    rows: List[LaplaceCheckRow]

    @property
    def max_abs_z(self) -> float:
        return max((abs(row.z_score) for row in self.rows), default=0.0)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.model_dump() for row in self.rows])


class PathSummary(BaseModel):
    """Per-path summary of a dumped trajectory."""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    path_id: int
    points: int
    jumps: int
    final_xi: float
    final_z: float
    min_z: float
    ruin_time: Optional[float] = None
    underflow: bool


class SimulateSummary(BaseModel):
    """Content of simulate_summary.json."""
    seed: int
    horizon: float
    step: float
    v0: Optional[float] = None
    paths: List[PathSummary]
    iid: Optional[IidReport] = None


class VerifyCheck(BaseModel):
    """One pass/fail check of the verify command."""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""


class VerifyReport(BaseModel):
    """Content of verify_report.json."""
    checks: List[VerifyCheck]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)
