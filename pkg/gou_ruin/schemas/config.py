"""
Run configuration schemas.

A run configuration is a TOML document with the sections ``[model]``,
``[simulation]``, ``[analysis]``, ``[output]``, ``[verify]`` and
``[overrides]``. Unknown keys are rejected in every section.
"""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from gou_ruin.core.config import settings
from gou_ruin.schemas.estimates import EstimationConfig
from gou_ruin.schemas.model import ModelSpec


def _ascending(values: Optional[List[float]]) -> Optional[List[float]]:
    if values is None:
        return values
    if not values:
        raise ValueError("grid must be nonempty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("grid must be strictly ascending")
    return values


class SectionBase(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class SimulationSection(SectionBase):
    """Sampling parameters; ``seed`` is mandatory."""
    seed: int = Field(..., ge=0, description="Run seed")
    step: float = Field(settings.default_step, gt=0, description="Mesh width h")
    horizon: float = Field(10.0, gt=0, description="Horizon of dumped paths")
    theta: float = Field(settings.default_theta, gt=0, description="Stopping level Θ for ξ")
    t_max: float = Field(settings.default_t_max, gt=0, description="Time horizon of ruin paths")
    n_paths: int = Field(10_000, ge=0, description="Paths for ruin and ldp")
    batch_size: int = Field(settings.default_batch_size, gt=0, description="Paths per block")
    workers: int = Field(1, ge=1, description="Worker processes")


class AnalysisSection(SectionBase):
    """Grids and estimator sizes."""
    z_grid: List[float] = Field(default_factory=lambda: [5.0, 10.0, 20.0, 40.0])
    x_grid: Optional[List[float]] = Field(None, description="x values for R(x) and the ruin-time law")
    alpha_grid: Optional[List[float]] = Field(None, description="α values for the empirical Laplace check")
    ldp_z: float = Field(40.0, gt=1, description="Level z of the ruin-time law")
    v0: Optional[float] = Field(None, ge=0, description="Initial value for V in path dumps")
    laplace_samples: int = Field(100_000, gt=1, description="Unit increments for the Laplace check")
    constant_paths: int = Field(100_000, ge=0, description="Samples for the Cramér constant")
    constant_blocks: int = Field(settings.median_of_means_blocks, ge=2, description="Median-of-means blocks")
    dispersion_gate: float = Field(1.0, gt=0, description="Block-mean spread flagging a heavy tail")
    iid_paths: int = Field(1000, ge=0, description="Paths for the iid diagnostics on simulate (0 disables)")

    @field_validator("z_grid", "x_grid", "alpha_grid")
    @classmethod
    def check_grids(cls, values: Optional[List[float]]) -> Optional[List[float]]:
        return _ascending(values)


class OutputSection(SectionBase):
    directory: str = Field("out", description="Output directory")
    dump_paths: bool = Field(True, description="Write paths/path_<id>.csv on simulate")
    n_dump_paths: int = Field(3, ge=0, description="Number of dumped paths")
    plots: bool = Field(True, description="Render SVG plots after analyze, ruin, ldp and verify")


class VerifySection(SectionBase):
    """Pass/fail thresholds of the verify command."""
    slope_tolerance: float = Field(0.2, gt=0, description="Allowed relative deviation of the slope from -w")
    plateau_max_ratio: float = Field(1.5, gt=1, description="Allowed max/min of z^w psi over the top levels")
    constant_factor: float = Field(2.0, gt=1, description="Allowed factor between C₋ and the plateau mean")
    plateau_top: int = Field(3, ge=2, description="Number of top levels in the plateau ratio")
    ldp_tolerance: float = Field(
        0.5, gt=0, description="Allowed deviation of the excess ruin-time rate r(x) - r_psi from R(x) - w"
    )


class OverridesSection(SectionBase):
    force: bool = Field(False, description="Proceed past unverified conditions")
    unchecked_model: bool = Field(
        False,
        description="Skip the model invariants; for degenerate oracle models such as the unit-jump model",
    )


class RunConfig(BaseModel):
    """Complete description of a run."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    model: ModelSpec
    simulation: SimulationSection
    analysis: AnalysisSection = Field(default_factory=AnalysisSection)
    output: OutputSection = Field(default_factory=OutputSection)
    verify: VerifySection = Field(default_factory=VerifySection)
    overrides: OverridesSection = Field(default_factory=OverridesSection)

    def estimation_config(self) -> EstimationConfig:
        """Sampling parameters in the form the estimators take."""
        sim = self.simulation
        return EstimationConfig(
            seed=sim.seed,
            n_paths=sim.n_paths,
            step=sim.step,
            theta=sim.theta,
            t_max=sim.t_max,
            batch_size=sim.batch_size,
            workers=sim.workers,
            constant_paths=self.analysis.constant_paths,
            constant_blocks=self.analysis.constant_blocks,
            dispersion_gate=self.analysis.dispersion_gate,
        )
