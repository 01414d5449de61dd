"""
Pydantic schemas of the package.

This module exports the model parameter records, analysis results, Monte
Carlo estimates, run configuration and manifest.
"""

# Model schemas
from .model import (
    ModelVariant,
    JumpLaw,
    ExponentDomain,
    CPGaussianModel,
    BrownianDriftModel,
    JumpDiffusionModel,
    VarianceGammaModel,
    ModelSpec,
    model_adapter,
)

# Analysis schemas
from .profile import (
    ConditionVerdict,
    CramerProfile,
    ConditionWitness,
    ConditionResult,
    ConditionReport,
    AnalysisReport,
)

# Estimate schemas
from .estimates import (
    EstimationConfig,
    KsComparison,
    IidReport,
    RuinCurveRow,
    RuinCurve,
    CramerFit,
    RuinTimeRow,
    RuinTimeTable,
    CramerConstantEstimate,
    LaplaceCheckRow,
    LaplaceCheckReport,
    PathSummary,
    SimulateSummary,
    VerifyCheck,
    VerifyReport,
)

# Run schemas
from .config import (
    SimulationSection,
    AnalysisSection,
    OutputSection,
    VerifySection,
    OverridesSection,
    RunConfig,
)
from .manifest import OutputFile, CommandRecord, RunManifest

__all__ = [
    # Model schemas
    "ModelVariant",
    "JumpLaw",
    "ExponentDomain",
    "CPGaussianModel",
    "BrownianDriftModel",
    "JumpDiffusionModel",
    "VarianceGammaModel",
    "ModelSpec",
    "model_adapter",

    # Analysis schemas
    "ConditionVerdict",
    "CramerProfile",
    "ConditionWitness",
    "ConditionResult",
    "ConditionReport",
    "AnalysisReport",

    # Estimate schemas
    "EstimationConfig",
    "KsComparison",
    "IidReport",
    "RuinCurveRow",
    "RuinCurve",
    "CramerFit",
    "RuinTimeRow",
    "RuinTimeTable",
    "CramerConstantEstimate",
    "LaplaceCheckRow",
    "LaplaceCheckReport",
    "PathSummary",
    "SimulateSummary",
    "VerifyCheck",
    "VerifyReport",

    # Run schemas
    "SimulationSection",
    "AnalysisSection",
    "OutputSection",
    "VerifySection",
    "OverridesSection",
    "RunConfig",
    "OutputFile",
    "CommandRecord",
    "RunManifest",
]
