"""
Shared state of a command execution.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from gou_ruin.core.exceptions import NumericalError
from gou_ruin.schemas.config import RunConfig
from gou_ruin.schemas.estimates import EstimationConfig
from gou_ruin.schemas.profile import ConditionReport, CramerProfile
from gou_ruin.services.cramer_analysis import check_conditions, lundberg_and_profile

logger = logging.getLogger(__name__)


@dataclass
class CommandContext:
    """Configuration, output directory and lazily computed analytics of one command."""
    config: RunConfig
    out_dir: Path
    force: bool = False
    written: List[Path] = field(default_factory=list)
    _profile: Optional[CramerProfile] = None
    _report: Optional[ConditionReport] = None

    @property
    def model(self):
        return self.config.model

    @property
    def estimation(self) -> EstimationConfig:
        return self.config.estimation_config()

    def profile(self) -> CramerProfile:
        """Cramér profile; raises when the Lundberg root does not exist."""
        if self._profile is None:
            self._profile = lundberg_and_profile(self.model)
        return self._profile

    def optional_profile(self) -> Optional[CramerProfile]:
        """Cramér profile, or None (with a warning) when it cannot be computed."""
        try:
            return self.profile()
        except NumericalError as e:
            logger.warning(f"No Cramér profile for {self.model.variant}: {e}")
            return None

    def report(self) -> ConditionReport:
        if self._report is None:
            self._report = check_conditions(self.model, self.optional_profile())
        return self._report

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def record(self, path: Path) -> Path:
        """Register a written file for the manifest."""
        self.written.append(path)
        return path

    def default_x_grid(self, points: int = 5) -> List[float]:
        """x grid above x₀ reaching past 1/μ*, used when the configuration gives none."""
        if self.config.analysis.x_grid is not None:
            return list(self.config.analysis.x_grid)
        profile = self.profile()
        start = profile.x0 + 0.2 * (profile.x_flat - profile.x0)
        return [float(x) for x in np.linspace(start, 1.5 * profile.x_flat, points)]

    def condition_summary(self) -> Optional[dict]:
        """Condition verdicts when the command computed them."""
        return self._report.summary() if self._report is not None else None
