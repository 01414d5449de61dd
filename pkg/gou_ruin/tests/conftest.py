import textwrap
from pathlib import Path
from typing import Callable

import pytest

from gou_ruin.schemas.model import (
    BrownianDriftModel,
    CPGaussianModel,
    JumpDiffusionModel,
    JumpLaw,
    VarianceGammaModel,
)
from gou_ruin.services.levy_models import validate


@pytest.fixture
def reference_bm() -> BrownianDriftModel:
    """Brownian reference model with w = 1 and μ* = 1."""
    return validate(BrownianDriftModel(gamma_xi=1.0, gamma_eta=-1.0, sigma_xi2=2.0, sigma_eta2=1.0))


@pytest.fixture
def correlated_bm() -> BrownianDriftModel:
    return validate(
        BrownianDriftModel(gamma_xi=1.0, gamma_eta=-0.5, sigma_xi2=2.0, sigma_xieta=0.4, sigma_eta2=0.5)
    )


@pytest.fixture
def cp_gaussian() -> CPGaussianModel:
    return validate(
        CPGaussianModel(
            gamma_xi=0.1,
            gamma_eta=-0.5,
            intensity=1.0,
            m_x=0.5,
            m_y=-0.2,
            sigma_x2=1.0,
            sigma_xy=0.3,
            sigma_y2=0.5,
        )
    )


@pytest.fixture
def laplace_jd() -> JumpDiffusionModel:
    return validate(
        JumpDiffusionModel(
            gamma_xi=1.0,
            gamma_eta=-1.0,
            sigma2=1.0,
            intensity=1.0,
            jump_law=JumpLaw.LAPLACE,
            rho=3.0,
        )
    )


@pytest.fixture
def gaussian_jd() -> JumpDiffusionModel:
    return validate(
        JumpDiffusionModel(
            gamma_xi=1.0,
            gamma_eta=-1.0,
            sigma2=0.5,
            intensity=1.0,
            m_x=-0.2,
            sigma_x2=0.3,
        )
    )


@pytest.fixture
def variance_gamma() -> VarianceGammaModel:
    return validate(VarianceGammaModel(gamma_xi=0.5, gamma_eta=-0.5, mu=1.0, shape=1.0, rate=2.0))


@pytest.fixture
def symmetric_vg() -> VarianceGammaModel:
    """Variance gamma model with exponent domain (-2, 2)."""
    return validate(VarianceGammaModel(gamma_xi=0.5, gamma_eta=-0.5, mu=0.0, shape=1.0, rate=2.0))


MODEL_FIXTURES = ["reference_bm", "correlated_bm", "cp_gaussian", "laplace_jd", "gaussian_jd", "variance_gamma"]


@pytest.fixture(params=MODEL_FIXTURES)
def any_model(request):
    """Every validated model fixture in turn."""
    return request.getfixturevalue(request.param)


BROWNIAN_CONFIG = """
[model]
variant = "brownian_drift"
gamma_xi = 1.0
gamma_eta = -1.0
sigma_xi2 = 2.0
sigma_eta2 = 1.0

[simulation]
seed = 20240601
step = 0.03125
horizon = 2
n_paths = 4000
batch_size = 1000

[analysis]
z_grid = [2.0, 4.0, 8.0, 16.0]
laplace_samples = 20000
constant_paths = 4000
iid_paths = 0

[output]
n_dump_paths = 2
"""

UNIT_JUMP_CONFIG = """
[model]
variant = "cp_gaussian"
gamma_xi = 1.0
gamma_eta = -1.0
intensity = 1.0
m_x = 1.0
m_y = 0.0
sigma_x2 = 0.0
sigma_xy = 0.0
sigma_y2 = 0.0

[simulation]
seed = 7
step = 0.015625
n_paths = 2000
batch_size = 500

[analysis]
z_grid = [0.5, 2.0]

[output]
plots = false

[overrides]
force = true
unchecked_model = true
"""


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[[str, str], Path]:
    """Write dedented configuration text to a file under tmp_path."""

    def _write(text: str, name: str = "run.toml") -> Path:
        path = tmp_path / name
        path.write_text(textwrap.dedent(text).lstrip(), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def brownian_config_text() -> str:
    return BROWNIAN_CONFIG


@pytest.fixture
def unit_jump_config_text() -> str:
    return UNIT_JUMP_CONFIG
