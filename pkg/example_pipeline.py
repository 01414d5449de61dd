#!/usr/bin/env python3
"""
Example pipeline using the library directly instead of the command line.

Analyses the Brownian reference model, estimates the ruin curve and the
Cramér constant, and prints the fitted slope next to -w.
"""

import logging

from gou_ruin.core.config import settings
from gou_ruin.schemas.estimates import EstimationConfig
from gou_ruin.schemas.model import BrownianDriftModel
from gou_ruin.services.cramer_analysis import check_conditions, lundberg_and_profile, rate_function
from gou_ruin.services.levy_models import validate
from gou_ruin.services.ruin_estimation import (
    estimate_cramer_constant,
    estimate_ruin_curve,
    fit_cramer_asymptotics,
)


def main():
    logging.basicConfig(level=settings.log_level, format=settings.log_format)

    model = validate(BrownianDriftModel(gamma_xi=1.0, gamma_eta=-1.0, sigma_xi2=2.0, sigma_eta2=1.0))
    profile = lundberg_and_profile(model)
    report = check_conditions(model, profile)
    print(f"w = {profile.w:.10g}, mu* = {profile.mu_star:.10g}, conditions {report.summary()}")
    for x in (0.5, 1.0, 2.0):
        print(f"R({x}) = {rate_function(profile, model, x):.6g}")

    config = EstimationConfig(seed=20240601, n_paths=50_000, step=2.0 ** -6, workers=4, constant_paths=50_000)
    curve = estimate_ruin_curve(model, [5.0, 10.0, 20.0, 40.0], config, report=report)
    for row in curve.rows:
        print(f"psi({row.z:g}) = {row.psi_hat:.5f} [{row.ci_lo:.5f}, {row.ci_hi:.5f}]")

    constant = estimate_cramer_constant(model, profile, config, report=report)
    fit = fit_cramer_asymptotics(curve, profile.w, profile.mu_star, constant)
    print(f"slope {fit.slope:.4f} ± {fit.slope_se:.4f} (target {-profile.w:.4f})")
    print(f"plateau {fit.plateau_mean:.4f}, C- {constant.estimate:.4f} [{constant.ci_lo:.4f}, {constant.ci_hi:.4f}]")


if __name__ == "__main__":
    main()
