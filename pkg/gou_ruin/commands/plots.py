"""
SVG line charts of the analyze, ruin and ldp outputs.

Figures are rendered with the Agg backend, a fixed SVG hash salt and no
date metadata, so identical inputs give byte-identical files.
"""

import io
import json
import logging
from pathlib import Path
from typing import List, Optional, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from gou_ruin.core.exceptions import ConfigError
from gou_ruin.utils.io import atomic_write_bytes, read_frame

logger = logging.getLogger(__name__)

plt.rcParams["svg.hashsalt"] = "gou-ruin"
plt.rcParams["svg.fonttype"] = "path"


class MissingInputError(ConfigError):
    """Raised when no plottable output is present in the output directory."""
    pass


def _save(fig: plt.Figure, path: Path) -> Path:
    buffer = io.BytesIO()
    fig.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(fig)
    return atomic_write_bytes(path, buffer.getvalue())


def _read_table(path: Path) -> Optional[pd.DataFrame]:
    if not path.exists():
        return None
    frame = read_frame(path)
    if frame.empty:
        raise MissingInputError(f"{path.name} has no rows")
    return frame


def _lundberg(out_dir: Path) -> Optional[float]:
    for name, keys in (("profile.json", ("profile", "w")), ("cramer_fit.json", ("w",))):
        path = out_dir / name
        if path.exists():
            value = json.loads(path.read_text(encoding="utf-8"))
            for key in keys:
                value = value.get(key) if isinstance(value, dict) else None
            if value is not None:
                return float(value)
    return None


def plot_ruin_curve(curve: pd.DataFrame, w: Optional[float], fit: Optional[dict], path: Path) -> Path:
    """ln ψ̂ against ln z with the fitted line and the reference slope -w."""
    ruined = curve[curve["psi_hat"] > 0]
    fig, ax = plt.subplots(figsize=(6, 4))
    log_z = np.log(ruined["z"].to_numpy())
    log_psi = np.log(ruined["psi_hat"].to_numpy())
    ax.plot(log_z, log_psi, "o", label="ln psi_hat")
    if len(log_z):
        anchor_x, anchor_y = log_z[0], log_psi[0]
        if fit is not None:
            ax.plot(log_z, anchor_y + fit["slope"] * (log_z - anchor_x), "-", label=f"fit slope {fit['slope']:.3f}")
        if w is not None:
            ax.plot(log_z, anchor_y - w * (log_z - anchor_x), "--", label=f"reference slope {-w:.3f}")
    ax.set_xlabel("ln z")
    ax.set_ylabel("ln psi")
    ax.legend()
    return _save(fig, path)


def plot_plateau(curve: pd.DataFrame, w: float, path: Path) -> Path:
    """z^w ψ̂ with its interval band."""
    z = curve["z"].to_numpy()
    scale = z ** w
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.fill_between(z, scale * curve["ci_lo"].to_numpy(), scale * curve["ci_hi"].to_numpy(), alpha=0.3)
    ax.plot(z, scale * curve["psi_hat"].to_numpy(), "o-", label="z^w psi_hat")
    ax.set_xscale("log")
    ax.set_xlabel("z")
    ax.legend()
    return _save(fig, path)


def plot_rate_function(table: pd.DataFrame, w: Optional[float], path: Path) -> Path:
    """R(x) with the level w marked."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(table["x"], table["rate"], "-", label="R(x)")
    if w is not None:
        ax.axhline(w, linestyle="--", color="grey", label=f"w = {w:.4g}")
    ax.set_xlabel("x")
    ax.legend()
    return _save(fig, path)


def plot_ruin_time_cdf(table: pd.DataFrame, path: Path) -> Path:
    """Normalized log-estimates against -R(x)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    finite = table[np.isfinite(table["normalized_log"])]
    ax.plot(finite["x"], finite["normalized_log"], "o-", label="(ln z)^-1 ln P(T_z <= x ln z)")
    if "rate" in table and table["rate"].notna().any():
        ax.plot(table["x"], -table["rate"], "--", label="-R(x)")
    ax.set_xlabel("x")
    ax.legend()
    return _save(fig, path)


def emit_plots(out_dir: Union[str, Path]) -> List[Path]:
    """
    Render every chart whose inputs exist in ``out_dir``.

    Returns:
        Paths of the written SVG files

    Raises:
        MissingInputError: No input table exists, or one exists but is empty
    """
    out_dir = Path(out_dir)
    w = _lundberg(out_dir)
    written: List[Path] = []

    curve = _read_table(out_dir / "ruin_curve.csv")
    if curve is not None:
        fit_path = out_dir / "cramer_fit.json"
        fit = json.loads(fit_path.read_text(encoding="utf-8")) if fit_path.exists() else None
        written.append(plot_ruin_curve(curve, w, fit, out_dir / "ruin_curve.svg"))
        if w is not None:
            written.append(plot_plateau(curve, w, out_dir / "plateau.svg"))

    rates = _read_table(out_dir / "rate_function.csv")
    if rates is not None:
        written.append(plot_rate_function(rates, w, out_dir / "rate_function.svg"))

    cdf = _read_table(out_dir / "ruin_time_cdf.csv")
    if cdf is not None:
        written.append(plot_ruin_time_cdf(cdf, out_dir / "ruin_time_cdf.svg"))

    if not written:
        raise MissingInputError(f"no ruin, rate function or ruin-time tables in {out_dir}")
    logger.info(f"Rendered {len(written)} plots in {out_dir}")
    return written
