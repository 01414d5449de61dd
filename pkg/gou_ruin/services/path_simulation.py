"""
Path simulation of (ξ, η), the integral process Z and the GOU process V.

Single paths live on a hybrid grid (uniform mesh plus the exact jump times
of finite-activity models) and are built with left-point (predictable)
sums, using e^{-ξ(τ-)} at a jump time τ. ``simulate_refined_paths`` draws
once on the finest mesh and coarsens, so meshes are coupled path by path.
The discrete embedding at integer times and an iid diagnostic for it are
built on top of single paths.

``simulate_ruin_batch`` is the vectorised engine used by the estimators: a
batch of paths advances cell by cell on the mesh and retires on ruin at the
largest level, on ξ ≥ Θ, or at t_max.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from gou_ruin.core.exceptions import ConfigError, NumericalError
from gou_ruin.schemas.estimates import IidReport, KsComparison
from gou_ruin.schemas.model import CPGaussianModel, ModelSpec
from gou_ruin.services.levy_models import (
    continuous_increments,
    has_finite_activity_jumps,
    sample_jump_marks,
)

logger = logging.getLogger(__name__)

# Exponents beyond this are clamped before exponentiation.
EXP_CLAMP = 700.0
MIN_IID_SAMPLES = 1000


class NegativeInitialValueError(ConfigError):
    """Raised when the GOU process is started below zero."""
    pass


class NonIntegerHorizonError(ConfigError):
    """Raised when the discrete embedding is requested on a non-integer horizon."""
    pass


class InsufficientSamplesError(NumericalError):
    """Raised when too few paths are passed to the iid diagnostics."""
    pass


class StopReason(IntEnum):
    """Why a batch path stopped advancing."""
    RUINED = 0
    THETA = 1
    T_MAX = 2


@dataclass(frozen=True)
class SimGrid:
    """Union of the uniform mesh {0, h, 2h, ...}, the integers and the exact jump times."""
    horizon: float
    step: float
    jump_times: np.ndarray
    times: np.ndarray

    @property
    def jump_indices(self) -> np.ndarray:
        """Grid indices of the jump times."""
        return np.searchsorted(self.times, self.jump_times)


@dataclass(frozen=True)
class PathBundle:
    """One simulated trajectory aligned to its grid."""
    grid: SimGrid
    xi: np.ndarray
    eta: np.ndarray
    z: np.ndarray
    runmin_z: np.ndarray
    seed: Optional[int] = None
    path_id: Optional[int] = None
    underflow: bool = False
    clamped: bool = False
    jump_marks: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    @property
    def times(self) -> np.ndarray:
        return self.grid.times


@dataclass(frozen=True)
class GouPath:
    """The GOU process V on a path grid with its ruin time (None when censored)."""
    v0: float
    v: np.ndarray
    ruin_time: Optional[float]
    horizon: float

    @property
    def censored(self) -> bool:
        return self.ruin_time is None


@dataclass(frozen=True)
class DiscreteEmbedding:
    """
    Unit-interval quantities for n = 1, ..., horizon.

    (A, B) drive V_n = A_n V_{n-1} + B_n; (C, D) drive Z_n through
    Σ Π_{j<i} C_j^{-1} D_i; M = 1/C, Q = D. ``l`` is the supremum form of
    the perturbation term and ``l_bar`` the infimum form. ``x`` is the
    upward perpetuity (sup of Z on (n-1, n]) and ``x_hat`` the ruin-direction
    one built from (M, -Q, -L̄) (minus the inf of Z on (n-1, n]).
    """
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    m: np.ndarray
    q: np.ndarray
    l: np.ndarray
    l_bar: np.ndarray
    x: np.ndarray
    x_hat: np.ndarray
    sup_z: np.ndarray
    inf_z: np.ndarray

    @property
    def n(self) -> int:
        return len(self.m)


@dataclass
class RuinBatch:
    """Per-path outcome of the batch ruin engine."""
    levels: np.ndarray
    final_time: np.ndarray
    final_xi: np.ndarray
    final_z: np.ndarray
    inf_z: np.ndarray
    ruin_times: np.ndarray
    stop_reason: np.ndarray
    clamped: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def size(self) -> int:
        return len(self.final_xi)

    @classmethod
    def concatenate(cls, batches: Sequence["RuinBatch"]) -> "RuinBatch":
        """Join batches in the given order."""
        return cls(
            levels=batches[0].levels,
            final_time=np.concatenate([b.final_time for b in batches]),
            final_xi=np.concatenate([b.final_xi for b in batches]),
            final_z=np.concatenate([b.final_z for b in batches]),
            inf_z=np.concatenate([b.inf_z for b in batches]),
            ruin_times=np.concatenate([b.ruin_times for b in batches]),
            stop_reason=np.concatenate([b.stop_reason for b in batches]),
            clamped=np.concatenate([b.clamped for b in batches]),
        )


# ---------------------------------------------------------------------------
# Single paths
# ---------------------------------------------------------------------------

def build_grid(horizon: float, step: float, jump_times: Sequence[float] = ()) -> SimGrid:
    """
    Build the hybrid grid on [0, horizon].

    Args:
        horizon: Positive time horizon
        step: Mesh width h with 0 < h <= horizon
        jump_times: Exact jump times to insert (outside (0, horizon] are dropped)

    Returns:
        The sorted, deduplicated grid
    """
    if not (0 < step <= horizon):
        raise ConfigError(f"step must satisfy 0 < h <= horizon, got h={step}, horizon={horizon}")
    cells = int(math.floor(horizon / step + 1e-9))
    mesh = np.arange(cells + 1, dtype=float) * step
    integers = np.arange(int(math.floor(horizon)) + 1, dtype=float)
    jumps = np.asarray(sorted(float(t) for t in jump_times if 0 < t <= horizon), dtype=float)
    times = np.unique(np.concatenate([mesh[mesh <= horizon], integers, jumps, [float(horizon)]]))
    return SimGrid(horizon=float(horizon), step=float(step), jump_times=np.unique(jumps), times=times)


def _drift_factor(gamma_xi: float, dt: np.ndarray) -> np.ndarray:
    """∫_0^dt e^{-γ_ξ s} ds, exact for linear ξ between jumps."""
    if gamma_xi == 0:
        return dt
    return -np.expm1(-gamma_xi * dt) / gamma_xi


def _weights(xi: np.ndarray) -> Tuple[np.ndarray, bool, bool]:
    """e^{-ξ} with clamping; also reports underflow (ξ > clamp) and clamping (ξ < -clamp)."""
    underflow = bool(np.any(xi > EXP_CLAMP))
    clamped = bool(np.any(xi < -EXP_CLAMP))
    return np.exp(-np.clip(xi, -EXP_CLAMP, None)), underflow, clamped


def _integral_increments(
    model: ModelSpec,
    xi_left: np.ndarray,
    dt: np.ndarray,
    d_xi_cont: np.ndarray,
    d_eta_cont: np.ndarray,
    jump_y: np.ndarray,
) -> Tuple[np.ndarray, bool, bool]:
    """
    Increments of Z over cells starting at ξ = ``xi_left``.

    The continuous part uses the left endpoint (closed form for the linear
    drift of compound Poisson models); a jump at the cell end uses the left
    limit ξ(τ-) = ξ_left + continuous Δξ.
    """
    weight, underflow, clamped = _weights(xi_left)
    if isinstance(model, CPGaussianModel):
        continuous = model.gamma_eta * weight * _drift_factor(model.gamma_xi, dt)
    else:
        continuous = weight * d_eta_cont
    pre_jump, _, clamped_jump = _weights(xi_left + d_xi_cont)
    jumps = np.where(jump_y != 0, pre_jump * jump_y, 0.0)
    return continuous + jumps, underflow, clamped or clamped_jump


def simulate_path(
    model: ModelSpec,
    horizon: float,
    step: float,
    rng: np.random.Generator,
    jump_times: Optional[Sequence[float]] = None,
    seed: Optional[int] = None,
    path_id: Optional[int] = None,
) -> PathBundle:
    """
    Simulate one trajectory of (ξ, η, Z) on the hybrid grid.

    Args:
        model: Model parameters (validated or an unchecked oracle model)
        horizon: Time horizon
        step: Mesh width h
        rng: Random stream of this path
        jump_times: Pinned jump times for finite-activity models; sampled
            from a Poisson process when omitted
        seed: Provenance recorded on the bundle
        path_id: Provenance recorded on the bundle

    Returns:
        The path bundle with Z[0] = 0 and the running minimum of Z

    Example:
        >>> from gou_ruin.services.levy_models import unit_jump_model
        >>> path = simulate_path(unit_jump_model(), 3.0, 2 ** -8, make_stream(1, StreamTag.PATH), jump_times=[0.5])
    """
    finite_activity = has_finite_activity_jumps(model)
    if finite_activity and jump_times is None:
        count = int(rng.poisson(model.intensity * horizon))
        jump_times = np.sort(rng.uniform(0.0, horizon, count))
    grid = build_grid(horizon, step, jump_times if finite_activity else ())

    dt = np.diff(grid.times)
    d_xi_cont, d_eta_cont = continuous_increments(model, dt, rng)

    jump_x = np.zeros_like(dt)
    jump_y = np.zeros_like(dt)
    marks = np.zeros((0, 2))
    if finite_activity and len(grid.jump_times):
        marks = sample_jump_marks(model, len(grid.jump_times), rng)
        cells = grid.jump_indices - 1
        jump_x[cells] = marks[:, 0]
        jump_y[cells] = marks[:, 1]

    xi = np.concatenate([[0.0], np.cumsum(d_xi_cont + jump_x)])
    eta = np.concatenate([[0.0], np.cumsum(d_eta_cont + jump_y)])
    dz, underflow, clamped = _integral_increments(model, xi[:-1], dt, d_xi_cont, d_eta_cont, jump_y)
    z = np.concatenate([[0.0], np.cumsum(dz)])

    if underflow:
        logger.debug(f"Path {path_id}: e^(-xi) underflowed, contributions truncated to 0")
    return PathBundle(
        grid=grid,
        xi=xi,
        eta=eta,
        z=z,
        runmin_z=np.minimum.accumulate(z),
        seed=seed,
        path_id=path_id,
        underflow=underflow,
        clamped=clamped,
        jump_marks=marks,
    )


def coarsen_path(model: ModelSpec, path: PathBundle, step: float) -> PathBundle:
    """
    Re-evaluate a path on the coarser mesh ``step`` from the same draws.

    (ξ, η) are read off at the coarse grid times and Z is rebuilt with the
    left-point sums of the coarse cells, so paths at different meshes share
    one realisation of the driving process.

    Args:
        model: Model the path was simulated from
        path: Path on a mesh that divides ``step``
        step: Coarse mesh width, an integer multiple of the path's mesh

    Returns:
        The path bundle on the coarse hybrid grid

    Raises:
        ConfigError: ``step`` is not an integer multiple of the path's mesh
    """
    ratio = step / path.grid.step
    if ratio < 1 or abs(ratio - round(ratio)) > 1e-9:
        raise ConfigError(f"step {step} is not an integer multiple of the path mesh {path.grid.step}")
    grid = build_grid(path.grid.horizon, step, path.grid.jump_times)
    index = np.minimum(np.searchsorted(path.times, grid.times - 1e-12), len(path.times) - 1)
    if not np.allclose(path.times[index], grid.times, rtol=0.0, atol=1e-9):
        raise ConfigError(f"grid of step {step} is not contained in the path grid")

    xi = path.xi[index]
    eta = path.eta[index]
    dt = np.diff(grid.times)
    jump_x = np.zeros_like(dt)
    jump_y = np.zeros_like(dt)
    if len(grid.jump_times):
        cells = grid.jump_indices - 1
        jump_x[cells] = path.jump_marks[:, 0]
        jump_y[cells] = path.jump_marks[:, 1]
    d_xi_cont = np.diff(xi) - jump_x
    d_eta_cont = np.diff(eta) - jump_y
    dz, underflow, clamped = _integral_increments(model, xi[:-1], dt, d_xi_cont, d_eta_cont, jump_y)
    z = np.concatenate([[0.0], np.cumsum(dz)])
    return PathBundle(
        grid=grid,
        xi=xi,
        eta=eta,
        z=z,
        runmin_z=np.minimum.accumulate(z),
        seed=path.seed,
        path_id=path.path_id,
        underflow=underflow,
        clamped=clamped,
        jump_marks=path.jump_marks,
    )


def simulate_refined_paths(
    model: ModelSpec,
    horizon: float,
    steps: Sequence[float],
    rng: np.random.Generator,
    seed: Optional[int] = None,
    path_id: Optional[int] = None,
) -> Dict[float, PathBundle]:
    """
    One trajectory evaluated on several meshes.

    The path is simulated once on the finest mesh and coarsened to the others,
    so Z_t(h) converges to Z_t(h_min) path by path as h is refined.

    Example:
        >>> paths = simulate_refined_paths(model, 1.0, [2 ** -4, 2 ** -8, 2 ** -16], make_stream(3, StreamTag.PATH))
        >>> paths[2 ** -4].z[-1] - paths[2 ** -16].z[-1]
    """
    if not steps:
        raise ConfigError("at least one mesh width is required")
    finest = min(float(s) for s in steps)
    fine = simulate_path(model, horizon, finest, rng, seed=seed, path_id=path_id)
    return {float(s): fine if float(s) == finest else coarsen_path(model, fine, float(s)) for s in steps}


def gou_path(path: PathBundle, v0: float) -> GouPath:
    """
    V_t = e^{ξ_t}(v0 + Z_t) on the path grid and the ruin time.

    The ruin time is the first grid time with Z < -v0; None (censored at the
    horizon) when there is none.

    Raises:
        NegativeInitialValueError: v0 < 0
    """
    if v0 < 0:
        raise NegativeInitialValueError(f"v0 must be >= 0, got {v0}")
    v = np.exp(np.clip(path.xi, None, EXP_CLAMP)) * (v0 + path.z)
    below = np.flatnonzero(path.z < -v0)
    ruin_time = float(path.times[below[0]]) if len(below) else None
    return GouPath(v0=v0, v=v, ruin_time=ruin_time, horizon=path.grid.horizon)


def unit_jump_closed_form(path: PathBundle) -> np.ndarray:
    """
    Z_t = -1 + (e - 1) Σ_{τ_i <= t} e^{-τ_i - i} + e^{-t - N_t} for (ξ, η)_t = (t + N_t, -t).
    """
    tau = path.grid.jump_times
    counts = np.searchsorted(tau, path.times, side="right")
    terms = np.exp(-tau - np.arange(1, len(tau) + 1))
    partial = np.concatenate([[0.0], np.cumsum(terms)])
    return -1.0 + (math.e - 1.0) * partial[counts] + np.exp(-path.times - counts)


def path_frame(path: PathBundle, v0: Optional[float] = None) -> pd.DataFrame:
    """Tabular dump with columns t, xi, eta, Z, runmin_Z (and V when v0 is given)."""
    frame = pd.DataFrame(
        {
            "t": path.times,
            "xi": path.xi,
            "eta": path.eta,
            "Z": path.z,
            "runmin_Z": path.runmin_z,
        }
    )
    if v0 is not None:
        frame["V"] = gou_path(path, v0).v
    return frame


# ---------------------------------------------------------------------------
# Discrete embedding
# ---------------------------------------------------------------------------

def solve_sre(a: np.ndarray, b: np.ndarray, y0: float) -> np.ndarray:
    """Solve Y_n = A_n Y_{n-1} + B_n for n = 1, ..., len(a)."""
    y = np.empty(len(a))
    previous = y0
    for n, (a_n, b_n) in enumerate(zip(a, b)):
        previous = a_n * previous + b_n
        y[n] = previous
    return y


def perpetuity_sums(m: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Partial sums Σ_{i<=n} Π_{j<i} M_j Q_i for n = 1, ..., len(m)."""
    products = np.concatenate([[1.0], np.cumprod(m)[:-1]])
    return np.cumsum(products * q)


def discrete_embedding(path: PathBundle) -> DiscreteEmbedding:
    """
    Discrete embedding of a path at integer times.

    Args:
        path: Path with integer horizon (the grid always contains the integers)

    Returns:
        The per-interval quantities for n = 1, ..., horizon

    Raises:
        NonIntegerHorizonError: The horizon is not a positive integer
    """
    horizon = path.grid.horizon
    if horizon != math.floor(horizon) or horizon < 1:
        raise NonIntegerHorizonError(f"horizon must be a positive integer, got {horizon}")
    n = int(horizon)
    idx = np.searchsorted(path.times, np.arange(n + 1, dtype=float))

    xi_n = path.xi[idx]
    z_n = path.z[idx]
    d_xi = np.diff(xi_n)
    d_z = np.diff(z_n)

    sup_z = np.array([path.z[idx[k] + 1: idx[k + 1] + 1].max() for k in range(n)])
    inf_z = np.array([path.z[idx[k] + 1: idx[k + 1] + 1].min() for k in range(n)])

    a = np.exp(d_xi)
    b = np.exp(xi_n[1:]) * d_z
    c = a.copy()
    d = np.exp(xi_n[:-1]) * d_z
    m = 1.0 / c
    q = d
    l = np.exp(xi_n[1:]) * (sup_z - z_n[1:])
    l_bar = -np.exp(xi_n[1:]) * (z_n[1:] - inf_z)

    tail = np.cumprod(m)
    x = perpetuity_sums(m, q) + tail * l
    x_hat = perpetuity_sums(m, -q) + tail * (-l_bar)
    return DiscreteEmbedding(
        a=a, b=b, c=c, d=d, m=m, q=q, l=l, l_bar=l_bar, x=x, x_hat=x_hat, sup_z=sup_z, inf_z=inf_z,
    )


def _lag_one_autocorrelation(values: np.ndarray) -> Tuple[float, int]:
    """Pooled lag-1 autocorrelation over rows (paths) of a (paths, n) array."""
    centred = values - values.mean()
    denominator = float((centred ** 2).sum())
    pairs = values.shape[0] * (values.shape[1] - 1)
    if denominator == 0 or pairs == 0:
        return 0.0, pairs
    numerator = float((centred[:, :-1] * centred[:, 1:]).sum())
    return numerator / denominator, pairs


def iid_diagnostics(embeddings: Sequence[DiscreteEmbedding], significance: float = 0.01) -> IidReport:
    """
    Test that (M_n, Q_n, L̄_n) are iid across n.

    Marginals at index 1 are compared with every later index by two-sample
    Kolmogorov–Smirnov tests (Bonferroni-corrected verdict); lag-1
    autocorrelations are pooled across paths and compared with the normal
    bound z_{1-s/2}/√N.

    Args:
        embeddings: One embedding per path, all with the same n >= 2
        significance: Test level

    Returns:
        The diagnostic report

    Raises:
        InsufficientSamplesError: Fewer than 1000 paths
    """
    if len(embeddings) < MIN_IID_SAMPLES:
        raise InsufficientSamplesError(f"need >= {MIN_IID_SAMPLES} paths, got {len(embeddings)}")
    quantities: Dict[str, np.ndarray] = {
        "M": np.array([e.m for e in embeddings]),
        "Q": np.array([e.q for e in embeddings]),
        "L_bar": np.array([e.l_bar for e in embeddings]),
    }
    n = quantities["M"].shape[1]
    if n < 2:
        raise InsufficientSamplesError("need at least two unit intervals per path")

    comparisons: List[KsComparison] = []
    for name, values in quantities.items():
        for j in range(1, n):
            if np.all(values[:, 0] == values[0, 0]) and np.all(values[:, j] == values[0, 0]):
                statistic, p_value = 0.0, 1.0
            else:
                result = stats.ks_2samp(values[:, 0], values[:, j])
                statistic, p_value = float(result.statistic), float(result.pvalue)
            comparisons.append(
                KsComparison(quantity=name, index_a=1, index_b=j + 1, statistic=statistic, p_value=p_value)
            )

    autocorrelations: Dict[str, float] = {}
    bound = 0.0
    for name, values in quantities.items():
        r, pairs = _lag_one_autocorrelation(values)
        autocorrelations[name] = r
        bound = float(stats.norm.ppf(1.0 - significance / 2.0) / math.sqrt(pairs))

    corrected = significance / len(comparisons)
    ks_passed = all(c.p_value >= corrected for c in comparisons)
    autocorrelation_passed = all(abs(r) <= bound for r in autocorrelations.values())
    return IidReport(
        n_paths=len(embeddings),
        n_intervals=n,
        significance=significance,
        ks=comparisons,
        autocorrelations=autocorrelations,
        autocorrelation_bound=bound,
        passed=ks_passed and autocorrelation_passed,
    )


# ---------------------------------------------------------------------------
# Batch ruin engine
# ---------------------------------------------------------------------------

def _advance(
    model: ModelSpec,
    xi: np.ndarray,
    z: np.ndarray,
    dt: np.ndarray,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Continuous move over ``dt`` per path; returns new ξ, new Z, Δξ, clamp flags."""
    d_xi, d_eta = continuous_increments(model, dt, rng)
    weight = np.exp(-np.clip(xi, -EXP_CLAMP, None))
    clamped = xi < -EXP_CLAMP
    if isinstance(model, CPGaussianModel):
        dz = model.gamma_eta * weight * _drift_factor(model.gamma_xi, dt)
    else:
        dz = weight * d_eta
    return xi + d_xi, z + dz, d_xi, clamped


def simulate_ruin_batch(
    model: ModelSpec,
    levels: Sequence[float],
    size: int,
    step: float,
    theta: float,
    t_max: float,
    rng: np.random.Generator,
    stop_at_largest: bool = True,
) -> RuinBatch:
    """
    Advance ``size`` independent paths until they stop and record ruin times.

    All active paths share the mesh time; jumps of finite-activity models are
    placed at their exact times within each cell. A path stops when Z falls
    below -max(levels) (if ``stop_at_largest``), when ξ >= Θ, or at t_max.

    Args:
        model: Model parameters
        levels: Ascending ruin levels z (may be empty)
        size: Number of paths
        step: Mesh width h
        theta: Stopping level Θ for ξ (inf disables it)
        t_max: Time horizon
        rng: Random stream of this batch
        stop_at_largest: Retire paths once ruined at the largest level

    Returns:
        Per-path final state, infimum of Z and the first time Z < -z per level
        (NaN when not ruined)
    """
    levels = np.asarray(levels, dtype=float)
    n_levels = len(levels)
    finite_activity = has_finite_activity_jumps(model)

    final_time = np.zeros(size)
    final_xi = np.zeros(size)
    final_z = np.zeros(size)
    inf_z = np.zeros(size)
    ruin_times = np.full((size, n_levels), np.nan)
    stop_reason = np.full(size, StopReason.T_MAX, dtype=np.int8)
    clamped = np.zeros(size, dtype=bool)

    active = np.arange(size)
    xi = np.zeros(size)
    z = np.zeros(size)
    runmin = np.zeros(size)
    rt = np.full((size, n_levels), np.nan)
    clamp = np.zeros(size, dtype=bool)
    t = 0.0
    cells = 0

    def record(now: np.ndarray) -> None:
        if n_levels:
            newly = (runmin[:, None] < -levels[None, :]) & np.isnan(rt)
            rt[...] = np.where(newly, now[:, None], rt)

    while len(active):
        delta = min(step, t_max - t)
        count = len(active)
        if finite_activity:
            jumps = rng.poisson(model.intensity * delta, count)
            k_max = int(jumps.max()) if count else 0
            if k_max:
                offsets = rng.uniform(0.0, delta, (count, k_max))
                offsets[np.arange(k_max)[None, :] >= jumps[:, None]] = delta
                offsets.sort(axis=1)
            else:
                offsets = np.zeros((count, 0))
            previous = np.zeros(count)
            for j in range(k_max):
                xi, z, d_xi, c_flag = _advance(model, xi, z, offsets[:, j] - previous, rng)
                clamp |= c_flag
                hit = j < jumps
                marks = sample_jump_marks(model, count, rng)
                weight = np.exp(-np.clip(xi, -EXP_CLAMP, None))
                z = z + np.where(hit, weight * marks[:, 1], 0.0)
                xi = xi + np.where(hit, marks[:, 0], 0.0)
                previous = offsets[:, j]
                np.minimum(runmin, z, out=runmin)
                record(t + offsets[:, j])
            xi, z, _, c_flag = _advance(model, xi, z, delta - previous, rng)
        else:
            xi, z, _, c_flag = _advance(model, xi, z, np.full(count, delta), rng)
        clamp |= c_flag
        t = t + delta if t + delta < t_max else t_max
        cells += 1
        np.minimum(runmin, z, out=runmin)
        record(np.full(count, t))

        ruined = (runmin < -levels[-1]) if (stop_at_largest and n_levels) else np.zeros(count, dtype=bool)
        over_theta = xi >= theta
        done = ruined | over_theta | (t >= t_max)
        if not done.any():
            continue

        ids = active[done]
        final_time[ids] = t
        final_xi[ids] = xi[done]
        final_z[ids] = z[done]
        inf_z[ids] = runmin[done]
        ruin_times[ids] = rt[done]
        clamped[ids] = clamp[done]
        stop_reason[ids] = np.where(
            ruined[done], StopReason.RUINED, np.where(over_theta[done], StopReason.THETA, StopReason.T_MAX)
        )

        keep = ~done
        active, xi, z, runmin, rt, clamp = active[keep], xi[keep], z[keep], runmin[keep], rt[keep], clamp[keep]

    logger.debug(f"Batch of {size} paths finished after {cells} cells (t={t:.4g})")
    return RuinBatch(
        levels=levels,
        final_time=final_time,
        final_xi=final_xi,
        final_z=final_z,
        inf_z=inf_z,
        ruin_times=ruin_times,
        stop_reason=stop_reason,
        clamped=clamped,
    )
