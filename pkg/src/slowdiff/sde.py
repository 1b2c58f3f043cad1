"""Reproducible Monte Carlo for ``dy = dW - V'(y) dt`` started at 0.

Paths are advanced by Euler-Maruyama with counter-based per-path random
streams (see :mod:`slowdiff.rng`), so every observable is a deterministic
function of the plan and potential, whatever the number of worker threads.
"""
from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from ._core import backend
from .errors import ArgumentError, StatisticalValidityWarning
from .homogenization import multiscale_diffusivity
from .potential import MultiScalePotential, truncation_error
from .rng import philox_key

#: tolerated sup of the neglected tail of an infinite model over the simulation box
TRUNCATION_TOLERANCE = 1e-3
#: paths handed to one backend call (bounds memory of the numpy fallback)
BATCH_PATHS = 1 << 15


def default_threads() -> int:
    env = os.environ.get("SLOWDIFF_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SimulationPlan:
    """Monte Carlo configuration.

    ``truncation_factor`` sets the per-radius step cap at
    ``truncation_factor * r^2 / D(V_0^{n_ef(r)}) / dt``; ``max_steps`` overrides
    it. ``threads`` only affects speed.
    """

    dt: float
    n_paths: int
    master_seed: int = 0
    horizon: float | None = None
    n_max: int | None = None
    bridge_correction: bool = True
    threads: int | None = None
    truncation_factor: float = 1e4
    max_steps: int | None = None

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ArgumentError("dt must be a positive finite number")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ArgumentError("n_paths must be an integer >= 1")
        if self.horizon is not None and not self.horizon > 0:
            raise ArgumentError("horizon must be > 0")
        if self.threads is not None and self.threads < 1:
            raise ArgumentError("threads must be >= 1")
        if self.max_steps is not None and self.max_steps < 1:
            raise ArgumentError("max_steps must be >= 1")
        if not self.truncation_factor > 0:
            raise ArgumentError("truncation_factor must be > 0")

    def check_against(self, msp: MultiScalePotential):
        period = msp.finest_period()
        if math.isfinite(period) and self.dt > period**2 / 100.0 * (1 + 1e-12):
            raise ArgumentError(f"dt={self.dt} exceeds (finest period)^2/100 = {period**2 / 100}")


@dataclass(frozen=True)
class ExitTimeSummary:
    radius: float
    mean: float
    stderr: float
    count: int
    truncated: int
    flags: tuple[str, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.flags


@dataclass(frozen=True)
class MsdSeries:
    checkpoints: np.ndarray
    msd: np.ndarray
    stderr: np.ndarray
    mean: np.ndarray
    mean_stderr: np.ndarray
    count: int


@dataclass(frozen=True)
class TailEstimate:
    t: float
    h: np.ndarray
    probability: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    exceedances: np.ndarray
    count: int
    flagged: np.ndarray = field(default=None)


def _truncated_model(msp: MultiScalePotential, plan: SimulationPlan) -> MultiScalePotential:
    if plan.n_max is None or plan.n_max >= msp.n_max:
        return msp
    if plan.n_max < 0:
        raise ArgumentError("plan.n_max must be >= 0")
    return MultiScalePotential(msp.potentials, msp.schedule, plan.n_max, msp.infinite)


def _check_truncation(msp, box):
    err = truncation_error(msp, box)
    if err >= TRUNCATION_TOLERANCE:
        raise ArgumentError(f"neglected scales contribute up to {err:.3g} over |x| <= {box}; "
                            f"raise n_max so this stays below {TRUNCATION_TOLERANCE}")


def _drift_table(msp):
    omega, a, b = msp.harmonic_table()
    return (np.ascontiguousarray(omega), np.ascontiguousarray(a), np.ascontiguousarray(b))


def _batches(n_paths):
    for start in range(0, n_paths, BATCH_PATHS):
        yield start, min(BATCH_PATHS, n_paths - start)


def effective_level(msp: MultiScalePotential, r: float) -> int:
    """``n_ef(r)`` capped at ``n_max`` (higher scales of a finite model vanish)."""
    n = 0
    while n < msp.n_max and msp.radius(n + 1) <= r:
        n += 1
    return n


def exit_step_caps(msp: MultiScalePotential, plan: SimulationPlan, radii) -> np.ndarray:
    """Per-radius step caps, made nondecreasing in the radius."""
    if plan.max_steps is not None:
        return np.full(len(radii), int(plan.max_steps), dtype=np.int64)
    caps = []
    for r in radii:
        D = multiscale_diffusivity(msp, effective_level(msp, r)).value
        caps.append(min(int(math.ceil(plan.truncation_factor * r * r / D / plan.dt)), 2**62))
    return np.maximum.accumulate(np.array(caps, dtype=np.int64))


def exit_time_samples(msp: MultiScalePotential, plan: SimulationPlan, radii) -> np.ndarray:
    """Raw exit times, shape (n_paths, len(radii)); truncated paths are ``inf``."""
    msp = _truncated_model(msp, plan)
    plan.check_against(msp)
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0 or not np.all(radii > 0):
        raise ArgumentError("radii must be a nonempty list of positive numbers")
    _check_truncation(msp, float(radii.max()))
    order = np.argsort(radii, kind="stable")
    sorted_r = np.ascontiguousarray(radii[order])
    caps = exit_step_caps(msp, plan, sorted_r)
    omega, a, b = _drift_table(msp)
    k0, k1 = philox_key(plan.master_seed)
    threads = plan.threads or default_threads()
    out = np.empty((plan.n_paths, radii.size))
    for start, count in _batches(plan.n_paths):
        block = backend.exit_times(omega, a, b, sorted_r, caps, float(plan.dt), k0, k1,
                                   start, count, bool(plan.bridge_correction), threads)
        out[start:start + count, order] = block
    return out


def summarize_exit_times(radii, samples) -> list[ExitTimeSummary]:
    out = []
    for j, r in enumerate(radii):
        col = samples[:, j]
        done = col[np.isfinite(col)]
        truncated = int(col.size - done.size)
        flags = []
        if truncated > 0.01 * col.size:
            flags.append("truncated_fraction_above_1pct")
            warnings.warn(f"{truncated}/{col.size} paths truncated at r={r}; "
                          "the mean is biased low", StatisticalValidityWarning, stacklevel=3)
        n = done.size
        if n == 0:
            mean, se = math.nan, math.nan
            flags.append("no_exits")
        else:
            mean = float(np.sum(done)) / n
            se = float(np.std(done, ddof=1)) / math.sqrt(n) if n > 1 else math.inf
        out.append(ExitTimeSummary(float(r), mean, se, n, truncated, tuple(flags)))
    return out


def sample_exit_times(msp: MultiScalePotential, plan: SimulationPlan, radii) -> list[ExitTimeSummary]:
    """Mean first exit time of ``(-r, r)`` from 0 for every radius.

    A path that crosses ``r`` inside a step (both endpoints inside) is counted
    as exited with the Brownian-bridge probability
    ``exp(-2(r-y)(r-y')/dt) + exp(-2(r+y)(r+y')/dt)`` when bridge correction is
    on. The exit time is the end of the step.
    """
    samples = exit_time_samples(msp, plan, radii)
    return summarize_exit_times(np.asarray(radii, dtype=float), samples)


def _checkpoint_steps(plan, checkpoints):
    t = np.asarray(checkpoints, dtype=float)
    if t.ndim != 1 or t.size == 0 or not np.all(t > 0):
        raise ArgumentError("checkpoints must be a nonempty list of positive times")
    if np.any(np.diff(t) <= 0):
        raise ArgumentError("checkpoints must be strictly increasing")
    if plan.horizon is not None and t[-1] > plan.horizon * (1 + 1e-12):
        raise ArgumentError(f"checkpoint {t[-1]} lies beyond the horizon {plan.horizon}")
    steps = np.rint(t / plan.dt).astype(np.int64)
    if np.any(np.abs(steps * plan.dt - t) > 1e-9 * np.maximum(t, 1.0)):
        raise ArgumentError("checkpoints must be multiples of dt")
    return t, steps


def positions(msp: MultiScalePotential, plan: SimulationPlan, checkpoints) -> np.ndarray:
    """Positions ``y_t`` at the checkpoint times, shape (n_paths, len(checkpoints))."""
    msp = _truncated_model(msp, plan)
    plan.check_against(msp)
    _, steps = _checkpoint_steps(plan, checkpoints)
    omega, a, b = _drift_table(msp)
    k0, k1 = philox_key(plan.master_seed)
    threads = plan.threads or default_threads()
    out = np.empty((plan.n_paths, steps.size))
    for start, count in _batches(plan.n_paths):
        out[start:start + count] = backend.positions_at(omega, a, b, steps, float(plan.dt),
                                                        k0, k1, start, count, threads)
    return out


def simulate_msd(msp: MultiScalePotential, plan: SimulationPlan, checkpoints) -> MsdSeries:
    """``E[y_t^2]`` (and ``E[y_t]``) with standard errors at the checkpoint times."""
    t, _ = _checkpoint_steps(plan, checkpoints)
    y = positions(msp, plan, t)
    n = y.shape[0]
    sq = y * y
    msd = np.sum(sq, axis=0) / n
    mean = np.sum(y, axis=0) / n
    if n > 1:
        se = np.std(sq, axis=0, ddof=1) / math.sqrt(n)
        mse = np.std(y, axis=0, ddof=1) / math.sqrt(n)
    else:
        se = mse = np.full(t.size, math.inf)
    return MsdSeries(t, msd, se, mean, mse, n)


def survival_intervals(k, n, confidence=0.95, min_exceedances=10):
    """Wilson intervals; where ``k < min_exceedances`` the interval is widened to
    the union with the exact Clopper-Pearson interval and flagged."""
    lower, upper, flagged = [], [], []
    for ki in np.asarray(k, dtype=int):
        res = binomtest(int(ki), int(n))
        lo, hi = res.proportion_ci(confidence, method="wilson")
        flag = ki < min_exceedances
        if flag:
            elo, ehi = res.proportion_ci(confidence, method="exact")
            lo, hi = min(lo, elo), max(hi, ehi)
        lower.append(lo)
        upper.append(hi)
        flagged.append(flag)
    return np.array(lower), np.array(upper), np.array(flagged)


def estimate_tail(msp: MultiScalePotential, plan: SimulationPlan, t: float, h_grid,
                  box: float | None = None) -> TailEstimate:
    """Empirical ``P(|y_t| >= h)`` with 95% binomial confidence intervals.

    ``box`` is the spatial extent over which the truncated model is trusted
    (default: unbounded for finite models).
    """
    h = np.asarray(h_grid, dtype=float)
    if h.ndim != 1 or h.size == 0 or np.any(h < 0):
        raise ArgumentError("h_grid must be a nonempty list of nonnegative numbers")
    if np.any(np.diff(h) < 0):
        raise ArgumentError("h_grid must be nondecreasing")
    if box is not None and h[-1] > box:
        raise ArgumentError(f"h={h[-1]} lies outside the simulation box {box}")
    if box is not None:
        _check_truncation(_truncated_model(msp, plan), box)
    y = positions(msp, plan, [t])[:, 0]
    ay = np.sort(np.abs(y))
    n = ay.size
    k = n - np.searchsorted(ay, h, side="left")
    lo, hi, flagged = survival_intervals(k, n)
    if np.any(flagged):
        warnings.warn("fewer than 10 exceedances at some h; intervals widened",
                      StatisticalValidityWarning, stacklevel=2)
    return TailEstimate(float(t), h, k / n, lo, hi, k, n, flagged)
