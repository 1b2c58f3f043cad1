"""Effective-scale bookkeeping, predicted exponents and their comparison with
Monte Carlo measurements.

Constants that have no numerical value in the theory are keyword arguments
with heuristic defaults; nothing here treats them as known.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress

from .errors import ArgumentError
from .homogenization import multiscale_diffusivity
from .potential import ModelConstants, MultiScalePotential, ScaleSchedule, model_constants

#: ``C_1`` and ``C_2`` of the mean-squared-displacement envelope
MSD_LOWER_CONSTANT = 1.0 / 24.0
MSD_UPPER_CONSTANT = 500.0


def _radii_until(schedule, stop):
    """Yield ``(n, R_n)`` while ``stop(R_n)`` is false, within the schedule's levels."""
    n, R = 0, 1
    yield n, R
    while n < schedule.levels:
        R *= schedule.ratio(n + 1)
        n += 1
        if stop(R):
            return
        yield n, R


def _schedule_of(obj):
    return obj.schedule if isinstance(obj, MultiScalePotential) else obj


def effective_scales(schedule, r: float) -> int:
    """``n_ef(r) = sup{n >= 0 : R_n <= r}`` (limited to the schedule's levels)."""
    if not r >= 1:
        raise ArgumentError("r must be >= 1")
    last = 0
    for n, _ in _radii_until(_schedule_of(schedule), lambda R: R > r):
        last = n
    return last


def fluctuating_scales(schedule, t: float) -> int:
    """``n_flu(t) = sup{n >= 0 : R_n^2 <= t}``."""
    if not t >= 1:
        raise ArgumentError("t must be >= 1")
    last = 0
    for n, _ in _radii_until(_schedule_of(schedule), lambda R: R * R > t):
        last = n
    return last


def _model_level(msp: MultiScalePotential, n: int) -> int:
    # scales above n_max of a finite model vanish, so V_0^n = V_0^{n_max}
    if n > msp.n_max and msp.infinite:
        raise ArgumentError(f"level {n} exceeds the truncation n_max={msp.n_max} of an infinite model")
    return min(n, msp.n_max)


def model_diffusivity(msp: MultiScalePotential, n: int) -> float:
    """``D(V_0^n)``, with the vanishing scales of a finite model accounted for."""
    return multiscale_diffusivity(msp, _model_level(msp, n)).value


@dataclass(frozen=True)
class ScaleCount:
    n_ef: int
    n_flu: int
    n_per: int
    degenerate: bool = False


def perturbation_scales(msp: MultiScalePotential, t: float, constants: ModelConstants | None = None):
    """``(n_per, degenerate)`` with
    ``n_per = inf{n : R_{n_flu - n}^2 e^{14 n K0} 10^4 <= t D(V_0^{n_flu})}``.

    ``n`` ranges over ``0..n_flu``; when the condition never holds, ``n_per``
    is clamped to ``n_flu`` and ``degenerate`` is True.
    """
    c = constants or model_constants(msp)
    n_flu = fluctuating_scales(msp.schedule, t)
    rhs = t * model_diffusivity(msp, n_flu)
    for n in range(n_flu + 1):
        lhs = math.log(msp.radius(n_flu - n)) * 2.0 + 14.0 * n * c.K0 + math.log(1e4)
        if lhs <= math.log(rhs):
            return n, False
    return n_flu, True


def scale_counts(msp: MultiScalePotential, r: float, t: float, constants=None) -> ScaleCount:
    n_per, degenerate = perturbation_scales(msp, t, constants)
    return ScaleCount(effective_scales(msp.schedule, r), fluctuating_scales(msp.schedule, t),
                      n_per, degenerate)


def exit_constant(c: ModelConstants, rho_min: float) -> float:
    """``C_tau = 4 exp(6 (K0 + K1 / (rho_min - 1)))``."""
    tail = c.K1 / (rho_min - 1.0) if math.isfinite(rho_min) else 0.0
    return 4.0 * math.exp(6.0 * (c.K0 + tail))


def predict_exit(msp: MultiScalePotential, r: float, constants: ModelConstants | None = None):
    """``(r^2 / D(V_0^{n_ef(r)}), C_tau)``; the mean exit time of ``(-r, r)`` is
    expected inside ``[prediction / C_tau, prediction * C_tau]``."""
    n = effective_scales(msp.schedule, r)
    c = constants or model_constants(msp)
    return r * r / model_diffusivity(msp, n), exit_constant(c, msp.rho_min)


def _schedule_extremes(schedule: ScaleSchedule, levels: int | None):
    if schedule.kind == "geometric":
        return float(schedule.rho), float(schedule.rho)
    n = levels or (len(schedule.ratios) if schedule.kind == "ratios" else 16)
    ratios = [schedule.ratio(k) for k in range(1, n + 1)]
    return float(min(ratios)), (math.inf if schedule.kind == "stretched" else float(max(ratios)))


def exponent_bounds_nu1(c: ModelConstants, schedule: ScaleSchedule, C1: float | None = None,
                        levels: int | None = None) -> tuple[float, float]:
    """Bracket on the exit-time exponent
    ``-ln lmax/ln rho_max - C1/(rho_min ln rho_max) <= nu_1 <= -ln lmin/ln rho_min + C1/(rho_min ln rho_min)``.

    ``C1`` defaults to the heuristic ``6 (K0 + K1)``.
    """
    C1 = 6.0 * (c.K0 + c.K1) if C1 is None else C1
    rmin, rmax = _schedule_extremes(schedule, levels)
    if math.isinf(rmax):
        lower = 0.0
    else:
        lower = -math.log(c.lambda_max) / math.log(rmax) - C1 / (rmin * math.log(rmax))
    upper = -math.log(c.lambda_min) / math.log(rmin) + C1 / (rmin * math.log(rmin))
    return lower, upper


@dataclass(frozen=True)
class ExponentFit:
    """Pointwise exponents and a log-log regression.

    ``kind="exit"``: ``E[tau] = r^{2 + nu}``; ``kind="msd"``: ``E[y^2] = t^{1 - nu/2}``.
    """

    kind: str
    abscissae: np.ndarray
    ordinates: np.ndarray
    pointwise: np.ndarray
    pointwise_stderr: np.ndarray
    slope: float
    slope_stderr: float
    intercept: float

    def invert(self) -> np.ndarray:
        """Ordinates reconstructed from the pointwise exponents."""
        x = self.abscissae
        if self.kind == "exit":
            return np.exp((2.0 + self.pointwise) * np.log(x))
        return np.exp((1.0 - self.pointwise / 2.0) * np.log(x))

    @property
    def slope_exponent(self) -> float:
        """Exponent implied by the regression slope."""
        return self.slope - 2.0 if self.kind == "exit" else 2.0 * (1.0 - self.slope)


def fit_exponents(x, y, y_stderr=None, kind: str = "exit") -> ExponentFit:
    """Pointwise exponents ``nu_1(r) = ln E/ln r - 2`` or ``nu_2(t) = 2(1 - ln E/ln t)``,
    delta-method standard errors and an ordinary least-squares log-log slope."""
    if kind not in ("exit", "msd"):
        raise ArgumentError("kind must be 'exit' or 'msd'")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or x.size < 2:
        raise ArgumentError("need at least two (x, y) points")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ArgumentError("ordinates must be positive and finite")
    if np.any(x <= 1):
        raise ArgumentError("abscissae must exceed 1 for pointwise exponents")
    lx, ly = np.log(x), np.log(y)
    if kind == "exit":
        nu = ly / lx - 2.0
        scale = 1.0 / lx
    else:
        nu = 2.0 * (1.0 - ly / lx)
        scale = 2.0 / lx
    if y_stderr is None:
        se = np.full(x.size, math.nan)
    else:
        se = scale * np.asarray(y_stderr, dtype=float) / y
    if x.size > 2:
        reg = linregress(lx, ly)
        slope, slope_se, intercept = float(reg.slope), float(reg.stderr), float(reg.intercept)
    else:
        slope = float((ly[1] - ly[0]) / (lx[1] - lx[0]))
        slope_se, intercept = math.nan, float(ly[0] - slope * lx[0])
    return ExponentFit(kind, x, y, nu, se, slope, slope_se, intercept)


@dataclass(frozen=True)
class MsdEnvelope:
    lower: float
    upper: float
    diffusivity: float
    counts: ScaleCount

    @property
    def degenerate(self) -> bool:
        return self.counts.degenerate

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def msd_envelope(msp: MultiScalePotential, t: float, constants: ModelConstants | None = None) -> MsdEnvelope:
    """``(e^{-8 n_per K0} D(V_0^{n_flu}) t / 24, 500 e^{8 n_per K0} D(V_0^{n_flu}) t)``."""
    c = constants or model_constants(msp)
    n_flu = fluctuating_scales(msp.schedule, t)
    if n_flu < 1:
        raise ArgumentError(f"need t >= R_1^2 = {msp.radius(1) ** 2}, got {t}")
    n_per, degenerate = perturbation_scales(msp, t, c)
    D = model_diffusivity(msp, n_flu)
    f = math.exp(8.0 * n_per * c.K0)
    counts = ScaleCount(effective_scales(msp.schedule, math.sqrt(t)), n_flu, n_per, degenerate)
    return MsdEnvelope(MSD_LOWER_CONSTANT * D * t / f, MSD_UPPER_CONSTANT * D * t * f, D, counts)


def predict_nu_ef(msp: MultiScalePotential, t: float) -> float:
    """``ln(1/lambda_ef) / ln rho_ef`` with ``rho_ef^n = R_n`` and
    ``lambda_ef^{n+1} = D(V_0^n)``, where ``n`` counts the scales whose mixing
    time ``R_n^2`` is below ``t``."""
    n = fluctuating_scales(msp.schedule, t)
    if n < 1:
        raise ArgumentError("no homogenized scale at this time; the prediction is undefined")
    D = model_diffusivity(msp, n)
    log_rho = math.log(msp.radius(n)) / n
    log_lambda = math.log(D) / (n + 1)
    return -log_lambda / log_rho


def nu2_bracket(nu_ef: float, rho_min: float, C_K1: float = 1.0) -> tuple[float, float]:
    """``(nu_ef (1 - C_K1/ln rho_min), nu_ef (1 + C_K1/ln rho_min))``."""
    s = C_K1 / math.log(rho_min)
    return nu_ef * (1.0 - s), nu_ef * (1.0 + s)


def walk_dimensions(lam: float, rho: float) -> tuple[float, float, float]:
    """Walk dimensions from the exit-time, mean-squared-displacement and tail exponents."""
    if not 0.0 < lam <= 1.0:
        raise ArgumentError("need 0 < lambda <= 1")
    if not rho >= 2.0:
        raise ArgumentError("need rho >= 2")
    ll, lr = math.log(lam), math.log(rho)
    d1 = 2.0 / (1.0 + ll / (2.0 * lr))
    d2 = 2.0 - ll / lr
    d3 = 1.0 + 1.0 / (1.0 + ll / (lr - 0.5 * ll))
    return d1, d2, d3


@dataclass(frozen=True)
class TailPrediction:
    log_bound: float
    nu3: float
    n_ef: int
    in_window: bool
    violations: tuple[str, ...]


def tail_prediction(lam: float, rho: float, t: float, h: float, C6: float = 1.0, *,
                    C5: float = 1.0, C3: float = 1.0, C4: float = 0.0,
                    schedule: ScaleSchedule | None = None) -> TailPrediction:
    """``ln P(|y_t| >= h) <= -C6 (h^2/t) (t/h)^{nu_3}`` with ``nu_3 = -ln lambda/ln rho``.

    The window ``t/h >= C5`` and ``h^2/t >= C3 (t/h)^{ln lambda/(2 ln rho) + C4/(ln rho)^2}``
    is evaluated and reported; the bound is returned either way.
    """
    if not (0.0 < lam <= 1.0 and rho >= 2.0 and t > 0 and h > 0):
        raise ArgumentError("need 0 < lambda <= 1, rho >= 2, t > 0, h > 0")
    lr = math.log(rho)
    nu3 = -math.log(lam) / lr
    x = t / h
    sched = schedule
    if sched is None and float(rho).is_integer():
        sched = ScaleSchedule.geometric(int(rho))
    if sched is not None:
        n_ef = effective_scales(sched, x) if x >= 1 else 0
    else:
        n_ef = max(0, int(math.floor(math.log(x) / lr + 1e-12))) if x >= 1 else 0
    violations = []
    if x < C5:
        violations.append("t/h < C5")
    if h * h / t < C3 * x ** (math.log(lam) / (2.0 * lr) + C4 / lr**2):
        violations.append("h^2/t below the lower window edge")
    log_bound = -C6 * h * h / t * x**nu3
    return TailPrediction(log_bound, nu3, n_ef, not violations, tuple(violations))


def weak_anomaly_predict(rho: float, alpha: float, lam: float, t: float, which: str = "f") -> float:
    """Slowly varying corrections under fast scale separation.

    ``f(t) = (ln t)^{1/alpha} ln(1/lambda) (2 ln rho)^{-1/alpha}`` (MSD),
    ``g(r) = (ln r)^{1/alpha} ln(1/lambda) (ln rho)^{-1/alpha}`` (exit times),
    ``k(x) = lambda^{-(x/ln rho)^{1/alpha}}`` (tails); the argument is ``t``.
    """
    if not alpha > 1:
        raise ArgumentError("need alpha > 1")
    if not (0.0 < lam <= 1.0 and rho > 1.0 and t > 0):
        raise ArgumentError("need 0 < lambda <= 1, rho > 1, t > 0")
    lr, inv = math.log(rho), 1.0 / alpha
    if which == "f":
        return math.log(t) ** inv * math.log(1.0 / lam) * (2.0 * lr) ** -inv
    if which == "g":
        return math.log(t) ** inv * math.log(1.0 / lam) * lr**-inv
    if which == "k":
        return lam ** (-((t / lr) ** inv))
    raise ArgumentError("which must be 'f', 'g' or 'k'")


@dataclass(frozen=True)
class ExitComparison:
    radius: float
    measured: float
    stderr: float
    prediction: float
    factor: float

    @property
    def inside(self) -> bool:
        return self.prediction / self.factor <= self.measured <= self.prediction * self.factor


def compare_exit(msp: MultiScalePotential, radii, means, stderrs, constants=None) -> list[ExitComparison]:
    c = constants or model_constants(msp)
    out = []
    for r, m, s in zip(radii, means, stderrs):
        pred, factor = predict_exit(msp, float(r), c)
        out.append(ExitComparison(float(r), float(m), float(s), pred, factor))
    return out
