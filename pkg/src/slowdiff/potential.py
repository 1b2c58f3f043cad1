"""Periodic potentials, scale schedules and multi-scale potentials.

A multi-scale potential is ``V(x) = sum_k U_k(x / R_k)`` where each ``U_k`` is a
1-periodic trigonometric polynomial vanishing at the origin and ``R_k`` are
integer radii with integer ratios ``r_k = R_k / R_{k-1} >= 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ArgumentError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PeriodicPotential:
    """Finite trigonometric series ``sum a_k cos(2 pi k x) + b_k sin(2 pi k x) + c``.

    The offset ``c`` is fixed at construction so that the value at 0 is 0.
    """

    harmonics: tuple[tuple[int, float, float], ...] = ()
    offset: float = field(init=False)

    def __post_init__(self):
        merged: dict[int, list[float]] = {}
        for h in self.harmonics:
            if len(h) != 3:
                raise ArgumentError(f"harmonic must be (k, a, b), got {h!r}")
            k, a, b = h
            if int(k) != k or k < 1:
                raise ArgumentError(f"harmonic frequency must be an integer >= 1, got {k!r}")
            acc = merged.setdefault(int(k), [0.0, 0.0])
            acc[0] += float(a)
            acc[1] += float(b)
        harmonics = tuple((k, a, b) for k, (a, b) in sorted(merged.items()) if a != 0.0 or b != 0.0)
        object.__setattr__(self, "harmonics", harmonics)
        object.__setattr__(self, "offset", -math.fsum(a for _, a, _ in harmonics))

    @classmethod
    def sine(cls, amplitude=1.0, k=1):
        return cls(((k, 0.0, amplitude),))

    @property
    def is_zero(self) -> bool:
        return not self.harmonics

    @property
    def max_frequency(self) -> int:
        return max((k for k, _, _ in self.harmonics), default=0)

    @property
    def coefficient_norm(self) -> float:
        """``sum |a_k| + |b_k|``; bounds ``|U - offset|`` pointwise."""
        return math.fsum(abs(a) + abs(b) for _, a, b in self.harmonics)

    def _arrays(self):
        k = np.array([h[0] for h in self.harmonics], dtype=float)
        a = np.array([h[1] for h in self.harmonics], dtype=float)
        b = np.array([h[2] for h in self.harmonics], dtype=float)
        return k, a, b

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, self.offset)
        for k, a, b in self.harmonics:
            phase = TWO_PI * k * x
            if a:
                out = out + a * np.cos(phase)
            if b:
                out = out + b * np.sin(phase)
        return out if out.ndim else float(out)

    def derivative(self, x, order=1):
        """Exact derivative of the given order."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for k, a, b in self.harmonics:
            w = TWO_PI * k
            phase = w * x
            # d^n/dx^n of (a cos + b sin) cycles with period 4
            c, s = np.cos(phase), np.sin(phase)
            r = order % 4
            if r == 0:
                term = a * c + b * s
            elif r == 1:
                term = -a * s + b * c
            elif r == 2:
                term = -a * c - b * s
            else:
                term = a * s - b * c
            out = out + w**order * term
        return out if out.ndim else float(out)

    def shifted(self, s: float) -> "PeriodicPotential":
        """``x -> U(x + s)`` re-anchored so it still vanishes at 0."""
        hs = []
        for k, a, b in self.harmonics:
            c, sn = math.cos(TWO_PI * k * s), math.sin(TWO_PI * k * s)
            hs.append((k, a * c + b * sn, b * c - a * sn))
        return PeriodicPotential(tuple(hs))

    def scaled(self, factor: float) -> "PeriodicPotential":
        return PeriodicPotential(tuple((k, factor * a, factor * b) for k, a, b in self.harmonics))

    def oscillation(self, grid_points=None) -> float:
        """``sup U - inf U`` from a grid scan refined around the extrema."""
        if self.is_zero:
            return 0.0
        lo, hi = _grid_extrema(self, grid_points)
        return hi - lo

    def lipschitz(self, grid_points=None) -> float:
        """``sup |U'|`` from a grid scan refined around the extrema."""
        if self.is_zero:
            return 0.0
        lo, hi = _grid_extrema(_Derivative(self), grid_points)
        return max(-lo, hi)


class _Derivative:
    def __init__(self, U):
        self.U = U
        self.max_frequency = U.max_frequency

    def __call__(self, x):
        return self.U.derivative(x)


def _grid_extrema(f, grid_points=None):
    """Global min and max of a 1-periodic smooth ``f`` (grid scan + local polish)."""
    n = grid_points or 1024 * max(f.max_frequency, 1)
    x = np.arange(n) / n
    y = f(x)
    h = 1.0 / n
    out = []
    for sign in (1.0, -1.0):
        i = int(np.argmax(sign * y))
        res = minimize_scalar(lambda t: -sign * float(f(t)), bounds=(x[i] - h, x[i] + h),
                              method="bounded", options={"xatol": 1e-12})
        best = max(sign * y[i], -res.fun)
        out.append(sign * best)
    return out[1], out[0]


@dataclass(frozen=True)
class ScaleSchedule:
    """Integer radii ``R_0 = 1 < R_1 < ...`` with integer ratios ``>= 2``.

    ``kind`` is ``"ratios"`` (explicit finite list), ``"geometric"`` (``r_k = rho``)
    or ``"stretched"`` (``R_n = R_{n-1} * floor(rho**(n**alpha) / R_{n-1})``).
    """

    kind: str
    ratios: tuple[int, ...] = ()
    rho: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.kind == "ratios":
            ratios = tuple(self.ratios)
            for r in ratios:
                if int(r) != r:
                    raise ArgumentError(f"scale ratios must be integers, got {r!r}")
            object.__setattr__(self, "ratios", tuple(int(r) for r in ratios))
        elif self.kind == "geometric":
            if self.rho is None or int(self.rho) != self.rho:
                raise ArgumentError("geometric schedule needs an integer rho")
            object.__setattr__(self, "rho", int(self.rho))
        elif self.kind == "stretched":
            if self.rho is None or self.alpha is None or self.rho <= 1 or self.alpha <= 1:
                raise ArgumentError("stretched schedule needs rho > 1 and alpha > 1")
        else:
            raise ArgumentError(f"unknown schedule kind {self.kind!r}")
        for r in self.ratios if self.kind == "ratios" else self._ratios_upto(8):
            if r < 2:
                raise ArgumentError(f"scale ratios must be >= 2, got {r}")

    @classmethod
    def geometric(cls, rho: int) -> "ScaleSchedule":
        return cls("geometric", rho=rho)

    @classmethod
    def explicit(cls, ratios: Sequence[int]) -> "ScaleSchedule":
        return cls("ratios", ratios=tuple(ratios))

    @classmethod
    def stretched(cls, rho: float, alpha: float) -> "ScaleSchedule":
        return cls("stretched", rho=rho, alpha=alpha)

    @property
    def levels(self) -> float:
        """Number of available ratios (``inf`` for unbounded schedules)."""
        return len(self.ratios) if self.kind == "ratios" else math.inf

    def _ratios_upto(self, n: int) -> list[int]:
        if self.kind == "ratios":
            if n > len(self.ratios):
                raise ArgumentError(f"schedule defines only {len(self.ratios)} ratios, asked for {n}")
            return list(self.ratios[:n])
        if self.kind == "geometric":
            return [self.rho] * n
        out, R = [], 1
        for k in range(1, n + 1):
            r = int(math.floor(self.rho ** (k ** self.alpha) / R))
            if r < 2:
                raise ArgumentError(f"stretched schedule produced ratio {r} < 2 at level {k}")
            out.append(r)
            R *= r
        return out

    def ratio(self, k: int) -> int:
        if k < 1:
            raise ArgumentError("ratios are indexed from 1")
        return self._ratios_upto(k)[-1]

    def radii(self, n: int) -> list[int]:
        """``[R_0, ..., R_n]`` as exact Python integers."""
        out = [1]
        for r in self._ratios_upto(n):
            out.append(out[-1] * r)
        return out

    def radius(self, k: int) -> int:
        return self.radii(k)[-1]

    def rho_min(self, n: int | None = None) -> int:
        n = n if n is not None else (len(self.ratios) if self.kind == "ratios" else 16)
        if self.kind == "geometric":
            return self.rho
        return min(self._ratios_upto(max(n, 1)))

    def rho_max(self, n: int | None = None) -> float:
        if self.kind == "geometric":
            return self.rho
        if self.kind == "stretched":
            return math.inf
        n = n if n is not None else len(self.ratios)
        return max(self._ratios_upto(max(n, 1)))


@dataclass(frozen=True)
class MultiScalePotential:
    """``V_0^{n_max}(x) = sum_{k <= n_max} U_k(x / R_k)``.

    ``potentials`` is either one entry per scale or a shorter list that is
    cycled. With ``infinite=True`` the model continues past ``n_max`` (the cycle
    goes on forever) and evaluation is a truncation of it; otherwise the scales
    above ``n_max`` are identically zero.
    """

    potentials: tuple[PeriodicPotential, ...]
    schedule: ScaleSchedule
    n_max: int
    infinite: bool = False

    def __post_init__(self):
        if not self.potentials:
            raise ArgumentError("at least one potential is required")
        if self.n_max < 0:
            raise ArgumentError("n_max must be >= 0")
        object.__setattr__(self, "potentials", tuple(self.potentials))
        radii = self.schedule.radii(self.n_max + (1 if self.schedule.levels > self.n_max else 0))
        object.__setattr__(self, "_radii", tuple(radii))

    @classmethod
    def self_similar(cls, U: PeriodicPotential, rho: int, n_max: int, infinite=False):
        return cls((U,), ScaleSchedule.geometric(rho), n_max, infinite)

    def scale(self, k: int) -> PeriodicPotential:
        if k > self.n_max and not self.infinite:
            return PeriodicPotential()
        return self.potentials[k % len(self.potentials)]

    @property
    def scales(self) -> tuple[PeriodicPotential, ...]:
        return tuple(self.scale(k) for k in range(self.n_max + 1))

    @property
    def radii(self) -> tuple[int, ...]:
        """``(R_0, ..., R_{n_max})``."""
        return self._radii[: self.n_max + 1]

    def radius(self, k: int) -> int:
        if k < len(self._radii):
            return self._radii[k]
        return self.schedule.radius(k)

    @property
    def rho_min(self) -> int:
        if self.n_max == 0 and self.schedule.levels == 0:
            return math.inf
        n = max(self.n_max, 1) if self.schedule.levels >= max(self.n_max, 1) else int(self.schedule.levels)
        return self.schedule.rho_min(n) if n else math.inf

    @property
    def is_zero(self) -> bool:
        return all(U.is_zero for U in self.scales)

    def _check_slice(self, n_lo, n_hi):
        if not (0 <= n_lo and n_hi <= self.n_max) or n_lo > n_hi + 1:
            raise ArgumentError(f"invalid scale slice [{n_lo}, {n_hi}] for n_max={self.n_max}")

    def harmonic_table(self, n_lo=0, n_hi=None):
        """Flattened ``(omega, a, b)`` arrays so that the slice equals
        ``sum a cos(omega x) + b sin(omega x) + const``."""
        n_hi = self.n_max if n_hi is None else n_hi
        self._check_slice(n_lo, n_hi)
        om, aa, bb = [], [], []
        for k in range(n_lo, n_hi + 1):
            R = self.radius(k)
            for f, a, b in self.scale(k).harmonics:
                om.append(TWO_PI * f / R)
                aa.append(a)
                bb.append(b)
        return np.array(om, dtype=float), np.array(aa, dtype=float), np.array(bb, dtype=float)

    def finest_period(self) -> float:
        periods = [self.radius(k) / U.max_frequency for k, U in enumerate(self.scales) if not U.is_zero]
        return min(periods, default=math.inf)

    def max_wavenumber(self, n_hi=None) -> float:
        """Largest ``k / R_k`` over scales up to ``n_hi`` (oscillations per unit length)."""
        n_hi = self.n_max if n_hi is None else n_hi
        return max((self.scale(k).max_frequency / self.radius(k) for k in range(n_hi + 1)), default=0.0)


def eval_potential(msp: MultiScalePotential, x, n_lo=0, n_hi=None):
    """``sum_{k=n_lo}^{n_hi} U_k(x / R_k)``, evaluated exactly term by term."""
    n_hi = msp.n_max if n_hi is None else n_hi
    msp._check_slice(n_lo, n_hi)
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    for k in range(n_lo, n_hi + 1):
        U = msp.scale(k)
        if not U.is_zero:
            out = out + U(_reduced(x, msp.radius(k)))
    return out if out.ndim else float(out)


def eval_gradient(msp: MultiScalePotential, x, n_lo=0, n_hi=None):
    """Derivative of :func:`eval_potential` with respect to ``x``."""
    n_hi = msp.n_max if n_hi is None else n_hi
    msp._check_slice(n_lo, n_hi)
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    for k in range(n_lo, n_hi + 1):
        U = msp.scale(k)
        if not U.is_zero:
            R = msp.radius(k)
            out = out + U.derivative(_reduced(x, R)) / R
    return out if out.ndim else float(out)


def _reduced(x, R):
    # x / R mod 1, computed so that multiples of R map exactly to 0
    return np.fmod(x, R) / R


@dataclass(frozen=True)
class ModelConstants:
    """Uniform constants of a multi-scale potential.

    ``K0`` bounds the oscillations and ``K1`` the Lipschitz constants of the
    ``U_k``; ``lambda_min``/``lambda_max`` bracket the single-scale effective
    diffusivities. ``lambda_max == 1`` flags a scale with a constant potential.
    """

    K0: float
    K1: float
    lambda_min: float
    lambda_max: float

    def __post_init__(self):
        if not (0.0 < self.lambda_min <= self.lambda_max <= 1.0):
            raise ArgumentError(f"need 0 < lambda_min <= lambda_max <= 1, got "
                                f"{self.lambda_min}, {self.lambda_max}")
        if not (math.isfinite(self.K0) and math.isfinite(self.K1)) or self.K0 < 0 or self.K1 < 0:
            raise ArgumentError("K0 and K1 must be finite and nonnegative")

    @property
    def degenerate(self) -> bool:
        return self.lambda_max >= 1.0


def model_constants(msp: MultiScalePotential, grid_points: int = 1024, inflation: float = 1.0) -> ModelConstants:
    """Grid estimates of ``K0``, ``K1`` and the single-scale diffusivity range.

    ``grid_points`` is per period of the highest harmonic of each ``U_k`` (at
    least 1024). Grid extrema are polished with a bounded local search, so the
    estimates are accurate to ~1e-10; ``inflation`` multiplies both constants
    when a strictly conservative margin is wanted.
    """
    from .homogenization import effective_diffusivity

    if grid_points < 1024:
        raise ArgumentError("grid_points must be >= 1024")
    distinct = {U: None for U in msp.scales}
    K0 = K1 = 0.0
    lams = []
    for U in distinct:
        n = grid_points * max(U.max_frequency, 1)
        K0 = max(K0, U.oscillation(n))
        K1 = max(K1, U.lipschitz(n))
        lams.append(effective_diffusivity(U).value)
    return ModelConstants(float(K0 * inflation), float(K1 * inflation), float(min(lams)), float(max(lams)))


def tail_oscillation_bound(msp: MultiScalePotential, r: float, n: int, constants: ModelConstants | None = None):
    """Bound on the oscillation over ``B(0, r)`` of the scales above ``n``.

    Returns ``(bound, uniform_bound)`` with
    ``bound = Osc(U_{n+1}) + r * sum_{k >= n+2} K1 / R_k`` and
    ``uniform_bound = K0 + K1 / (rho_min - 1)``.
    """
    R_next = msp.radius(n + 1)
    if r >= R_next:
        raise ArgumentError(f"need R_(n+1) = {R_next} > r = {r}")
    c = constants or model_constants(msp)
    osc = msp.scale(n + 1).oscillation()
    if msp.infinite:
        # geometric majorant of the infinite tail beyond the tabulated radii
        R2 = msp.radius(n + 2)
        tail = c.K1 / R2 * msp.rho_min / (msp.rho_min - 1.0)
    else:
        tail = math.fsum(c.K1 / msp.radius(k) for k in range(n + 2, msp.n_max + 1)
                         if not msp.scale(k).is_zero)
    bound = osc + r * tail
    rho = msp.rho_min
    uniform = c.K0 + (c.K1 / (rho - 1.0) if math.isfinite(rho) else 0.0)
    return bound, uniform


def uniform_tail_bound(K0: float, K1: float, rho_min: float) -> float:
    """``K0 + K1 / (rho_min - 1)``."""
    return K0 + K1 / (rho_min - 1.0)


def truncation_error(msp: MultiScalePotential, radius: float, constants: ModelConstants | None = None) -> float:
    """Sup over ``|x| <= radius`` of the neglected tail ``V_{n_max+1}^inf``."""
    if not msp.infinite:
        return 0.0
    c = constants or model_constants(msp)
    rho = msp.schedule.rho_min(msp.n_max + 1)
    return c.K1 * radius / msp.radius(msp.n_max + 1) * rho / (rho - 1.0)
