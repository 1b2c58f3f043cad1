"""Effective diffusivities, explicit correctors and the scale-separation lemma."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .potential import ModelConstants, MultiScalePotential, PeriodicPotential, ScaleSchedule, eval_potential
from .quadrature import (EVALUATION_BUDGET, gauss_legendre, integrate, log_integrate_exp_pair,
                         panel_integrals)

#: panels per period of the fastest harmonic
PANELS_PER_OSCILLATION = 64
#: Gauss-Legendre nodes per panel
ORDER = 8


@dataclass(frozen=True)
class Diffusivity:
    """Effective diffusivity with an a-posteriori quadrature error estimate."""

    value: float
    error: float

    def __float__(self):
        return self.value


def _panels_for(wavenumber, length):
    return max(PANELS_PER_OSCILLATION, int(math.ceil(PANELS_PER_OSCILLATION * wavenumber * length)))


def _diffusivity_from(f, length, panels, budget):
    lp, lm = log_integrate_exp_pair(f, 0.0, length, panels, ORDER, budget)
    return math.exp(2.0 * math.log(length) - lp - lm)


def _with_error(f, length, panels, budget):
    fine = _diffusivity_from(f, length, panels, budget)
    coarse = _diffusivity_from(f, length, max(panels // 2, 1), budget)
    return Diffusivity(min(fine, 1.0), abs(fine - coarse))


def effective_diffusivity(U: PeriodicPotential) -> Diffusivity:
    """``D(U) = (int_0^1 e^{2U} int_0^1 e^{-2U})^{-1}``."""
    if U.is_zero:
        return Diffusivity(1.0, 0.0)
    panels = _panels_for(U.max_frequency, 1.0)
    return _with_error(lambda x: 2.0 * U(x), 1.0, panels, EVALUATION_BUDGET)


def multiscale_diffusivity(msp: MultiScalePotential, n: int, budget: int = EVALUATION_BUDGET) -> Diffusivity:
    """Effective diffusivity of the ``R_n``-periodic truncation ``V_0^n``.

    ``D(V_0^n) = R_n^2 / (int_0^{R_n} e^{2V} int_0^{R_n} e^{-2V})``. Raises
    :class:`ResourceError` when the panel count exceeds ``budget``.
    """
    if not 0 <= n <= msp.n_max:
        raise ArgumentError(f"need 0 <= n <= n_max={msp.n_max}, got {n}")
    if all(msp.scale(k).is_zero for k in range(n + 1)):
        return Diffusivity(1.0, 0.0)
    if n == 0:
        return effective_diffusivity(msp.scale(0))
    R = msp.radius(n)
    panels = _panels_for(msp.max_wavenumber(n), R)
    return _with_error(lambda x: 2.0 * eval_potential(msp, x, 0, n), float(R), panels, budget)


def _base_rho(schedule: ScaleSchedule, n: int) -> float:
    k = n - 1
    if k < 1 or schedule.levels < 1:
        return math.inf
    return schedule.rho_min(min(k, schedule.levels) if schedule.levels < math.inf else k)


def diffusivity_bounds(n: int, c: ModelConstants, schedule: ScaleSchedule) -> tuple[float, float]:
    """Two-sided bound ``(lambda_min e^{-4K1/rho_min})^n <= D <= (lambda_max e^{4K1/rho_min})^n``
    for the diffusivity of an ``n``-scale truncation (i.e. ``D(V_0^{n-1})``).

    ``rho_min`` is taken over the ratios ``r_1 .. r_{n-1}`` that actually enter.
    The upper bound is clamped at 1.
    """
    if n < 1:
        raise ArgumentError("n must be >= 1")
    rho = _base_rho(schedule, n)
    shift = 4.0 * c.K1 / rho if math.isfinite(rho) else 0.0
    lower = math.exp(n * (math.log(c.lambda_min) - shift))
    upper = min(1.0, math.exp(n * (math.log(c.lambda_max) + shift)))
    return lower, upper


class Corrector:
    """Harmonic coordinate ``F(x) = R int_0^x e^{2P} / int_0^R e^{2P}`` of an
    ``R``-periodic potential.

    The cumulative integral is stored at panel endpoints and completed by an
    exact Gauss-Legendre pass over the partial panel, so ``F`` is accurate to
    quadrature precision everywhere and strictly increasing. ``F`` extends to
    all of R by ``F(x + R) = F(x) + R``.
    """

    def __init__(self, func, R: float, wavenumber: float, oscillation: float | None = None):
        if not R > 0:
            raise ArgumentError("period R must be > 0")
        self.R = float(R)
        self._f = func
        self.panels = _panels_for(wavenumber, self.R)
        self._h = self.R / self.panels
        cells = panel_integrals(lambda x: np.exp(2.0 * func(x)), 0.0, self.R, self.panels, ORDER)
        self.cumulative = np.concatenate(([0.0], np.cumsum(cells)))
        self.total = float(self.cumulative[-1])
        self.cumulative[-1] = self.total
        self._oscillation = oscillation

    @property
    def grid(self):
        return np.linspace(0.0, self.R, self.panels + 1)

    @property
    def oscillation(self) -> float:
        if self._oscillation is None:
            x = np.linspace(0.0, self.R, 16 * self.panels + 1)
            v = self._f(x)
            self._oscillation = float(v.max() - v.min())
        return self._oscillation

    def _partial(self, x):
        """``int_0^x e^{2P}`` for ``x`` in ``[0, R]``."""
        idx = np.minimum((x / self._h).astype(np.int64), self.panels - 1)
        left = idx * self._h
        gx, gw = gauss_legendre(ORDER)
        half = 0.5 * (x - left)
        nodes = left[..., None] + half[..., None] * (gx + 1.0)
        inner = (np.exp(2.0 * self._f(nodes)) @ gw) * half
        return self.cumulative[idx] + inner

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        q = np.floor(x / self.R)
        frac = x - q * self.R
        out = q * self.R + self.R * self._partial(frac) / self.total
        return out if out.ndim else float(out)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = self.R * np.exp(2.0 * self._f(np.mod(x, self.R))) / self.total
        return out if out.ndim else float(out)

    def chi(self, x):
        """Corrector ``chi(x) = x - F(x)``."""
        return np.asarray(x, dtype=float) - self(x)

    def bounds(self, x):
        """``(e^{-2 Osc}|x|, e^{2 Osc}|x|)``, which bracket ``|F(x)|``."""
        ax = np.abs(np.asarray(x, dtype=float))
        e = math.exp(2.0 * self.oscillation)
        return ax / e, ax * e


def corrector(P, R: float) -> Corrector:
    """Explicit corrector on one period ``[0, R]``.

    ``P`` is a :class:`PeriodicPotential`, used as ``x -> P(x / R)``, or a
    :class:`MultiScalePotential`, used as ``V_0^{n_max}`` whose period must be
    ``R = R_{n_max}``.
    """
    if not R > 0:
        raise ArgumentError("period R must be > 0")
    if isinstance(P, PeriodicPotential):
        if P.is_zero:
            return Corrector(lambda x: np.zeros_like(x), R, 1.0 / R, 0.0)
        return Corrector(lambda x: P(x / R), R, P.max_frequency / R, P.oscillation())
    if isinstance(P, MultiScalePotential):
        if R != P.radius(P.n_max):
            raise ArgumentError(f"period of V_0^{P.n_max} is {P.radius(P.n_max)}, got R={R}")
        return Corrector(lambda x: eval_potential(P, x), R, max(P.max_wavenumber(), 1.0 / R))
    raise ArgumentError("P must be a PeriodicPotential or a MultiScalePotential")


def _as_function(p):
    if isinstance(p, PeriodicPotential):
        return p, p.max_frequency, (lambda: p.lipschitz())
    if callable(p):
        return p, None, None
    raise ArgumentError("expected a PeriodicPotential or a 1-periodic callable")


def mixing_defect(g, f, R: int, *, g_lipschitz: float | None = None, frequency: int = 64):
    """``(|int g f(R.) - int g int f|, ||g'||_inf / R * int |f|)`` on the unit torus.

    ``g`` and ``f`` are :class:`PeriodicPotential` instances or 1-periodic
    vectorized callables; for callables ``g_lipschitz`` must be given and
    ``frequency`` bounds their highest harmonic.
    """
    if int(R) != R or R < 1:
        raise ArgumentError("R must be an integer >= 1")
    R = int(R)
    gf, kg, lip = _as_function(g)
    ff, kf, _ = _as_function(f)
    if g_lipschitz is None:
        if lip is None:
            raise ArgumentError("g_lipschitz is required for callable g")
        g_lipschitz = lip()
    kg = kg if kg is not None else frequency
    kf = kf if kf is not None else frequency
    k = max(kg + R * kf, 1)
    panels = 4 * PANELS_PER_OSCILLATION * k
    cross = integrate(lambda x: gf(x) * ff(R * x), 0.0, 1.0, panels, ORDER)
    ig = integrate(gf, 0.0, 1.0, panels, ORDER)
    i_f = integrate(ff, 0.0, 1.0, panels, ORDER)
    # |f| has kinks at sign changes; the fine panels keep the error far below the bound
    iabs = integrate(lambda x: np.abs(ff(x)), 0.0, 1.0, 16 * panels, ORDER)
    return abs(cross - ig * i_f), g_lipschitz / R * iabs
