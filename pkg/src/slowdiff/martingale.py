"""Laplace-transform and tail bounds for martingales with a two-rate bracket envelope.

A martingale whose conditional bracket increments over ``[t1, t]`` are at most
``int_0^{t-t1} f``, with ``f = f1`` on ``[0, t0)`` and ``f = f2`` afterwards,
obeys ``E exp(lam M_t) <= e^{3(1-1/g)} exp(g lam^2 f2 t / 2)`` with
``g = 1 / (1 - lam^2 (f1 - f2) t0 e)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import ArgumentError, DomainError
from .homogenization import corrector, multiscale_diffusivity
from .potential import MultiScalePotential, eval_gradient, eval_potential


@dataclass(frozen=True)
class BracketEnvelope:
    """Bracket rate ``f1`` up to time ``t0`` and ``f2`` afterwards."""

    f1: float
    f2: float
    t0: float

    def __post_init__(self):
        if not (self.f2 > 0 and self.f1 >= self.f2 and self.t0 > 0):
            raise ArgumentError("need 0 < f2 <= f1 and t0 > 0")
        if not all(math.isfinite(v) for v in (self.f1, self.f2, self.t0)):
            raise ArgumentError("envelope parameters must be finite")

    @property
    def degenerate(self) -> bool:
        """True when ``f1 == f2`` (a single rate; every domain is unbounded)."""
        return self.f1 == self.f2

    @property
    def gap(self) -> float:
        return (self.f1 - self.f2) * self.t0

    def lambda_limit(self) -> float:
        """``(2 e (f1 - f2) t0)^{-1/2}``."""
        return math.inf if self.degenerate else (2.0 * math.e * self.gap) ** -0.5

    def nu_limit(self) -> float:
        """``(2 e (f1 - f2) t0)^{-1}``."""
        return math.inf if self.degenerate else 1.0 / (2.0 * math.e * self.gap)

    def variance(self, t: float) -> float:
        """``int_0^t f``: the bracket of the envelope-saturating martingale."""
        return self.f1 * min(t, self.t0) + self.f2 * max(t - self.t0, 0.0)


def g_factor(env: BracketEnvelope, lam: float) -> float:
    """``g = 1 / (1 - lam^2 (f1 - f2) t0 e)``; lies in ``[1, 2]`` on the admissible domain."""
    return 1.0 / (1.0 - lam * lam * env.gap * math.e)


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def log_laplace_bound(env: BracketEnvelope, lam: float, t: float) -> float:
    """``3(1 - 1/g) + g lam^2 f2 t / 2`` for ``0 < |lam| < (2 e (f1 - f2) t0)^{-1/2}``."""
    limit = env.lambda_limit()
    if not 0.0 < abs(lam) < limit:
        raise DomainError(f"need 0 < |lambda| < {limit:.12g}, got {lam}", boundary=limit)
    if t < 0:
        raise ArgumentError("t must be >= 0")
    g = g_factor(env, lam)
    if not 1.0 <= g <= 2.0:
        raise AssertionError(f"g={g} outside [1, 2]")
    return 3.0 * (1.0 - 1.0 / g) + 0.5 * g * lam * lam * env.f2 * t


def laplace_bound(env: BracketEnvelope, lam: float, t: float) -> float:
    """``e^{3(1 - 1/g)} exp(g lam^2 f2 t / 2)``; ``inf`` past the float range."""
    return _exp(log_laplace_bound(env, lam, t))


def log_saturating_laplace(env: BracketEnvelope, lam: float, t: float) -> float:
    """``ln E exp(lam M_t)`` for the Gaussian martingale whose bracket rate is exactly ``f``."""
    return 0.5 * lam * lam * env.variance(t)


def saturating_laplace(env: BracketEnvelope, lam: float, t: float) -> float:
    """``E exp(lam M_t)`` for the Gaussian martingale whose bracket rate is exactly ``f``."""
    return _exp(log_saturating_laplace(env, lam, t))


def log_bracket_exp_bound(env: BracketEnvelope, nu: float, t: float) -> float:
    """``nu f2 t + nu t0 (f1 - f2) - 2 ln((f1 - f2) nu t0)`` for
    ``0 < nu < (2 e (f1 - f2) t0)^{-1}``."""
    if env.degenerate:
        raise DomainError("the bracket bound is undefined for f1 == f2", boundary=math.inf)
    limit = env.nu_limit()
    if not 0.0 < nu < limit:
        raise DomainError(f"need 0 < nu < {limit:.12g}, got {nu}", boundary=limit)
    return nu * env.f2 * t + nu * env.gap - 2.0 * math.log(env.gap * nu)


def bracket_exp_bound(env: BracketEnvelope, nu: float, t: float) -> float:
    """``exp(nu f2 t) exp(nu t0 (f1 - f2)) / ((f1 - f2) nu t0)^2``; ``inf`` past the float range."""
    return _exp(log_bracket_exp_bound(env, nu, t))


def log_saturating_bracket_exp(env: BracketEnvelope, nu: float, t: float) -> float:
    """``nu <M>_t`` for the deterministic bracket of the saturating martingale."""
    return nu * env.variance(t)


def saturating_bracket_exp(env: BracketEnvelope, nu: float, t: float) -> float:
    """``exp(nu <M>_t)`` for the deterministic bracket of the saturating martingale."""
    return _exp(log_saturating_bracket_exp(env, nu, t))


def tail_bound(env: BracketEnvelope, x: float, t: float) -> float:
    """``e^{3 r^2 / 2} exp(-(1 - r^2) x^2 / (2 f2 t))`` with ``r = C1 x / t < 1`` and
    ``C1 = (2 e (f1 - f2) t0)^{1/2} / f2``; bounds ``P(M_t >= x)``."""
    if x < 0 or not t > 0:
        raise ArgumentError("need x >= 0 and t > 0")
    C1 = math.sqrt(2.0 * math.e * env.gap) / env.f2
    r = C1 * x / t
    if r >= 1.0:
        raise DomainError(f"need r = C1 x / t < 1, got r = {r}", boundary=t / C1)
    return math.exp(1.5 * r * r - (1.0 - r * r) * x * x / (2.0 * env.f2 * t))


def saturating_tail(env: BracketEnvelope, x: float, t: float) -> float:
    """``P(N(0, int_0^t f) >= x)``."""
    return 0.5 * math.erfc(x / math.sqrt(2.0 * env.variance(t)))


def lemma_series(y: float, mu: float) -> tuple[float, float]:
    """``(sum_{m <= [mu]} ([mu] - m)^m y^m / m!, exp(y [mu]) / y^2)`` for ``-1/e < y < 0``.

    The alternating sum cancels catastrophically for large ``mu``; it is
    accumulated exactly in rational arithmetic from the binary value of ``y``
    and rounded once.
    """
    if not -1.0 / math.e < y < 0.0:
        raise DomainError(f"need -1/e < y < 0, got {y}", boundary=-1.0 / math.e)
    if not mu >= 0:
        raise DomainError(f"need mu >= 0, got {mu}", boundary=0.0)
    n = int(math.floor(mu))
    # y = num / den exactly; sum over the common denominator den^n n!
    num, den = Fraction(y).as_integer_ratio()
    total = 0
    fact_ratio = 1  # n! / m!, built downward from m = n
    for m in range(n, -1, -1):
        total += (n - m) ** m * num**m * den ** (n - m) * fact_ratio
        fact_ratio *= m if m else 1
    total = Fraction(total, den**n * math.factorial(n))
    return float(total), math.exp(y * n) / (y * y)


# -- Monte Carlo check on the diffusion's own martingale ---------------------------------

@dataclass(frozen=True)
class CorrectorEnvelope:
    """Envelope of ``M_t = F(y_t)`` where ``F`` is the harmonic coordinate of ``W``."""

    envelope: BracketEnvelope
    period: float
    cell_oscillation: float


def corrector_envelope(msp: MultiScalePotential, points_per_unit: int = 256) -> CorrectorEnvelope:
    """``f1 = sup F'^2``, ``f2 = D(W)`` and ``t0 = Osc(phi) / (f1 - D(W))``.

    ``phi`` solves the cell problem ``L phi = F'^2 - D(W)`` on one period, so
    that ``E_x <M>_s = D s + phi(x) - E_x phi(y_s)``; the bracket then stays
    under the envelope from any starting point.
    """
    R = float(msp.radius(msp.n_max))
    D = multiscale_diffusivity(msp, msp.n_max).value
    if msp.is_zero:
        return CorrectorEnvelope(BracketEnvelope(1.0, 1.0, 1.0), R, 0.0)
    n = int(max(points_per_unit * R * max(1.0, 64 * msp.max_wavenumber()) / 64, 4096))
    n += n % 2
    x = np.linspace(0.0, R, n + 1)
    V = eval_potential(msp, x)
    ep, em = np.exp(2.0 * V), np.exp(-2.0 * V)
    Z = float(cumulative_simpson(ep, x=x)[-1])
    dF = R * ep / Z
    f1 = float(dF.max()) ** 2
    h = dF**2 - D
    # e^{-2V} phi' = 2 int_0^x h e^{-2V} + c, with c fixed by periodicity of phi
    H = np.concatenate(([0.0], cumulative_simpson(h * em, x=x)))
    c = -2.0 * float(cumulative_simpson(ep * H, x=x)[-1]) / Z
    dphi = ep * (2.0 * H + c)
    phi = np.concatenate(([0.0], cumulative_simpson(dphi, x=x)))
    osc = float(phi.max() - phi.min())
    if f1 <= D * (1 + 1e-12):
        return CorrectorEnvelope(BracketEnvelope(D, D, 1.0), R, osc)
    return CorrectorEnvelope(BracketEnvelope(f1, D, osc / (f1 - D)), R, osc)


@dataclass(frozen=True)
class MartingaleCheck:
    envelope: BracketEnvelope
    t: float
    lambdas: np.ndarray
    empirical: np.ndarray
    stderr: np.ndarray
    bound: np.ndarray
    status: tuple[str, ...]

    @property
    def margins(self) -> np.ndarray:
        """``ln bound - ln empirical``."""
        return np.log(self.bound) - np.log(self.empirical)


def verify_on_sde_martingale(msp: MultiScalePotential, plan, lambdas, t: float,
                             z: float = 1.96) -> MartingaleCheck:
    """Estimate ``E exp(lam F(y_t))`` by simulation and compare it with :func:`laplace_bound`.

    ``F`` is the corrector of ``W = V_0^{n_max}`` and ``(f1, f2, t0)`` comes from
    :func:`corrector_envelope`. Each ``lam`` is tagged ``pass`` (upper
    confidence limit below the bound), ``violation`` (lower limit above) or
    ``inconclusive``; ``lam`` outside the admissible domain is ``out_of_domain``.
    """
    from .sde import positions

    if msp.n_max > 1:
        raise ArgumentError("use a single- or two-scale potential")
    ce = corrector_envelope(msp)
    env = ce.envelope
    y = positions(msp, plan, [t])[:, 0]
    if msp.is_zero:
        M = y
    else:
        M = corrector(msp, ce.period)(y)
    lambdas = np.asarray(lambdas, dtype=float)
    emp, se, bound, status = [], [], [], []
    for lam in lambdas:
        v = np.exp(lam * M)
        m = float(np.sum(v)) / v.size
        s = float(np.std(v, ddof=1)) / math.sqrt(v.size)
        emp.append(m)
        se.append(s)
        try:
            b = laplace_bound(env, float(lam), t)
        except DomainError:
            bound.append(math.nan)
            status.append("out_of_domain")
            continue
        bound.append(b)
        if m + z * s <= b:
            status.append("pass")
        elif m - z * s > b:
            status.append("violation")
        else:
            status.append("inconclusive")
    return MartingaleCheck(env, float(t), lambdas, np.array(emp), np.array(se), np.array(bound), tuple(status))
