"""Fokker-Planck heat kernel of ``dy = dW - U'(y) dt`` and its homogenized envelope.

The Lebesgue density ``q`` solves ``q_t = (q_y + 2 U' q)_y / 2``. In the
variable ``g = e^{2U} q`` this is ``e^{-2U} g_t = (e^{-2U} g_y)_y / 2``, which is
discretized in flux form and advanced by Crank-Nicolson with a time step small
enough that the explicit half stays nonnegative; the scheme then preserves
positivity and tail values many decades below the peak remain meaningful.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._core import backend
from .errors import ArgumentError, ResolutionError
from .homogenization import effective_diffusivity
from .potential import PeriodicPotential
from .quadrature import gauss_legendre

#: tolerated mass lost through the absorbing ends
LEAK_TOLERANCE = 1e-3
#: fraction of the positivity limit used as the time step
DT_SAFETY = 0.9


@dataclass(frozen=True)
class KernelProfile:
    """Heat kernel ``p(t, x0, .)`` with respect to ``m_U = e^{-2U} dy / int_0^1 e^{-2U}``."""

    x0: float
    t: float
    y: np.ndarray
    p: np.ndarray
    normalizer: float
    mass: float
    dx: float
    dt: float

    @property
    def leak(self) -> float:
        return 1.0 - self.mass

    def at(self, y):
        """``p`` at ``y`` (log-linear interpolation between nodes)."""
        y = np.asarray(y, dtype=float)
        pos = (y - self.y[0]) / self.dx
        i = np.clip(np.floor(pos + 1e-9).astype(int), 0, self.y.size - 2)
        w = np.clip(pos - i, 0.0, 1.0)
        lo, hi = self.p[i], self.p[i + 1]
        with np.errstate(divide="ignore"):
            out = np.where(w < 1e-9, lo, np.exp((1 - w) * np.log(lo) + w * np.log(hi)))
        return out if out.ndim else float(out)


def _cell_resistances(U, y, dx):
    """``dx / int_{y_i}^{y_{i+1}} e^{2U}`` for consecutive nodes."""
    gx, gw = gauss_legendre(8)
    nodes = y[:-1, None] + 0.5 * dx * (gx + 1.0)
    return 1.0 / ((np.exp(2.0 * U(nodes)) @ gw) * 0.5)


def _dual_masses(U, y, dx):
    """``(1/dx) int e^{-2U}`` over the dual cells ``[y - dx/2, y + dx/2]``."""
    gx, gw = gauss_legendre(8)
    nodes = y[:, None] + 0.5 * dx * gx
    return (np.exp(-2.0 * U(nodes)) @ gw) * 0.5


def solve_forward(U: PeriodicPotential, x0: float, t: float, L: float, dx: float,
                  dt_pde: float | None = None, offsets=()) -> KernelProfile:
    """Crank-Nicolson solution on ``[x0 - L, x0 + L]`` with absorbing ends.

    The initial condition is a Gaussian of standard deviation ``2 dx`` at ``x0``,
    advanced for ``t - 4 dx^2`` so that without potential the variance is ``t``.
    ``dt_pde`` defaults to 90% of the positivity limit of the explicit half.
    """
    if not t > 0 or not dx > 0 or not L > 0:
        raise ArgumentError("need t, L, dx > 0")
    span = max((abs(o) for o in offsets), default=0.0) + 6.0 * math.sqrt(t)
    if L < span:
        raise ArgumentError(f"need L >= max|offset| + 6 sqrt(t) = {span}")
    if not U.is_zero and dx > 1.0 / (20 * U.max_frequency):
        raise ArgumentError("dx must resolve the fastest harmonic with >= 20 nodes")
    sigma2 = 4.0 * dx * dx
    s = t - sigma2
    if s <= 0:
        raise ArgumentError("t must exceed the initial variance (2 dx)^2")
    n = int(round(2 * L / dx))
    y = x0 - L + dx * np.arange(n + 1)
    a = _cell_resistances(U, y, dx)
    Mw = _dual_masses(U, y[1:-1], dx)
    am, ap = a[:-1], a[1:]
    lim = float(np.min(4.0 * Mw * dx * dx / (am + ap)))
    if dt_pde is None:
        dt_pde = DT_SAFETY * lim
    steps = max(1, int(math.ceil(s / dt_pde)))
    dt = s / steps
    c = dt / (4.0 * dx * dx)
    il, iu = -c * am, -c * ap
    id_ = Mw + c * (am + ap)
    el, eu = c * am, c * ap
    ed = Mw - c * (am + ap)
    yi = y[1:-1]
    q0 = np.exp(-((yi - x0) ** 2) / (2.0 * sigma2)) / math.sqrt(2.0 * math.pi * sigma2)
    g = np.ascontiguousarray(q0 / Mw)
    g = backend.tridiag_evolve(*(np.ascontiguousarray(v) for v in (el, ed, eu, il, id_, iu)), g, steps)
    mass = float(np.sum(Mw * g) * dx)
    if 1.0 - mass > LEAK_TOLERANCE:
        raise ResolutionError(f"{1.0 - mass:.3g} of the mass left the domain; increase L")
    Z = 1.0 if U.is_zero else float(np.exp(-2.0 * U(np.arange(4096) / 4096)).mean())
    # p = q e^{2U} Z = g Z
    p = np.concatenate(([0.0], g * Z, [0.0]))
    return KernelProfile(float(x0), float(t), y, p, Z, mass, float(dx), float(dt))


@dataclass(frozen=True)
class Envelope:
    lower: float
    upper: float
    E: float
    regime: str
    binding: bool


def _window(t, delta, C):
    if C * delta >= t:
        return "LargeDeviation"
    if C * math.sqrt(t) >= delta or C >= delta:
        return "Diagonal"
    return "Homogenization"


def homogenized_envelope(U: PeriodicPotential, t: float, x: float, y: float,
                         C: float = 1.0, C2: float = 1.0, D: float | None = None) -> Envelope:
    """``(2 pi t D)^{-1/2} exp(-(1 -+ E) |x-y|^2 / (2 D t))`` with
    ``E = C2 (|x-y|/t + sqrt(t)/|x-y|)``.

    The regime tag follows the window ``C|x-y| < t``, ``C sqrt(t) < |x-y|``,
    ``C < |x-y|``; the envelope is binding only inside it with ``E <= 1/10``.
    """
    delta = abs(x - y)
    if not t > 0 or delta == 0:
        raise ArgumentError("need t > 0 and x != y")
    D = effective_diffusivity(U).value if D is None else D
    E = C2 * (delta / t + math.sqrt(t) / delta)
    pref = 1.0 / math.sqrt(2.0 * math.pi * t * D)
    expo = delta * delta / (2.0 * D * t)
    regime = _window(t, delta, C)
    binding = regime == "Homogenization" and E <= 0.1
    return Envelope(pref * math.exp(-(1 + E) * expo), pref * math.exp(-(1 - E) * expo), E, regime, binding)


@dataclass(frozen=True)
class DaviesPoint:
    t: float
    offset: float
    p: float
    ratio: float
    exponent_ratio: float
    required_C2: float
    regime: str


@dataclass(frozen=True)
class DaviesReport:
    points: tuple[DaviesPoint, ...]
    C2: float
    D: float
    holds: bool

    @property
    def ratios(self) -> np.ndarray:
        return np.array([p.ratio for p in self.points])

    @property
    def ratio_trend_decreasing(self) -> bool:
        dev = np.abs(self.ratios - 1.0)
        return bool(np.all(np.diff(dev) < 0))

    @property
    def C2_spread(self) -> float:
        """max/min of the per-point required ``C2``."""
        c = np.array([p.required_C2 for p in self.points if p.regime == "Homogenization"])
        return float(c.max() / c.min()) if c.size and c.min() > 0 else math.inf


def davies_check(U: PeriodicPotential, schedule, *, C: float = 1.0, dx: float | None = None,
                 x0: float = 0.0) -> DaviesReport:
    """Solve at every ``(t, offset)`` and fit the smallest ``C2`` for which both
    envelope inequalities hold at all in-window points.

    ``ratio = ln p / (-offset^2 / (2 D t))``. With
    ``L = -ln(p sqrt(2 pi t D)) 2 D t / offset^2`` both inequalities hold iff
    ``|L - 1| <= E``, so each point needs ``C2 >= |L - 1| / (offset/t + sqrt(t)/offset)``.
    """
    D = effective_diffusivity(U).value
    if dx is None:
        dx = 1.0 / 32.0 if U.is_zero else 1.0 / (64 * U.max_frequency)
    pts = []
    for t, off in schedule:
        t, off = float(t), float(off)
        L = abs(off) + 6.0 * math.sqrt(t) + 4.0
        prof = solve_forward(U, x0, t, L, dx, offsets=(off,))
        p = float(prof.at(x0 + off))
        gauss = off * off / (2.0 * D * t)
        ratio = math.log(p) / -gauss
        Lnorm = -math.log(p * math.sqrt(2.0 * math.pi * t * D)) / gauss
        need = abs(Lnorm - 1.0) / (abs(off) / t + math.sqrt(t) / abs(off))
        pts.append(DaviesPoint(t, off, p, ratio, Lnorm, need, _window(t, abs(off), C)))
    inside = [q for q in pts if q.regime == "Homogenization"]
    C2 = max((q.required_C2 for q in inside), default=0.0)
    holds = True
    for q in inside:
        env = homogenized_envelope(U, q.t, x0, x0 + q.offset, C, C2, D)
        holds &= env.lower * (1 - 1e-12) <= q.p <= env.upper * (1 + 1e-12)
    return DaviesReport(tuple(pts), C2, D, bool(holds))
