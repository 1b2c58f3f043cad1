"""Closed-form Dirichlet Green functions of ``-(lambda u')'`` on ``(0, 1)``.

With the resistance ``m(x) = int_0^x dz / lambda(z)`` the Green function is
``G(x, y) = m(x ^ y) (m(1) - m(x v y)) / m(1)``, and ``lambda dG(x, .)/dz`` is
piecewise constant with a single jump at ``x``. Every integral below is
therefore evaluated exactly cell by cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .quadrature import gauss_legendre

#: cells used to discretize a smooth coefficient
DEFAULT_CELLS = 1 << 14
#: log-ratio slack below which a stability pair counts as a violation
VIOLATION_TOLERANCE = 1e-12


class Coefficient:
    """A strictly positive coefficient on ``[0, 1]`` stored as piecewise constant cells.

    ``values[i]`` is the harmonic mean of ``lambda`` over cell ``i`` so that the
    resistance ``m`` is exact at cell edges. ``approximation_error`` bounds the
    relative variation of ``lambda`` inside a cell (0 for piecewise-constant input).
    """

    def __init__(self, edges, values, approximation_error=0.0, func=None):
        edges = np.asarray(edges, dtype=float)
        values = np.asarray(values, dtype=float)
        if edges.ndim != 1 or values.shape != (edges.size - 1,) or values.size < 1:
            raise ArgumentError("need len(edges) == len(values) + 1 >= 2")
        if edges[0] != 0.0 or edges[-1] != 1.0 or np.any(np.diff(edges) <= 0):
            raise ArgumentError("edges must increase strictly from 0 to 1")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise ArgumentError("coefficient must be strictly positive and finite")
        self.edges = edges
        self.values = values
        self.approximation_error = float(approximation_error)
        self._func = func
        self.resistance = np.concatenate(([0.0], np.cumsum(np.diff(edges) / values)))
        self.total = float(self.resistance[-1])

    @classmethod
    def constant(cls, c: float = 1.0) -> "Coefficient":
        return cls([0.0, 1.0], [c], func=lambda z: np.full(np.shape(z), float(c)))

    @classmethod
    def piecewise(cls, values, edges=None) -> "Coefficient":
        values = np.asarray(values, dtype=float)
        if edges is None:
            edges = np.linspace(0.0, 1.0, values.size + 1)
        return cls(edges, values)

    @classmethod
    def from_function(cls, func, cells: int = DEFAULT_CELLS, lipschitz: float | None = None) -> "Coefficient":
        """Discretize a smooth positive vectorized ``func`` on ``cells`` equal cells."""
        if cells < DEFAULT_CELLS:
            raise ArgumentError(f"use at least {DEFAULT_CELLS} cells")
        gx, gw = gauss_legendre(8)
        h = 1.0 / cells
        left = h * np.arange(cells)
        nodes = left[:, None] + 0.5 * h * (gx + 1.0)
        vals = func(nodes)
        if np.any(vals <= 0) or np.any(func(np.linspace(0, 1, 8 * cells + 1)) <= 0):
            raise ArgumentError("coefficient must be strictly positive on [0, 1]")
        harmonic = 1.0 / ((1.0 / vals) @ (0.5 * gw))
        if lipschitz is None:
            fine = func(np.linspace(0.0, 1.0, 8 * cells + 1))
            lipschitz = float(np.max(np.abs(np.diff(fine)))) * 8 * cells
        err = lipschitz * h / float(vals.min())
        return cls(np.linspace(0.0, 1.0, cells + 1), harmonic, err, func)

    @classmethod
    def trig(cls, constant: float, harmonics=(), cells: int = DEFAULT_CELLS) -> "Coefficient":
        """``constant + sum a_k cos(2 pi k z) + b_k sin(2 pi k z)``."""
        hs = [(int(k), float(a), float(b)) for k, a, b in harmonics]

        def f(z):
            z = np.asarray(z, dtype=float)
            out = np.full(z.shape, float(constant))
            for k, a, b in hs:
                out = out + a * np.cos(2 * math.pi * k * z) + b * np.sin(2 * math.pi * k * z)
            return out

        lip = sum(2 * math.pi * k * (abs(a) + abs(b)) for k, a, b in hs)
        return cls.from_function(f, cells, lip)

    def scaled(self, c: float) -> "Coefficient":
        func = None if self._func is None else (lambda z, f=self._func: c * f(z))
        return Coefficient(self.edges, c * self.values, self.approximation_error, func)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if self._func is not None:
            return self._func(z)
        idx = np.clip(np.searchsorted(self.edges, z, side="right") - 1, 0, self.values.size - 1)
        return self.values[idx]

    def m(self, x):
        """Resistance ``int_0^x dz / lambda``."""
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, self.values.size - 1)
        out = self.resistance[idx] + (x - self.edges[idx]) / self.values[idx]
        return out if out.ndim else float(out)


def _interior(*pts):
    for p in pts:
        if not np.all((np.asarray(p) > 0.0) & (np.asarray(p) < 1.0)):
            raise ArgumentError("points must lie in the open interval (0, 1)")


def green_value(lam: Coefficient, x, y):
    """``G(x, y) = m(x ^ y) (m(1) - m(x v y)) / m(1)``."""
    _interior(x, y)
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    m1 = lam.total
    out = lam.m(lo) * (m1 - lam.m(hi)) / m1
    return out if np.ndim(out) else float(out)


def _flux_products(lam, x, y):
    """The three band integrals of ``lambda dG_x dG_y`` for ``x < y``."""
    m1 = lam.total
    mx, my = lam.m(x), lam.m(y)
    Ax, Bx = (m1 - mx) / m1, mx / m1
    Ay, By = (m1 - my) / m1, my / m1
    return Ax * Ay * mx, Bx * Ay * (my - mx), Bx * By * (m1 - my)


def tiger_ratio(lam: Coefficient, x, y):
    """``int lambda |dG_x dG_y| / int lambda dG_x dG_y`` for Green functions with poles ``x != y``.

    The integrand is positive left of ``min(x, y)`` and right of ``max(x, y)``
    and negative in between.
    """
    _interior(x, y)
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if np.any(x == y):
        raise ArgumentError("poles must differ")
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    left, middle, right = _flux_products(lam, lo, hi)
    out = (left + middle + right) / (left - middle + right)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class StabilityReport:
    S: float
    ratios: np.ndarray
    lower: float
    upper: float
    worst_margin: float
    violations: int


def stability_ratio(lam: Coefficient, mu: Coefficient, pairs, grid_points: int = 1 << 16) -> StabilityReport:
    """Check ``S^-3 <= G_mu / G_lam <= S^3`` with ``S = sup max(mu/lam, lam/mu)``.

    ``S`` is the sup over the union of both cell partitions (exact for
    piecewise-constant inputs) and a uniform grid of ``grid_points`` nodes.
    ``worst_margin`` is the smallest log-distance to either bound; a pair counts
    as a violation when it is below ``-VIOLATION_TOLERANCE`` (rounding of the
    Green functions themselves).
    """
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    _interior(pairs)
    mids = np.union1d(lam.edges, mu.edges)
    z = np.concatenate((0.5 * (mids[1:] + mids[:-1]), np.linspace(0.0, 1.0, grid_points)))
    q = np.concatenate(([mu.values[0] / lam.values[0]],
                        mu.values[np.clip(np.searchsorted(mu.edges, z, side="right") - 1, 0, mu.values.size - 1)]
                        / lam.values[np.clip(np.searchsorted(lam.edges, z, side="right") - 1, 0, lam.values.size - 1)]))
    S = float(max(q.max(), (1.0 / q).max()))
    r = green_value(mu, pairs[:, 0], pairs[:, 1]) / green_value(lam, pairs[:, 0], pairs[:, 1])
    lr, ls = np.log(r), 3.0 * math.log(S)
    margin = np.minimum(lr + ls, ls - lr)
    return StabilityReport(S, r, S**-3, S**3, float(margin.min()), int(np.sum(margin < -VIOLATION_TOLERANCE)))
