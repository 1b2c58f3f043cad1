"""Composite Gauss-Legendre quadrature with a fixed, thread-independent reduction order."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import ResourceError

#: default cap on integrand evaluations per call
EVALUATION_BUDGET = 10**8
#: panels per chunk; every chunk is reduced with ``np.sum`` then chunks with ``math.fsum``
CHUNK_PANELS = 1 << 14


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _check_budget(panels, order, budget):
    if panels * order > budget:
        raise ResourceError(f"quadrature needs {panels * order:.3g} evaluations, budget is {budget:.3g}; "
                            "use fewer scales or a coarser level")


def panel_nodes(a, b, panels, order, start=0, stop=None):
    """Nodes and weights of panels ``start..stop`` of the composite rule, shape (k, order)."""
    stop = panels if stop is None else stop
    x, w = gauss_legendre(order)
    h = (b - a) / panels
    left = a + h * np.arange(start, stop, dtype=float)
    nodes = left[:, None] + 0.5 * h * (x[None, :] + 1.0)
    return nodes, 0.5 * h * w


def panel_integrals(f, a, b, panels, order=8, budget=EVALUATION_BUDGET):
    """Integral of ``f`` over each panel (array of length ``panels``)."""
    _check_budget(panels, order, budget)
    out = np.empty(panels)
    for s in range(0, panels, CHUNK_PANELS):
        e = min(s + CHUNK_PANELS, panels)
        nodes, w = panel_nodes(a, b, panels, order, s, e)
        out[s:e] = f(nodes) @ w
    return out


def integrate(f, a, b, panels, order=8, budget=EVALUATION_BUDGET):
    """``int_a^b f`` by composite Gauss-Legendre on equal panels.

    ``f`` must accept an ndarray and act elementwise.
    """
    _check_budget(panels, order, budget)
    parts = []
    for s in range(0, panels, CHUNK_PANELS):
        e = min(s + CHUNK_PANELS, panels)
        nodes, w = panel_nodes(a, b, panels, order, s, e)
        parts.append(float(np.sum(f(nodes) @ w)))
    return math.fsum(parts)


def log_integrate_exp(f, a, b, panels, order=8, budget=EVALUATION_BUDGET):
    """``ln int_a^b exp(f)`` with per-chunk max subtraction (no overflow)."""
    _check_budget(panels, order, budget)
    maxima, sums = [], []
    for s in range(0, panels, CHUNK_PANELS):
        e = min(s + CHUNK_PANELS, panels)
        nodes, w = panel_nodes(a, b, panels, order, s, e)
        v = f(nodes)
        m = float(np.max(v))
        maxima.append(m)
        sums.append(float(np.sum(np.exp(v - m) @ w)))
    M = max(maxima)
    total = math.fsum(s * math.exp(m - M) for m, s in zip(maxima, sums))
    return M + math.log(total)


def log_integrate_exp_pair(f, a, b, panels, order=8, budget=EVALUATION_BUDGET):
    """``(ln int exp(f), ln int exp(-f))`` from one pass over the nodes."""
    _check_budget(panels, order, budget)
    acc = {1.0: ([], []), -1.0: ([], [])}
    for s in range(0, panels, CHUNK_PANELS):
        e = min(s + CHUNK_PANELS, panels)
        nodes, w = panel_nodes(a, b, panels, order, s, e)
        v = f(nodes)
        for sign, (maxima, sums) in acc.items():
            m = float(np.max(sign * v))
            maxima.append(m)
            sums.append(float(np.sum(np.exp(sign * v - m) @ w)))
    out = []
    for sign in (1.0, -1.0):
        maxima, sums = acc[sign]
        M = max(maxima)
        out.append(M + math.log(math.fsum(s * math.exp(m - M) for m, s in zip(maxima, sums))))
    return tuple(out)
