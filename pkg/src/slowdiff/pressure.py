"""Topological pressure of Birkhoff sums under the torus map ``x -> R x`` and
the normal/anomalous classification of self-similar potentials.

``p_n(U) = (1/n) ln int_0^1 exp(sum_{k<n} U(R^k x)) dx`` converges to the
pressure ``P_R(U)``; a self-similar potential with ratio ``R`` diffuses
normally iff ``P_R(2U) + P_R(-2U) = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .potential import PeriodicPotential
from .quadrature import gauss_legendre
from .rng import generator

#: default cap on integrand evaluations for the quadrature path
PRESSURE_BUDGET = 1 << 23
#: Gauss-Legendre order and panels per oscillation of the fastest term
ORDER = 16
PANELS_PER_OSCILLATION = 4
#: Monte Carlo samples when quadrature is out of budget
MC_SAMPLES = 1 << 20
#: grid points per oscillation for the sup-defect scan, and the grid cap
DEFECT_POINTS_PER_OSCILLATION = 32
DEFECT_GRID_CAP = 1 << 22
_CHUNK = 1 << 16


def _check(U, R, n=1):
    if not isinstance(U, PeriodicPotential):
        raise ArgumentError("U must be a PeriodicPotential")
    if int(R) != R or R < 2:
        raise ArgumentError("R must be an integer >= 2")
    if int(n) != n or n < 1:
        raise ArgumentError("n must be an integer >= 1")


def _oscillations(U, R, n):
    return R ** (n - 1) * max(U.max_frequency, 1)


def quadrature_levels(U: PeriodicPotential, R: int, budget: int = PRESSURE_BUDGET) -> int:
    """Largest ``n`` whose integral fits the quadrature budget (0 if none)."""
    n = 0
    while _oscillations(U, R, n + 1) * PANELS_PER_OSCILLATION * ORDER <= budget:
        n += 1
        if n > 64:
            break
    return n


def _digits_needed(R):
    return int(math.ceil(53 / math.log2(R))) + 1


def _fractions_from_digits(digits, R, n):
    """``frac(R^k x)`` for ``k < n`` from base-``R`` digit strings, shape (N, n)."""
    L = digits.shape[1] - n
    out = np.zeros((digits.shape[0], n))
    for j in range(L - 1, -1, -1):
        out = (out + digits[:, j:j + n]) / R
    return out


def _birkhoff_table(values_fn, R, n_hi, x):
    """Cumulative Birkhoff sums ``S_1..S_{n_hi}`` at points ``x`` (shape (n_hi, len(x)))."""
    out = np.empty((n_hi, x.size))
    acc = np.zeros(x.size)
    y = x.copy()
    for k in range(n_hi):
        acc = acc + values_fn(y)
        out[k] = acc
        y = np.mod(R * y, 1.0)
    return out


@dataclass(frozen=True)
class PressureEstimate:
    """Finite-``n`` pressures ``p_n`` with a fit ``p_n = P + a/n`` on the three largest ``n``."""

    R: int
    n: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    methods: tuple[str, ...]
    extrapolated: float
    slope: float
    residual: float


def _fit_inverse_n(n, v):
    n = np.asarray(n, dtype=float)[-3:]
    v = np.asarray(v, dtype=float)[-3:]
    if n.size < 2:
        return float(v[-1]), 0.0, math.inf
    A = np.stack([np.ones_like(n), 1.0 / n], axis=1)
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    res = v - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res**2)))


def _log_integrals_quadrature(funcs, U, R, n_hi):
    """``ln int exp(S_n^f)`` for ``n = 1..n_hi`` and each ``f`` in ``funcs``."""
    panels = _oscillations(U, R, n_hi) * PANELS_PER_OSCILLATION
    gx, gw = gauss_legendre(ORDER)
    h = 1.0 / panels
    acc = [[[] for _ in range(n_hi)] for _ in funcs]
    for s in range(0, panels, _CHUNK):
        e = min(s + _CHUNK, panels)
        left = h * np.arange(s, e, dtype=float)
        x = (left[:, None] + 0.5 * h * (gx + 1.0)).ravel()
        w = np.tile(0.5 * h * gw, e - s)
        base = _birkhoff_table(U, R, n_hi, x)
        for i, (scale, shift) in enumerate(funcs):
            for k in range(n_hi):
                v = scale * base[k] + (k + 1) * shift
                m = float(v.max())
                acc[i][k].append((m, float(np.exp(v - m) @ w)))
    out = np.empty((len(funcs), n_hi))
    for i in range(len(funcs)):
        for k in range(n_hi):
            M = max(m for m, _ in acc[i][k])
            out[i, k] = M + math.log(math.fsum(s * math.exp(m - M) for m, s in acc[i][k]))
    return out


def _log_integrals_mc(funcs, U, R, n_lo, n_hi, samples, seed):
    """Monte Carlo ``ln int exp(S_n^f)`` and delta-method standard errors for ``n_lo..n_hi``."""
    rng = generator(seed, purpose=R)
    L = _digits_needed(R)
    count = 0
    cols = n_hi - n_lo + 1
    chunks = []
    for s in range(0, samples, _CHUNK):
        m = min(_CHUNK, samples - s)
        digits = rng.integers(0, R, size=(m, n_hi + L), dtype=np.int64)
        frac = _fractions_from_digits(digits, R, n_hi)
        S = np.cumsum(U(frac), axis=1)[:, n_lo - 1:]
        chunks.append(S)
        count += m
    S = np.concatenate(chunks, axis=0)
    logs = np.empty((len(funcs), cols))
    ses = np.empty((len(funcs), cols))
    for i, (scale, shift) in enumerate(funcs):
        v = scale * S + np.arange(n_lo, n_hi + 1) * shift
        M = v.max(axis=0)
        ev = np.exp(v - M)
        mean = ev.mean(axis=0)
        logs[i] = M + np.log(mean)
        ses[i] = ev.std(axis=0, ddof=1) / math.sqrt(count) / mean
    return logs, ses


def _pressures(U, R, n_max, funcs, budget, samples, seed):
    if U.is_zero:
        # p_n(c) = c exactly
        values = np.repeat(np.array([[float(c)] for _, c in funcs]), n_max, axis=1)
        return values, np.zeros_like(values), ("quadrature",) * n_max
    nq = min(quadrature_levels(U, R, budget), n_max)
    logs = np.empty((len(funcs), n_max))
    ses = np.zeros((len(funcs), n_max))
    methods = []
    if nq:
        logs[:, :nq] = _log_integrals_quadrature(funcs, U, R, nq)
        methods += ["quadrature"] * nq
    if nq < n_max:
        lm, sm = _log_integrals_mc(funcs, U, R, nq + 1, n_max, samples, seed)
        logs[:, nq:] = lm
        ses[:, nq:] = sm
        methods += ["monte_carlo"] * (n_max - nq)
    n = np.arange(1, n_max + 1, dtype=float)
    return logs / n, ses / n, tuple(methods)


def birkhoff_pressure(U: PeriodicPotential, R: int, n: int, *, shift: float = 0.0,
                      budget: int = PRESSURE_BUDGET, samples: int = MC_SAMPLES, seed: int = 0):
    """``p_n(U + shift)`` and its standard error (0 for quadrature).

    Quadrature resolves ``R^{n-1} k_max`` oscillations when that fits ``budget``;
    otherwise ``x`` is sampled through its base-``R`` digits so that every
    ``R^k x mod 1`` is exact, and the seeded Monte Carlo mean is used.
    """
    _check(U, R, n)
    values, ses, _ = _pressures(U, R, n, [(1.0, shift)], budget, samples, seed)
    return float(values[0, -1]), float(ses[0, -1])


def pressure_series(U: PeriodicPotential, R: int, n_max: int, *, shift: float = 0.0,
                    budget: int = PRESSURE_BUDGET, samples: int = MC_SAMPLES, seed: int = 0) -> PressureEstimate:
    """``p_1 .. p_{n_max}`` with the ``1/n`` extrapolation."""
    _check(U, R, n_max)
    values, ses, methods = _pressures(U, R, n_max, [(1.0, shift)], budget, samples, seed)
    P, a, res = _fit_inverse_n(np.arange(1, n_max + 1), values[0])
    return PressureEstimate(int(R), np.arange(1, n_max + 1), values[0], ses[0], methods, P, a, res)


@dataclass(frozen=True)
class DefectEstimate:
    value: float
    method: str

    @property
    def lower_bound(self) -> bool:
        """True when the value came from a search that may miss the supremum."""
        return self.method == "search"


def _defect_grid(U, R, n, mean, points):
    best = 0.0
    step = 1.0 / points
    for s in range(0, points, _CHUNK * 4):
        x = step * np.arange(s, min(s + _CHUNK * 4, points), dtype=float)
        S = _birkhoff_table(U, R, n, x)[-1]
        best = max(best, float(np.max(np.abs(S / n - mean))))
    return best


def _defect_search(U, R, n, mean, restarts, seed):
    rng = generator(seed, purpose=0xDEF + R)
    L = _digits_needed(R)
    width = n + L
    cand = np.arange(R)
    best = 0.0
    for _ in range(restarts):
        d = rng.integers(0, R, size=width, dtype=np.int64)
        cur = -1.0
        for _sweep in range(8):
            improved = False
            for pos in range(width):
                trial = np.repeat(d[None, :], R, axis=0)
                trial[:, pos] = cand
                S = U(_fractions_from_digits(trial, R, n)).sum(axis=1)
                f = np.abs(S / n - mean)
                j = int(np.argmax(f))
                if f[j] > cur + 1e-15:
                    improved = improved or f[j] > cur + 1e-12
                    cur = float(f[j])
                    d[pos] = cand[j]
            if not improved:
                break
        best = max(best, cur)
    return best


def sup_defect(U: PeriodicPotential, R: int, n: int, *, grid_cap: int = DEFECT_GRID_CAP,
               restarts: int = 16, seed: int = 0) -> DefectEstimate:
    """``sup_x |(1/n) sum_{k<n} U(R^k x) - int U|``.

    A uniform grid with 32 points per oscillation of the fastest term is used
    when it fits ``grid_cap``; otherwise a seeded coordinate ascent over the
    base-``R`` digits of ``x`` with restarts, whose value is a lower bound.
    """
    _check(U, R, n)
    if U.is_zero:
        return DefectEstimate(0.0, "grid")
    mean = U.offset
    points = _oscillations(U, R, n) * DEFECT_POINTS_PER_OSCILLATION
    if points <= grid_cap:
        return DefectEstimate(_defect_grid(U, R, n, mean, points), "grid")
    return DefectEstimate(_defect_search(U, R, n, mean, restarts, seed), "search")


@dataclass(frozen=True)
class AnomalyReport:
    """Symmetrized pressure index and sup-defects with a three-way classification."""

    R: int
    n: np.ndarray
    index: np.ndarray
    index_stderr: np.ndarray
    index_extrapolated: float
    residual: float
    pressure_plus: np.ndarray
    pressure_minus: np.ndarray
    methods: tuple[str, ...]
    defects: np.ndarray
    defect_lower_bound: np.ndarray
    classification: str

    @property
    def margin(self) -> float:
        return 2.0 * (self.residual + float(self.index_stderr[-1]))


def _defect_decays(n, d):
    """Sup-defects decay: the log-log slope over the upper half of ``n`` is <= -1/2."""
    half = n >= max(2, n[-1] // 2)
    if half.sum() < 2 or np.any(d[half] <= 0):
        return bool(np.all(d[half] <= 1e-12))
    slope = np.polyfit(np.log(n[half]), np.log(d[half]), 1)[0]
    return bool(slope <= -0.5)


def anomaly_index(U: PeriodicPotential, R: int, n_max: int, *, tol_index: float = 0.02,
                  budget: int = PRESSURE_BUDGET, samples: int = MC_SAMPLES, seed: int = 0,
                  defect_grid_cap: int = DEFECT_GRID_CAP) -> AnomalyReport:
    """Classify the self-similar potential with ratio ``R`` from ``p_n(2U) + p_n(-2U)``.

    The index is extrapolated by ``I + a/n`` over the three largest ``n``.
    ``Anomalous``: extrapolated index above ``tol_index`` by more than twice the
    fit residual plus Monte Carlo error. ``Normal``: extrapolated index below
    ``tol_index`` and sup-defects decaying. Otherwise ``Inconclusive``.
    """
    _check(U, R, n_max)
    n = np.arange(1, n_max + 1)
    if U.is_zero:
        z = np.zeros(n_max)
        return AnomalyReport(int(R), n, z, z, 0.0, 0.0, z, z, ("quadrature",) * n_max, z,
                             np.zeros(n_max, dtype=bool), "Normal")
    values, ses, methods = _pressures(U, R, n_max, [(2.0, 0.0), (-2.0, 0.0)], budget, samples, seed)
    index = values[0] + values[1]
    index_se = np.hypot(ses[0], ses[1])
    I, _, res = _fit_inverse_n(n, index)
    defects = [sup_defect(U, R, int(k), grid_cap=defect_grid_cap, seed=seed) for k in n]
    d = np.array([x.value for x in defects])
    lb = np.array([x.lower_bound for x in defects])
    margin = 2.0 * (res + float(index_se[-1]))
    if I > tol_index + margin:
        cls = "Anomalous"
    elif I < tol_index and _defect_decays(n, d):
        cls = "Normal"
    else:
        cls = "Inconclusive"
    return AnomalyReport(int(R), n, index, index_se, I, res, values[0], values[1], methods,
                         d, lb, cls)
