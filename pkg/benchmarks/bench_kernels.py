"""Wall-time comparison of the compiled kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``. Both backends
draw the same Philox stream, so each case also reports the largest absolute
difference between their outputs.
"""
import argparse
import time

import numpy as np

from slowdiff._core import compiled, fallback
from slowdiff.potential import MultiScalePotential, PeriodicPotential
from slowdiff.rng import philox_key


def _table():
    msp = MultiScalePotential.self_similar(PeriodicPotential.sine(), rho=8, n_max=1)
    return tuple(np.ascontiguousarray(v) for v in msp.harmonic_table())


def _cases():
    omega, a, b = _table()
    k0, k1 = philox_key(7)
    radii = np.array([1.0, 2.0, 4.0])
    caps = np.array([20_000, 20_000, 20_000], dtype=np.int64)
    checkpoints = np.array([1_000, 4_000, 16_000], dtype=np.int64)

    n = 2049
    x = np.linspace(-1.0, 1.0, n)
    r = 0.25
    off = np.full(n, -r / 2)
    diag = np.full(n, 1.0 + r)
    expl = np.full(n, 1.0 - r)
    g0 = np.exp(-x * x * 50.0)

    return {
        "exit_times (256 paths, 3 radii)": lambda be: be.exit_times(
            omega, a, b, radii, caps, 0.01, k0, k1, 0, 256, True, 1),
        "positions_at (256 paths, 16k steps)": lambda be: be.positions_at(
            omega, a, b, checkpoints, 0.01, k0, k1, 0, 256, 1),
        "tridiag_evolve (2049 nodes, 2000 steps)": lambda be: be.tridiag_evolve(
            -off, expl, -off, off, diag, off, g0.copy(), 2000),
    }


def _best(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3, help="timings per case; the best is kept")
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension unavailable; timing the fallback only")
    print(f"{'case':42s} {'fallback s':>11s} {'compiled s':>11s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, run in _cases().items():
        t_py, out_py = _best(lambda: run(fallback), args.repeat)
        if compiled is None:
            print(f"{name:42s} {t_py:11.4f}")
            continue
        t_c, out_c = _best(lambda: run(compiled), args.repeat)
        with np.errstate(invalid="ignore"):
            finite = np.isfinite(out_py) & np.isfinite(out_c)
            diff = float(np.max(np.abs(out_py[finite] - out_c[finite]), initial=0.0))
        same_inf = bool(np.array_equal(np.isinf(out_py), np.isinf(out_c)))
        tag = "" if same_inf else " (inf mismatch)"
        print(f"{name:42s} {t_py:11.4f} {t_c:11.4f} {t_py / t_c:8.1f} {diff:11.3g}{tag}")


if __name__ == "__main__":
    main()
