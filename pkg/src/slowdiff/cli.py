"""Command-line interface: ``slowdiff <subcommand> [options]``.

Every subcommand writes one JSON-lines run record (or a CSV table with
``--format csv``) to ``--out`` or standard output. Exit codes: 0 success,
1 invalid arguments, 2 resource or resolution failure (including unwritable
output), 3 statistical-validity failure under ``--strict``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
import warnings

import numpy as np

from . import __version__
from ._core import BACKEND_NAME
from .errors import ArgumentError, ResolutionError, ResourceError, StatisticalValidityWarning

EXIT_OK, EXIT_ARGS, EXIT_RESOURCE, EXIT_STATS = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}\n")


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return obj


# -- subcommands ------------------------------------------------------------------------
# Each returns (config, result, table, flags, plot_series).

def _potential(args):
    from .config import load_potential, potential_description

    msp = load_potential(args.potential)
    return msp, potential_description(msp)


def _plan(args, msp=None, horizon=None):
    from .sde import SimulationPlan

    return SimulationPlan(dt=args.dt, n_paths=args.paths, master_seed=args.seed, horizon=horizon,
                          bridge_correction=not getattr(args, "no_bridge", False), threads=args.threads,
                          truncation_factor=getattr(args, "truncation_factor", 1e4),
                          max_steps=getattr(args, "max_steps", None))


def cmd_diffusivity(args):
    from .homogenization import diffusivity_bounds, multiscale_diffusivity
    from .potential import model_constants

    msp, desc = _potential(args)
    n = msp.n_max if args.n is None else args.n
    d = multiscale_diffusivity(msp, n)
    lo, hi = diffusivity_bounds(n + 1, model_constants(msp), msp.schedule)
    result = {"n": n, "value": d.value, "lower_bound": lo, "upper_bound": hi, "error_estimate": d.error}
    table = (["n", "value", "lower_bound", "upper_bound", "error_estimate"],
             [[n, d.value, lo, hi, d.error]])
    return {"potential": desc, "n": n}, result, table, [], None


def cmd_exit_time(args):
    from .analysis import predict_exit
    from .potential import model_constants
    from .sde import sample_exit_times

    msp, desc = _potential(args)
    plan = _plan(args)
    summaries = sample_exit_times(msp, plan, args.radii)
    c = model_constants(msp)
    rows, out, flags = [], [], []
    for s in summaries:
        pred, factor = predict_exit(msp, s.radius, c) if s.radius >= 1 else (math.nan, math.nan)
        inside = bool(pred / factor <= s.mean <= pred * factor) if math.isfinite(pred) else None
        out.append({"radius": s.radius, "mean": s.mean, "stderr": s.stderr, "count": s.count,
                    "truncated": s.truncated, "flags": list(s.flags), "prediction": pred,
                    "factor": factor, "inside": inside})
        rows.append([s.radius, s.mean, s.stderr, s.count, s.truncated, pred, factor])
        flags += list(s.flags)
    config = {"potential": desc, "radii": list(args.radii), "dt": args.dt, "paths": args.paths,
              "bridge": not args.no_bridge, "max_steps": args.max_steps,
              "truncation_factor": args.truncation_factor}
    table = (["radius", "mean", "stderr", "count", "truncated", "prediction", "factor"], rows)
    series = {"E[tau]": ([s.radius for s in summaries], [s.mean for s in summaries])}
    return config, {"exit_times": out}, table, flags, series


def cmd_msd(args):
    from .analysis import fit_exponents, fluctuating_scales, msd_envelope
    from .potential import model_constants
    from .sde import simulate_msd

    msp, desc = _potential(args)
    plan = _plan(args, horizon=max(args.checkpoints))
    m = simulate_msd(msp, plan, args.checkpoints)
    c = model_constants(msp)
    env = []
    for t, v in zip(m.checkpoints, m.msd):
        if t >= 1 and fluctuating_scales(msp.schedule, float(t)) >= 1:
            e = msd_envelope(msp, float(t), c)
            env.append({"t": t, "lower": e.lower, "upper": e.upper, "degenerate": e.degenerate,
                        "n_flu": e.counts.n_flu, "n_per": e.counts.n_per, "inside": e.contains(float(v))})
        else:
            env.append(None)
    result = {"t": m.checkpoints, "msd": m.msd, "stderr": m.stderr, "mean": m.mean,
              "mean_stderr": m.mean_stderr, "count": m.count, "envelope": env}
    if m.checkpoints.size >= 2 and np.all(m.checkpoints > 1):
        f = fit_exponents(m.checkpoints, m.msd, m.stderr, kind="msd")
        result["nu2"] = f.pointwise
        result["nu2_stderr"] = f.pointwise_stderr
    config = {"potential": desc, "checkpoints": list(args.checkpoints), "dt": args.dt, "paths": args.paths}
    table = (["t", "msd", "stderr", "mean", "mean_stderr"],
             [list(r) for r in zip(m.checkpoints, m.msd, m.stderr, m.mean, m.mean_stderr)])
    return config, result, table, [], {"E[y_t^2]": (m.checkpoints, m.msd)}


def cmd_tail(args):
    from .sde import estimate_tail

    msp, desc = _potential(args)
    plan = _plan(args, horizon=args.t)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StatisticalValidityWarning)
        est = estimate_tail(msp, plan, args.t, args.h, box=args.box)
    gauss = [math.erfc(h / math.sqrt(2.0 * args.t)) for h in est.h]
    result = {"t": est.t, "h": est.h, "probability": est.probability, "lower": est.lower,
              "upper": est.upper, "exceedances": est.exceedances, "count": est.count,
              "flagged": est.flagged, "brownian_reference": gauss}
    flags = ["few_exceedances"] if np.any(est.flagged) else []
    config = {"potential": desc, "t": args.t, "h": list(args.h), "dt": args.dt, "paths": args.paths,
              "box": args.box}
    table = (["h", "probability", "lower", "upper", "exceedances", "flagged"],
             [list(r) for r in zip(est.h, est.probability, est.lower, est.upper, est.exceedances,
                                   est.flagged)])
    return config, result, table, flags, None


def cmd_pressure(args):
    from .pressure import anomaly_index

    msp, desc = _potential(args)
    U = msp.potentials[0]
    R = args.ratio if args.ratio is not None else msp.schedule.ratio(1)
    rep = anomaly_index(U, R, args.n_max, tol_index=args.tol_index, samples=args.samples, seed=args.seed)
    result = {"R": rep.R, "n": rep.n, "p_n_plus": rep.pressure_plus, "p_n_minus": rep.pressure_minus,
              "index_n": rep.index, "index_stderr": rep.index_stderr,
              "index": rep.index_extrapolated, "residual": rep.residual, "d_n": rep.defects,
              "d_n_lower_bound": rep.defect_lower_bound, "methods": list(rep.methods),
              "classification": rep.classification}
    config = {"potential": desc, "ratio": R, "n_max": args.n_max, "tol_index": args.tol_index,
              "samples": args.samples}
    table = (["n", "p_n_plus", "p_n_minus", "index_n", "d_n", "method"],
             [list(r) for r in zip(rep.n, rep.pressure_plus, rep.pressure_minus, rep.index,
                                   rep.defects, rep.methods)])
    return config, result, table, [], None


def cmd_green_check(args):
    from .config import load_coefficient
    from .green import Coefficient, stability_ratio, tiger_ratio
    from .rng import generator

    lam = load_coefficient(args.coefficient) if args.coefficient else Coefficient.constant()
    rng = generator(args.seed, purpose=0x6EE)
    pts = rng.uniform(1e-3, 1 - 1e-3, size=(args.cases, 2))
    pts = pts[pts[:, 0] != pts[:, 1]]
    r = tiger_ratio(lam, pts[:, 0], pts[:, 1])
    i = int(np.argmax(r))
    result = {"max_ratio": float(r[i]), "argmax": pts[i], "bound": 3.0, "cases": int(r.size),
              "violations": int(np.sum(r > 3.0 + 1e-9)), "approximation_error": lam.approximation_error}
    table_rows = [[float(r[i]), pts[i][0], pts[i][1]]]
    if args.mu:
        mu = load_coefficient(args.mu)
        rep = stability_ratio(lam, mu, pts)
        result["stability"] = {"S": rep.S, "worst_margin": rep.worst_margin, "violations": rep.violations,
                               "min_ratio": float(rep.ratios.min()), "max_ratio": float(rep.ratios.max())}
    config = {"coefficient": args.coefficient, "mu": args.mu, "cases": args.cases}
    return config, result, (["max_ratio", "x", "y"], table_rows), [], None


def cmd_martingale_check(args):
    from .martingale import (BracketEnvelope, laplace_bound, log_laplace_bound, log_saturating_laplace,
                             saturating_laplace)

    env = BracketEnvelope(args.f1, args.f2, args.t0)
    if args.lambda_grid:
        lams = list(args.lambda_grid)
    else:
        lim = env.lambda_limit()
        top = 0.95 * lim if math.isfinite(lim) else 1.0
        lams = list(np.linspace(top / args.lambda_points, top, args.lambda_points))
    rows = []
    for lam in lams:
        lam = float(lam)
        margin = log_laplace_bound(env, lam, args.t) - log_saturating_laplace(env, lam, args.t)
        rows.append([lam, saturating_laplace(env, lam, args.t), laplace_bound(env, lam, args.t), margin])
    result = {"lambda": [r[0] for r in rows], "exact": [r[1] for r in rows], "bound": [r[2] for r in rows],
              "margin": [r[3] for r in rows], "all_hold": all(r[3] >= -1e-12 for r in rows)}
    config = {"f1": args.f1, "f2": args.f2, "t0": args.t0, "t": args.t, "lambda": lams}
    return config, result, (["lambda", "exact", "bound", "margin"], rows), [], None


def cmd_kernel(args):
    from .config import potential_description
    from .kernel import davies_check, solve_forward

    msp, desc = _potential(args)
    U = msp.potentials[0]
    points = [_parse_point(p) for p in args.points]
    rep = davies_check(U, points, C=args.C, dx=args.dx)
    result = {"points": [{"t": p.t, "offset": p.offset, "p": p.p, "ratio": p.ratio,
                          "exponent_ratio": p.exponent_ratio, "required_C2": p.required_C2,
                          "regime": p.regime} for p in rep.points],
              "ratios": rep.ratios, "fitted_C2": rep.C2, "holds": rep.holds, "D": rep.D,
              "ratio_deviation_decreasing": rep.ratio_trend_decreasing}
    if args.profile_csv:
        for t, off in points:
            dx = args.dx or (1.0 / 32 if U.is_zero else 1.0 / (64 * U.max_frequency))
            prof = solve_forward(U, 0.0, t, abs(off) + 6 * math.sqrt(t) + 4, dx, offsets=(off,))
            path = f"{args.profile_csv}_t{t:g}_d{off:g}.csv"
            _write_text(path, _csv_text(["y", "p"], [[a, b] for a, b in zip(prof.y, prof.p)]))
    config = {"potential": desc, "points": [list(p) for p in points], "C": args.C, "dx": args.dx}
    table = (["t", "offset", "p", "ratio", "exponent_ratio", "required_C2", "regime"],
             [[p.t, p.offset, p.p, p.ratio, p.exponent_ratio, p.required_C2, p.regime] for p in rep.points])
    return config, result, table, [], None


def _parse_point(text):
    try:
        t, off = text.split(":")
        return float(t), float(off)
    except ValueError as exc:
        raise ArgumentError(f"points are t:offset pairs, got {text!r}") from exc


def cmd_analyze(args):
    from .analysis import fit_exponents

    records = []
    for path in args.input:
        try:
            with open(path) as fh:
                records += [json.loads(line) for line in fh if line.strip()]
        except (OSError, json.JSONDecodeError) as exc:
            raise ArgumentError(f"cannot read run records from {path}: {exc}") from exc
    exits, msds, rows, series = [], [], [], {}
    for k, rec in enumerate(records):
        sub = rec.get("subcommand")
        res = rec.get("result", {})
        if sub == "exit-time":
            e = [x for x in res["exit_times"] if isinstance(x["mean"], float) and x["radius"] > 1]
            if len(e) >= 2:
                f = fit_exponents([x["radius"] for x in e], [x["mean"] for x in e],
                                  [x["stderr"] for x in e], kind="exit")
                exits.append({"record": k, "radius": f.abscissae, "nu1": f.pointwise,
                              "nu1_stderr": f.pointwise_stderr, "slope": f.slope,
                              "slope_stderr": f.slope_stderr,
                              "inside_prediction": [x["inside"] for x in e]})
                rows += [["exit", k, r, v, s] for r, v, s in zip(f.abscissae, f.pointwise, f.pointwise_stderr)]
                series[f"E[tau] #{k}"] = (f.abscissae, f.ordinates)
        elif sub == "msd":
            t = np.asarray(res["t"], dtype=float)
            keep = t > 1
            if keep.sum() >= 2:
                f = fit_exponents(t[keep], np.asarray(res["msd"])[keep], np.asarray(res["stderr"])[keep],
                                  kind="msd")
                env = [e for e, k2 in zip(res["envelope"], keep) if k2]
                msds.append({"record": k, "t": f.abscissae, "nu2": f.pointwise,
                             "nu2_stderr": f.pointwise_stderr, "slope": f.slope,
                             "inside_envelope": [None if e is None else e["inside"] for e in env]})
                rows += [["msd", k, r, v, s] for r, v, s in zip(f.abscissae, f.pointwise, f.pointwise_stderr)]
                series[f"E[y^2] #{k}"] = (f.abscissae, f.ordinates)
    if not exits and not msds:
        raise ArgumentError("no exit-time or msd records with at least two usable points")
    config = {"inputs": list(args.input)}
    return config, {"exit": exits, "msd": msds}, (["kind", "record", "x", "nu", "nu_stderr"], rows), [], series


# -- plumbing ---------------------------------------------------------------------------

def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _write_text(path, text, append=False):
    try:
        with open(path, "a" if append else "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise ResourceError(f"cannot write {path}: {exc}") from exc


def _env_threads():
    from .sde import default_threads

    return default_threads()


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    g.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $SLOWDIFF_THREADS or the CPU count); never changes results")
    g.add_argument("--out", default=None, help="output file (default: standard output)")
    g.add_argument("--append", action="store_true", help="append to --out instead of overwriting")
    g.add_argument("--format", choices=("json", "csv"), default="json")
    g.add_argument("--strict", action="store_true", help="exit 3 on statistical-validity flags")
    g.add_argument("--timing", action="store_true", help="record wall time (breaks byte-reproducibility)")
    g.add_argument("--csv", default=None, help="also write the result table as CSV to this path")
    g.add_argument("--plot", default=None, help="write an SVG plot where the subcommand has one")

    parser = _Parser(prog="slowdiff", description="Anomalous slow diffusion in multi-scale potentials.")
    parser.add_argument("--version", action="version", version=f"slowdiff {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        p.set_defaults(func=func)
        return p

    def mc(p, paths=10000, dt=1e-3):
        p.add_argument("--potential", required=True, help="potential description file (TOML)")
        p.add_argument("--paths", type=int, default=paths)
        p.add_argument("--dt", type=float, default=dt)

    p = add("diffusivity", cmd_diffusivity, "effective diffusivity D(V_0^n) with its bracket")
    p.add_argument("--potential", required=True)
    p.add_argument("--n", type=int, default=None, help="truncation level (default n_max)")

    p = add("exit-time", cmd_exit_time, "Monte Carlo mean exit times of (-r, r)")
    mc(p)
    p.add_argument("--radii", type=float, nargs="+", required=True)
    p.add_argument("--no-bridge", action="store_true", help="disable the Brownian-bridge exit test")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--truncation-factor", type=float, default=1e4)

    p = add("msd", cmd_msd, "Monte Carlo mean squared displacement")
    mc(p, dt=1e-2)
    p.add_argument("--checkpoints", type=float, nargs="+", required=True)

    p = add("tail", cmd_tail, "Monte Carlo tail probabilities P(|y_t| >= h)")
    mc(p, dt=1e-2)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--h", type=float, nargs="+", required=True)
    p.add_argument("--box", type=float, default=None)

    p = add("pressure", cmd_pressure, "Birkhoff pressures and normal/anomalous classification")
    p.add_argument("--potential", required=True, help="file whose first potential is U")
    p.add_argument("--ratio", type=int, default=None, help="R (default: first schedule ratio)")
    p.add_argument("--n-max", type=int, default=8)
    p.add_argument("--tol-index", type=float, default=0.02)
    p.add_argument("--samples", type=int, default=1 << 20)

    p = add("green-check", cmd_green_check, "sub-harmonic ratio and Green-function stability")
    p.add_argument("--coefficient", default=None, help="coefficient file (default: lambda = 1)")
    p.add_argument("--mu", default=None, help="second coefficient for the stability check")
    p.add_argument("--cases", type=int, default=1000)

    p = add("martingale-check", cmd_martingale_check, "Laplace bound versus the saturating Gaussian martingale")
    p.add_argument("--f1", type=float, required=True)
    p.add_argument("--f2", type=float, required=True)
    p.add_argument("--t0", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--lambda-grid", type=float, nargs="+", default=None)
    p.add_argument("--lambda-points", type=int, default=50)

    p = add("kernel", cmd_kernel, "heat kernel versus the homogenized envelope")
    p.add_argument("--potential", required=True, help="file whose first potential is U")
    p.add_argument("--points", nargs="+", required=True, help="t:offset pairs")
    p.add_argument("--C", type=float, default=1.0, help="window constant")
    p.add_argument("--dx", type=float, default=None)
    p.add_argument("--profile-csv", default=None, help="prefix for per-point profile CSV dumps")

    p = add("analyze", cmd_analyze, "exponent fits and comparisons from run records")
    p.add_argument("--input", nargs="+", required=True, help="JSON-lines files from exit-time/msd runs")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(str(exc))
        return EXIT_ARGS
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if args.threads is None:
        args.threads = _env_threads()
    start = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", StatisticalValidityWarning)
            config, result, table, flags, series = args.func(args)
        record = {"subcommand": args.command, "config": config, "seed": args.seed,
                  "version": __version__, "backend": BACKEND_NAME,
                  "wall_time": time.perf_counter() - start if args.timing else None,
                  "flags": flags, "result": result}
        if args.format == "json":
            text = json.dumps(_clean(record), sort_keys=True) + "\n"
        else:
            text = _csv_text(*table)
        if args.out:
            _write_text(args.out, text, args.append)
        else:
            sys.stdout.write(text)
        if args.csv:
            _write_text(args.csv, _csv_text(*table))
        if args.plot:
            if series is None:
                raise ArgumentError(f"{args.command} has no plot")
            from .plotting import emit_plot

            try:
                emit_plot(series, args.plot, title=args.command)
            except OSError as exc:
                raise ResourceError(f"cannot write {args.plot}: {exc}") from exc
    except ArgumentError as exc:
        sys.stderr.write(f"slowdiff {args.command}: {exc}\n")
        return EXIT_ARGS
    except (ResourceError, ResolutionError) as exc:
        sys.stderr.write(f"slowdiff {args.command}: {exc}\n")
        return EXIT_RESOURCE
    if args.strict and flags:
        sys.stderr.write(f"slowdiff {args.command}: statistical validity flags: {sorted(set(flags))}\n")
        return EXIT_STATS
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
