"""Potential and coefficient description files.

Files are TOML (flat keys with dotted sections)::

    harmonics = [[1, 0.0, 1.0]]       # (k, a_k, b_k) of U_0; or `potentials` for a cycle
    n_max = 2
    infinite = false
    schedule.kind = "geometric"       # "geometric" | "ratios" | "stretched"
    schedule.rho = 8
    # schedule.ratios = [4, 8]        # for kind = "ratios"
    # schedule.alpha = 1.5            # for kind = "stretched"

Coefficient files for the Green-function checks use ``kind = "constant"``
(``value``), ``"trig"`` (``constant`` plus ``harmonics``) or ``"piecewise"``
(``values`` and optional ``edges``).
"""
from __future__ import annotations

import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ArgumentError
from .green import Coefficient
from .potential import MultiScalePotential, PeriodicPotential, ScaleSchedule

_SCHEDULE_KINDS = {"geometric": "geometric", "ratios": "ratios", "explicit": "ratios", "stretched": "stretched"}


def _load(source):
    try:
        if isinstance(source, dict):
            return source
        with open(source, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ArgumentError(f"cannot read {source}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ArgumentError(f"malformed file {source}: {exc}") from exc


def _harmonics(raw, where):
    try:
        return PeriodicPotential(tuple((int(k), float(a), float(b)) for k, a, b in raw))
    except (TypeError, ValueError) as exc:
        raise ArgumentError(f"{where}: harmonics must be a list of [k, a, b]") from exc


def parse_potential(data: dict) -> MultiScalePotential:
    known = {"harmonics", "potentials", "n_max", "infinite", "schedule"}
    unknown = set(data) - known
    if unknown:
        raise ArgumentError(f"unknown keys in potential file: {sorted(unknown)}")
    if ("harmonics" in data) == ("potentials" in data):
        raise ArgumentError("give exactly one of `harmonics` or `potentials`")
    if "harmonics" in data:
        pots = (_harmonics(data["harmonics"], "harmonics"),)
    else:
        pots = tuple(_harmonics(h, f"potentials[{i}]") for i, h in enumerate(data["potentials"]))
    sched = data.get("schedule")
    if not isinstance(sched, dict) or "kind" not in sched:
        raise ArgumentError("`schedule.kind` is required")
    kind = _SCHEDULE_KINDS.get(sched["kind"])
    if kind is None:
        raise ArgumentError(f"unknown schedule.kind {sched['kind']!r}")
    extra = set(sched) - {"kind", "ratios", "rho", "alpha"}
    if extra:
        raise ArgumentError(f"unknown schedule keys: {sorted(extra)}")
    if kind == "ratios":
        schedule = ScaleSchedule.explicit(sched.get("ratios", []))
    elif kind == "geometric":
        schedule = ScaleSchedule.geometric(sched.get("rho"))
    else:
        schedule = ScaleSchedule.stretched(sched.get("rho"), sched.get("alpha"))
    n_max = data.get("n_max", len(pots) - 1)
    if not isinstance(n_max, int):
        raise ArgumentError("n_max must be an integer")
    if schedule.levels < n_max:
        raise ArgumentError(f"schedule has {schedule.levels} ratios, n_max={n_max} needs {n_max}")
    return MultiScalePotential(pots, schedule, n_max, bool(data.get("infinite", False)))


def load_potential(source) -> MultiScalePotential:
    return parse_potential(_load(source))


def parse_coefficient(data: dict) -> Coefficient:
    kind = data.get("kind")
    if kind == "constant":
        return Coefficient.constant(float(data.get("value", 1.0)))
    if kind == "trig":
        return Coefficient.trig(float(data["constant"]), data.get("harmonics", []),
                                int(data.get("cells", 1 << 14)))
    if kind == "piecewise":
        return Coefficient.piecewise(data["values"], data.get("edges"))
    raise ArgumentError("coefficient kind must be 'constant', 'trig' or 'piecewise'")


def load_coefficient(source) -> Coefficient:
    return parse_coefficient(_load(source))


def potential_description(msp: MultiScalePotential) -> dict:
    """Canonical dictionary form, used in run records."""
    s = msp.schedule
    sched = {"kind": s.kind}
    if s.kind == "ratios":
        sched["ratios"] = list(s.ratios)
    else:
        sched["rho"] = s.rho
    if s.kind == "stretched":
        sched["alpha"] = s.alpha
    return {
        "potentials": [[list(h) for h in U.harmonics] for U in msp.potentials],
        "n_max": msp.n_max,
        "infinite": msp.infinite,
        "schedule": sched,
    }
