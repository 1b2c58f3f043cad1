import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slowdiff import ArgumentError
from slowdiff.analysis import (compare_exit, effective_scales, exit_constant, exponent_bounds_nu1,
                               fit_exponents, fluctuating_scales, msd_envelope, predict_exit,
                               predict_nu_ef, tail_prediction, walk_dimensions, weak_anomaly_predict)
from slowdiff.homogenization import multiscale_diffusivity
from slowdiff.potential import (ModelConstants, MultiScalePotential, PeriodicPotential, ScaleSchedule,
                                model_constants)
from slowdiff.sde import SimulationPlan, sample_exit_times, simulate_msd

LAM = 0.1924368784916727
ZERO = MultiScalePotential.self_similar(PeriodicPotential(), 8, 0)
SIN8 = MultiScalePotential.self_similar(PeriodicPotential.sine(), 8, 2)


def test_effective_scales():
    s = ScaleSchedule.explicit([4, 4])
    assert effective_scales(s, 20) == 2
    assert effective_scales(s, 1) == 0
    assert effective_scales(s, 4) == 1 and effective_scales(s, 3.999) == 0
    assert fluctuating_scales(ScaleSchedule.geometric(8), 64.0**2) == 2
    with pytest.raises(ArgumentError):
        effective_scales(s, 0.5)


def test_predict_exit():
    pred, factor = predict_exit(ZERO, 3.0)
    assert pred == pytest.approx(9.0) and factor == pytest.approx(4.0)
    c = model_constants(SIN8)
    assert exit_constant(c, 8) == pytest.approx(4 * math.exp(6 * (2 + 2 * math.pi / 7)), rel=1e-9)
    pred, _ = predict_exit(SIN8, 64.0, c)
    assert pred == pytest.approx(64.0**2 / multiscale_diffusivity(SIN8, 2).value, rel=1e-12)


def test_exponent_bounds():
    c = ModelConstants(2.0, 2 * math.pi, LAM, LAM)
    lo, hi = exponent_bounds_nu1(c, ScaleSchedule.geometric(8), C1=0.0)
    assert lo == pytest.approx(0.7925, abs=1e-4) and hi == pytest.approx(lo, rel=1e-14)
    w8 = np.subtract(*exponent_bounds_nu1(c, ScaleSchedule.geometric(8))[::-1])
    w4 = np.subtract(*exponent_bounds_nu1(c, ScaleSchedule.geometric(4))[::-1])
    assert w4 > w8


@given(st.floats(-1.0, 2.0), st.lists(st.floats(1.5, 1e4), min_size=2, max_size=6, unique=True))
def test_fit_exact_on_power_laws(nu, r):
    r = np.sort(np.array(r))
    f = fit_exponents(r, r ** (2 + nu), kind="exit")
    assert np.max(np.abs(f.pointwise - nu)) < 1e-12
    assert np.allclose(f.invert(), r ** (2 + nu), rtol=1e-11)
    g = fit_exponents(r, r ** (1 - nu / 2), kind="msd")
    assert np.max(np.abs(g.pointwise - nu)) < 1e-12


def test_fit_rejects_bad_input():
    with pytest.raises(ArgumentError):
        fit_exponents([2, 3], [1, -1])
    with pytest.raises(ArgumentError):
        fit_exponents([2], [1])


def test_single_scale_exit_exponent_vanishes():
    msp = MultiScalePotential.self_similar(PeriodicPotential.sine(0.5), 8, 0)
    radii = [2.0, 4.0, 8.0, 16.0]
    s = sample_exit_times(msp, SimulationPlan(dt=0.01, n_paths=600, master_seed=4), radii)
    f = fit_exponents(radii, [x.mean for x in s], [x.stderr for x in s], kind="exit")
    # D(U) r^{-2} E[tau] -> 1, so the pointwise exponent decays like 1/ln r
    expected = -np.log(multiscale_diffusivity(msp, 0).value) / np.log(radii)
    assert np.all(np.abs(f.pointwise - expected) < 4 * f.pointwise_stderr + 0.05)
    assert abs(f.pointwise[-1]) < abs(f.pointwise[0])


def test_msd_envelope_zero_potential():
    sched = ScaleSchedule.geometric(4)
    msp = MultiScalePotential((PeriodicPotential(),), sched, 3)
    env = msd_envelope(msp, 100.0)
    assert env.lower == pytest.approx(100 / 24) and env.upper == pytest.approx(500 * 100)
    assert msd_envelope(SIN8, 64.0**2).counts.n_flu == 2


@pytest.mark.parametrize("seed", range(5))
def test_exit_bracket_contains_mc(seed):
    rng = np.random.default_rng(seed)
    U = PeriodicPotential(((1, *rng.uniform(-0.3, 0.3, 2)), (2, *rng.uniform(-0.1, 0.1, 2))))
    msp = MultiScalePotential.self_similar(U, int(rng.integers(4, 7)), 1)
    r = float(msp.radius(1))
    s = sample_exit_times(msp, SimulationPlan(dt=0.0025, n_paths=200, master_seed=seed), [r])
    assert compare_exit(msp, [r], [s[0].mean], [s[0].stderr])[0].inside


def test_msd_envelope_contains_mc():
    msp = MultiScalePotential.self_similar(PeriodicPotential.sine(0.5), 4, 1)
    m = simulate_msd(msp, SimulationPlan(dt=0.01, n_paths=400, master_seed=3), [16.0, 64.0])
    for t, v in zip(m.checkpoints, m.msd):
        assert msd_envelope(msp, t).contains(v)


def test_predict_nu_ef():
    t = 64.0**2
    nu = predict_nu_ef(SIN8, t)
    D2 = multiscale_diffusivity(SIN8, 2).value
    assert nu == pytest.approx((2 / 3) * math.log(1 / D2) / math.log(64), rel=1e-12)
    assert nu > 0
    flat = MultiScalePotential.self_similar(PeriodicPotential(), 8, 2)
    assert predict_nu_ef(flat, t) == 0.0
    with pytest.raises(ArgumentError):
        predict_nu_ef(SIN8, 10.0)


def test_walk_dimensions():
    assert walk_dimensions(0.25, 4)[1] == pytest.approx(3.0)
    assert np.allclose(walk_dimensions(1 - 1e-9, 8), 2.0, atol=1e-6)
    assert all(d > 2 for d in walk_dimensions(0.5, 8))
    # agreement to first order in 1/ln rho
    scaled = []
    for rho in (1e2, 1e4, 1e8, 1e16):
        d = walk_dimensions(0.3, rho)
        scaled.append(max(abs(d[0] - d[1]), abs(d[1] - d[2]), abs(d[0] - d[2])) * math.log(rho) ** 2)
    assert max(scaled) < 2 * min(scaled)


def test_tail_prediction():
    p = tail_prediction(LAM, 8, 100.0, 10.0)
    assert p.nu3 == pytest.approx(0.7925, abs=1e-4)
    g = tail_prediction(1.0, 8, 100.0, 10.0)
    assert g.log_bound == pytest.approx(-1.0)
    b = [tail_prediction(LAM, 8, 100.0, h).log_bound for h in (2.0, 5.0, 10.0, 20.0)]
    assert np.all(np.diff(b) < 0)
    assert not tail_prediction(LAM, 8, 1.0, 10.0).in_window


def test_weak_anomaly():
    assert weak_anomaly_predict(math.e, 2.0, math.exp(-1), math.exp(4)) == pytest.approx(math.sqrt(2))
    f = [weak_anomaly_predict(8, 1.5, 0.3, t) for t in (10.0, 100.0, 1e4)]
    assert np.all(np.diff(f) > 0)
    with pytest.raises(ArgumentError):
        weak_anomaly_predict(8, 1.0, 0.3, 10.0)
