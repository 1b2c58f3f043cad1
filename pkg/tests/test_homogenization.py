import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import i0

from slowdiff.homogenization import (corrector, diffusivity_bounds, effective_diffusivity,
                                     mixing_defect, multiscale_diffusivity)
from slowdiff.potential import MultiScalePotential, PeriodicPotential, ScaleSchedule, model_constants
from slowdiff.quadrature import integrate, log_integrate_exp

coef = st.floats(-1.5, 1.5, allow_nan=False)
potentials = st.lists(st.tuples(st.integers(1, 5), coef, coef), min_size=1, max_size=3).map(
    lambda h: PeriodicPotential(tuple(h)))


def test_quadrature_oracles():
    assert integrate(np.sin, 0.0, math.pi, 8) == pytest.approx(2.0, abs=1e-14)
    # int_0^1 e^{A sin 2 pi x} = I0(A)
    lv = log_integrate_exp(lambda x: 50.0 * np.sin(2 * np.pi * x), 0.0, 1.0, 256)
    assert lv == pytest.approx(math.log(i0(50.0)), rel=1e-12)


def test_zero_potential_is_brownian():
    assert effective_diffusivity(PeriodicPotential()).value == 1.0


@pytest.mark.parametrize("A", [0.5, 1.0, 2.0])
def test_sine_bessel_oracle(A):
    d = effective_diffusivity(PeriodicPotential.sine(A)).value
    assert d == pytest.approx(i0(2 * A) ** -2, rel=1e-12)


@given(potentials, st.floats(0, 1))
def test_diffusivity_invariances(U, s):
    d = effective_diffusivity(U).value
    assert 0 < d <= 1
    # e^{-2 Osc} <= D, shift and sign invariance
    assert d >= math.exp(-2 * U.oscillation()) * (1 - 1e-9)
    assert effective_diffusivity(U.shifted(s)).value == pytest.approx(d, rel=1e-9)
    assert effective_diffusivity(U.scaled(-1.0)).value == pytest.approx(d, rel=1e-12)


def test_multiscale_single_scale_and_bracket():
    U = PeriodicPotential.sine()
    msp = MultiScalePotential.self_similar(U, 8, 2)
    assert multiscale_diffusivity(msp, 0).value == pytest.approx(i0(2) ** -2, rel=1e-12)
    c = model_constants(msp)
    for n in (1, 2):
        d = multiscale_diffusivity(msp, n).value
        lo, hi = diffusivity_bounds(n + 1, c, msp.schedule)
        assert lo <= d <= hi


def test_multiscale_decreasing_in_scales():
    msp = MultiScalePotential.self_similar(PeriodicPotential.sine(0.7), 5, 2)
    d = [multiscale_diffusivity(msp, n).value for n in range(3)]
    assert d[0] > d[1] > d[2]


def test_corrector_properties():
    U = PeriodicPotential(((1, 0.4, 0.8), (2, 0.0, 0.3)))
    F = corrector(U, 3.0)
    assert F(0.0) == pytest.approx(0.0, abs=1e-15)
    assert F(3.0) == pytest.approx(3.0, rel=1e-13)
    assert F(7.5) == pytest.approx(F(1.5) + 6.0, rel=1e-12)
    x = np.linspace(-5, 5, 2001)
    assert np.all(np.diff(F(x)) > 0)
    lo, hi = F.bounds(x)
    assert np.all(np.abs(F(x)) >= lo - 1e-12) and np.all(np.abs(F(x)) <= hi + 1e-12)
    # F' = R e^{2P}/Z: finite difference check
    h = 1e-6
    xs = np.array([0.3, 1.7, 2.9])
    assert np.allclose((F(xs + h) - F(xs - h)) / (2 * h), F.derivative(xs), rtol=1e-6)


def test_corrector_of_multiscale():
    msp = MultiScalePotential.self_similar(PeriodicPotential.sine(), 4, 1)
    F = corrector(msp, 4)
    assert F(4.0) == pytest.approx(4.0, rel=1e-12)
    assert np.all(np.diff(F(np.linspace(0, 4, 999))) > 0)


def test_mixing_defect_cases():
    s = PeriodicPotential.sine()
    lhs, rhs = mixing_defect(s, s, 1)
    assert lhs == pytest.approx(0.5, abs=1e-12) and rhs == pytest.approx(4.0, rel=1e-9)
    lhs, rhs = mixing_defect(s, s, 2)
    assert lhs == pytest.approx(0.0, abs=1e-12) and rhs == pytest.approx(2.0, rel=1e-9)
    assert mixing_defect(PeriodicPotential(), s, 5)[1] == 0.0


@given(potentials, potentials, st.integers(1, 12))
def test_mixing_defect_bound(g, f, R):
    lhs, rhs = mixing_defect(g, f, R)
    assert lhs <= rhs + 1e-10
