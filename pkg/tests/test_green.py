import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slowdiff import ArgumentError
from slowdiff.green import Coefficient, green_value, stability_ratio, tiger_ratio

ONE = Coefficient.constant()
pieces = st.lists(st.floats(0.05, 20.0), min_size=1, max_size=12)
point = st.floats(1e-3, 1 - 1e-3)


def test_laplacian_green_function():
    assert green_value(ONE, 0.25, 0.75) == pytest.approx(0.0625, abs=1e-15)
    x = np.linspace(0.01, 0.99, 15)
    X, Y = np.meshgrid(x, x)
    lo, hi = np.minimum(X, Y), np.maximum(X, Y)
    np.testing.assert_allclose(green_value(ONE, X, Y), lo * (1 - hi), atol=1e-15)
    with pytest.raises(ArgumentError):
        green_value(ONE, 0.0, 0.5)


def test_closed_form_ratio():
    assert tiger_ratio(ONE, 0.25, 0.75) == pytest.approx(2.0, abs=1e-12)
    assert tiger_ratio(ONE, 0.05, 0.95) == pytest.approx(2.8, abs=1e-12)
    assert tiger_ratio(ONE, 0.0025, 0.9975) >= 2.99
    rng = np.random.default_rng(0)
    x, y = rng.uniform(0.01, 0.99, (2, 500))
    np.testing.assert_allclose(tiger_ratio(ONE, x, y), 1 + 2 * np.abs(y - x), atol=1e-12)
    with pytest.raises(ArgumentError):
        tiger_ratio(ONE, 0.3, 0.3)


@given(pieces, point, point)
def test_ratio_at_most_three(values, x, y):
    if x == y:
        return
    lam = Coefficient.piecewise(values)
    r = tiger_ratio(lam, x, y)
    assert 1.0 - 1e-12 <= r <= 3.0 + 1e-9


@given(pieces, point)
def test_ratio_tends_to_one_as_poles_merge(values, x):
    lam = Coefficient.piecewise(values)
    y = x + 1e-9 if x < 0.5 else x - 1e-9
    assert tiger_ratio(lam, x, y) == pytest.approx(1.0, abs=1e-6)


@given(pieces, point, point)
def test_green_symmetry_and_positivity(values, x, y):
    lam = Coefficient.piecewise(values)
    assert abs(green_value(lam, x, y) - green_value(lam, y, x)) < 1e-12
    assert green_value(lam, x, y) > 0


def test_trig_coefficient_reports_error():
    lam = Coefficient.trig(2.0, [(1, 0.0, 0.5), (3, 0.3, 0.0)])
    assert 0 < lam.approximation_error < 1e-2
    assert np.all(lam.values > 0)


def test_stability_scaling_laws():
    lam = Coefficient.piecewise([1.0, 3.0, 0.5])
    rng = np.random.default_rng(1)
    pairs = rng.uniform(0.01, 0.99, (200, 2))
    same = stability_ratio(lam, lam, pairs)
    assert same.S == 1.0 and np.allclose(same.ratios, 1.0) and same.violations == 0
    double = stability_ratio(lam, lam.scaled(2.0), pairs)
    assert double.S == pytest.approx(2.0)
    np.testing.assert_allclose(double.ratios, 0.5, rtol=1e-12)
    assert double.worst_margin == pytest.approx(np.log(4.0), rel=1e-12)


@given(pieces, pieces)
def test_stability_bound_never_violated(a, b):
    lam, mu = Coefficient.piecewise(a), Coefficient.piecewise(b)
    pairs = np.random.default_rng(len(a) * 31 + len(b)).uniform(0.001, 0.999, (100, 2))
    rep = stability_ratio(lam, mu, pairs)
    assert rep.violations == 0 and rep.worst_margin >= -1e-12
