import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from hsflow.circle import (
    PeriodicGrid,
    cumulative_integral,
    derivative,
    integrate,
    inverse_A,
    l2_norm_sq,
    mean_zero_project,
)


def band_limited(grid, coeffs):
    x = grid.x
    return sum(a * np.cos(2 * np.pi * (k + 1) * x) + b * np.sin(2 * np.pi * (k + 1) * x)
               for k, (a, b) in enumerate(coeffs))


coeff_lists = st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=12)


# -- grid ---------------------------------------------------------------------

@pytest.mark.parametrize("n", [0, 6, 7, 9, 15])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        PeriodicGrid(n)


def test_grid_nodes():
    g = PeriodicGrid(8)
    assert g.x[0] == 0.0
    np.testing.assert_array_equal(np.diff(g.x), np.full(7, 1 / 8))
    assert g.h == 1 / 8


def test_grid_fn_validates_and_freezes():
    g = PeriodicGrid(8)
    with pytest.raises(ValueError):
        g.fn(np.zeros(9))
    with pytest.raises(ValueError):
        g.fn([0, 1, 2, np.nan, 4, 5, 6, 7])
    src = np.arange(8.0)
    f = g.fn(src)
    src[0] = 99.0
    assert f.values[0] == 0.0
    with pytest.raises(ValueError):
        f.values[1] = 3.0


# -- integrate ----------------------------------------------------------------

@pytest.mark.parametrize("n", [8, 16, 64])
def test_integrate_constant(n):
    assert integrate(PeriodicGrid(n).constant(1.0)) == 1.0


def test_integrate_harmonics():
    assert abs(integrate(PeriodicGrid(16).sample(lambda x: np.cos(2 * np.pi * x)))) < 1e-15
    f = lambda x: 2 * np.cos(2 * np.pi * x) ** 2
    ref, _ = quad(f, 0, 1, epsabs=1e-14)
    assert abs(integrate(PeriodicGrid(64).sample(f)) - ref) <= 1e-12
    assert abs(ref - 1.0) <= 1e-12


@given(coeff_lists, st.floats(-5, 5), st.floats(-5, 5))
def test_integrate_linear(coeffs, a, b):
    g = PeriodicGrid(64)
    f1, f2 = g.fn(band_limited(g, coeffs)), g.fn(band_limited(g, coeffs[::-1]) + 1)
    lhs = integrate(g.fn(a * f1.values + b * f2.values))
    assert abs(lhs - (a * integrate(f1) + b * integrate(f2))) <= 1e-12 * (1 + abs(a) + abs(b)) * 50


# -- cumulative integral ------------------------------------------------------

@pytest.mark.parametrize("method", ["trapezoid", "spectral"])
def test_cumulative_trivial(method):
    g = PeriodicGrid(32)
    np.testing.assert_allclose(cumulative_integral(g.constant(1.0), method).values, g.x, atol=1e-15)
    np.testing.assert_array_equal(cumulative_integral(g.constant(0.0), method).values, 0.0)
    pyth = g.sample(lambda x: np.cos(2 * np.pi * x) ** 2 + np.sin(2 * np.pi * x) ** 2)
    np.testing.assert_allclose(cumulative_integral(pyth, method).values, g.x, atol=1e-14)


def test_cumulative_trapezoid_closes_to_integral(rng):
    g = PeriodicGrid(64)
    f = g.fn(rng.normal(size=64))
    F = cumulative_integral(f).values
    last_panel = 0.5 * (f.values[-1] + f.values[0]) / g.n
    assert abs(F[-1] + last_panel - integrate(f)) <= 1e-14


def test_cumulative_trapezoid_second_order():
    errs = []
    for n in (32, 64, 128):
        g = PeriodicGrid(n)
        F = cumulative_integral(g.sample(lambda x: np.cos(2 * np.pi * x)))
        errs.append(np.max(np.abs(F.values - np.sin(2 * np.pi * g.x) / (2 * np.pi))))
    assert 3.9 < errs[0] / errs[1] < 4.1 and 3.9 < errs[1] / errs[2] < 4.1


def test_cumulative_spectral_exact_on_trig():
    g = PeriodicGrid(64)
    f = g.sample(lambda x: 0.5 + np.cos(6 * np.pi * x) - 2 * np.sin(2 * np.pi * x))
    exact = 0.5 * g.x + np.sin(6 * np.pi * g.x) / (6 * np.pi) + (np.cos(2 * np.pi * g.x) - 1) / np.pi
    np.testing.assert_allclose(cumulative_integral(f, "spectral").values, exact, atol=1e-14)


def test_cumulative_rejects_unknown_method():
    with pytest.raises(ValueError):
        cumulative_integral(PeriodicGrid(8).constant(1.0), "simpson")


# -- derivative ---------------------------------------------------------------

def test_derivative_examples():
    g = PeriodicGrid(32)
    assert np.max(np.abs(derivative(g.constant(3.0)).values)) == 0.0
    d = derivative(g.sample(lambda x: np.sin(2 * np.pi * x)))
    assert np.max(np.abs(d.values - 2 * np.pi * np.cos(2 * np.pi * g.x))) <= 1e-10
    g = PeriodicGrid(256)
    d = derivative(g.sample(lambda x: np.sin(2 * np.pi * x) / (math.sqrt(2) * np.pi)))
    assert np.max(np.abs(d.values - math.sqrt(2) * np.cos(2 * np.pi * g.x))) <= 1e-12


@settings(max_examples=50)
@given(coeff_lists)
def test_derivative_band_limited(coeffs):
    g = PeriodicGrid(64)
    x = g.x
    f = g.fn(band_limited(g, coeffs))
    exact = sum(2 * np.pi * (k + 1) * (-a * np.sin(2 * np.pi * (k + 1) * x) + b * np.cos(2 * np.pi * (k + 1) * x))
                for k, (a, b) in enumerate(coeffs))
    assert np.max(np.abs(derivative(f).values - exact)) <= 1e-10


def test_centered_derivative_second_order():
    errs = []
    for n in (32, 64):
        g = PeriodicGrid(n)
        d = derivative(g.sample(lambda x: np.sin(2 * np.pi * x)), "centered")
        errs.append(np.max(np.abs(d.values - 2 * np.pi * np.cos(2 * np.pi * g.x))))
    assert 3.9 < errs[0] / errs[1] < 4.1


# -- mean-zero projection and norms --------------------------------------------

def test_mean_zero_project_examples():
    g = PeriodicGrid(16)
    assert np.max(np.abs(mean_zero_project(g.constant(5.0)).values)) == 0.0
    f = g.sample(lambda x: 1 + np.cos(2 * np.pi * x))
    np.testing.assert_allclose(mean_zero_project(f).values, np.cos(2 * np.pi * g.x), atol=1e-15)


@given(st.lists(st.floats(-1e3, 1e3), min_size=16, max_size=16))
def test_mean_zero_project_idempotent(vals):
    f = PeriodicGrid(16).fn(vals)
    p = mean_zero_project(f)
    np.testing.assert_allclose(mean_zero_project(p).values, p.values, atol=1e-10)
    assert abs(integrate(p)) <= 1e-10


def test_l2_norm_sq_examples():
    g = PeriodicGrid(64)
    assert l2_norm_sq(g.constant(2.0)) == 4.0
    assert l2_norm_sq(g.constant(0.0)) == 0.0
    assert abs(l2_norm_sq(g.sample(lambda x: math.sqrt(2) * np.cos(2 * np.pi * x))) - 1.0) <= 1e-14


# -- inverse of A = -d^2/dx^2 ---------------------------------------------------

def test_inverse_A_examples():
    g = PeriodicGrid(64)
    assert np.max(np.abs(inverse_A(g.constant(0.0)).values)) == 0.0
    f = g.sample(lambda x: (2 * np.pi) ** 2 * np.sin(2 * np.pi * x))
    assert np.max(np.abs(inverse_A(f).values - np.sin(2 * np.pi * g.x))) <= 1e-8


def test_inverse_A_cosine_pins_endpoints():
    # -g'' = cos(2 pi x) with g(0) = g(1) = 0 gives g = (cos(2 pi x) - 1)/(4 pi^2)
    g = PeriodicGrid(64)
    out = inverse_A(g.sample(lambda x: np.cos(2 * np.pi * x)))
    np.testing.assert_allclose(out.values, (np.cos(2 * np.pi * g.x) - 1) / (4 * np.pi**2), atol=1e-14)


def test_inverse_A_requires_mean_zero():
    with pytest.raises(ValueError, match="mean-zero"):
        inverse_A(PeriodicGrid(16).constant(1e-6))


@settings(max_examples=50)
@given(coeff_lists)
def test_inverse_A_composition(coeffs):
    g = PeriodicGrid(64)
    f = g.fn(band_limited(g, coeffs))
    back = derivative(derivative(inverse_A(f))).values
    assert np.max(np.abs(back + f.values)) <= 1e-8
