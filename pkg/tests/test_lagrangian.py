import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.integrate import quad, solve_ivp

from hsflow.datum import FIXTURES, datum_pw, datum_smooth, datum_stat
from hsflow.lagrangian import (
    BlowUpError,
    breakdown_set,
    fg,
    flattening_time,
    flow_map,
    lagrangian_at,
    riccati_solve,
    threshold_crossing_time,
)

times = st.floats(0.0, 2 * math.pi)


# -- Riccati closed form --------------------------------------------------------

@pytest.mark.parametrize("t", [0.0, 0.3, math.pi / 2, 2.0, 5.0])
def test_riccati_fixed_point(t):
    assert abs(riccati_solve(2j, t) - 2j) <= 1e-15


@pytest.mark.parametrize("t", [0.1, 0.7, 1.2, 2.5])
def test_riccati_zero_start(t):
    assert abs(riccati_solve(0.0, t) + 2 * math.tan(t)) <= 1e-13 * (1 + math.tan(t) ** 2)


def test_riccati_hand_value():
    assert abs(riccati_solve(2.0, math.pi / 4)) <= 1e-15


def test_riccati_blow_up_raises():
    with pytest.raises(BlowUpError):
        riccati_solve(-2.0, math.pi / 4)
    with pytest.raises(BlowUpError):
        riccati_solve(0.0, math.pi / 2)


def test_riccati_vectorized():
    z0 = np.array([2j, 1 + 1j, -0.5 + 2j])
    out = riccati_solve(z0, 0.4)
    assert out.shape == (3,)
    assert out[1] == riccati_solve(1 + 1j, 0.4)


def test_riccati_against_ode_solver():
    # independent oracle: integrate z' = -(z^2 + 4)/2 as a real 2-system
    def rhs(_, y):
        z = complex(y[0], y[1])
        dz = -(z * z + 4) / 2
        return [dz.real, dz.imag]

    for z0 in (0.5 + 1.0j, -1.0 + 0.5j, 1.5 + 2.5j):
        sol = solve_ivp(rhs, (0, 3.0), [z0.real, z0.imag], rtol=1e-12, atol=1e-12,
                        dense_output=True)
        for t in (0.5, 1.7, 3.0):
            ref = complex(*sol.sol(t))
            assert abs(riccati_solve(z0, t) - ref) <= 1e-8


@settings(max_examples=200)
@given(st.floats(0, 3), st.floats(0, 2 * math.pi), times)
def test_riccati_centered_residual(r, angle, t):
    h = 1e-4
    z0 = r * complex(math.cos(angle), math.sin(angle))
    try:
        zm, z, zp = (riccati_solve(z0, s) for s in (t - h, t, t + h))
    except BlowUpError:
        assume(False)
    # away from blow-up: the truncation constant grows like |z|^4
    assume(max(abs(zm), abs(z), abs(zp)) <= 4)
    assert abs((zp - zm) / (2 * h) + (z * z + 4) / 2) <= 1e-6


# -- building blocks ------------------------------------------------------------

@settings(max_examples=30)
@given(times)
def test_fg_stationary(t):
    f, g = fg(datum_stat(16), t)
    np.testing.assert_array_equal(f.values, math.cos(t))
    np.testing.assert_array_equal(g.values, math.sin(t))


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_fg_at_zero(name):
    f, g = fg(FIXTURES[name](32), 0.0)
    assert np.all(f.values == 1.0) and np.all(g.values == 0.0)


def test_fg_pw_breakdown_coincidence():
    d = datum_pw(64)
    f, g = fg(d, math.pi / 4)
    first = d.grid.x < 0.25
    assert np.max(np.abs(f.values[first])) <= 2e-16
    assert np.all(g.values[first] == 0.0)


# -- flow map ---------------------------------------------------------------------

@settings(max_examples=30)
@given(times)
def test_flow_map_stationary(t):
    s = flow_map(datum_stat(32), t)
    np.testing.assert_allclose(s.phi.values, s.phi.x, atol=1e-15)
    assert np.max(np.abs(s.phi_t.values)) <= 1e-15
    assert np.max(np.abs(s.U.values)) <= 1e-15
    np.testing.assert_allclose(s.R.values, 2.0, atol=1e-15)


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_flow_map_at_zero(name):
    d = FIXTURES[name](64)
    s = flow_map(d, 0.0)
    np.testing.assert_array_equal(s.phi.values, d.grid.x)
    np.testing.assert_array_equal(s.U.values, d.u_tilde_x.values)
    np.testing.assert_array_equal(s.R.values, d.rho_tilde.values)
    np.testing.assert_array_equal(s.phi_t.values, d.u_tilde.values)


def test_flow_map_pw_flattens_first_quarter():
    d = datum_pw(64)
    s = flow_map(d, math.pi / 4)
    first = d.grid.x < 0.25
    assert np.max(s.phi_x.values[first]) <= 1e-30
    assert np.all(s.flat == first)
    assert np.mean(s.flat) == 0.25


@pytest.mark.parametrize("name", sorted(FIXTURES))
@settings(max_examples=25, deadline=None)
@given(t=times)
def test_flow_map_invariants(name, t):
    d = FIXTURES[name](128)
    s = flow_map(d, t)
    assert s.phi.values[0] == 0.0
    assert abs(s.phi_end - 1.0) <= 1e-12
    assert np.all(np.diff(s.phi.values) >= -1e-15)
    assert np.all(s.phi_x.values >= 0.0)
    np.testing.assert_allclose(s.phi_x.values, s.f.values**2 + s.g.values**2, rtol=0, atol=1e-15)


def test_phi_matches_quadrature_of_f2_g2():
    # independent oracle: adaptive quadrature of f^2 + g^2 at off-grid labels
    d = datum_pw(16)
    for t in (0.3, 1.1, 2.8):
        xs = np.array([0.1, 0.3, 0.49, 0.77, 1.0])
        q = lagrangian_at(d, t, xs)
        for x, phi in zip(xs, q.phi):
            dens = lambda y: float(lagrangian_at(d, t, np.array([y])).phi_x[0])
            ref, _ = quad(dens, 0, x, points=[b for b in (0.25, 0.5) if b < x], epsabs=1e-14)
            assert abs(phi - ref) <= 1e-12

    d = datum_smooth(128)
    for t in (0.3, 1.1):
        q = lagrangian_at(d, t)
        s, c = math.sin(t), math.cos(t)
        dens = lambda y: (c + math.cos(2 * math.pi * y) / math.sqrt(2) * s) ** 2 + 0.75 * s * s
        for j in (5, 40, 101):
            ref, _ = quad(dens, 0, q.x[j], epsabs=1e-14)
            assert abs(q.phi[j] - ref) <= 1e-12


@pytest.mark.parametrize("name", ["smooth", "pw"])
def test_time_derivatives_match_differences(name):
    d, h = FIXTURES[name](128), 1e-5
    for t in (0.4, 1.9, 3.0):
        q, qp, qm = (lagrangian_at(d, s) for s in (t, t + h, t - h))
        assert np.max(np.abs((qp.phi - qm.phi) / (2 * h) - q.phi_t)) <= 1e-8
        assert np.max(np.abs((qp.phi_x - qm.phi_x) / (2 * h) - q.phi_tx)) <= 1e-8


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_U_R_match_explicit_quotients(name, rng):
    d = FIXTURES[name](256)
    ux, rho = d.u_tilde_x.values, d.rho_tilde.values
    for t in rng.uniform(0, 2 * math.pi, 20):
        q = lagrangian_at(d, t)
        s, c = math.sin(t), math.cos(t)
        den = (2 * c + ux * s) ** 2 + rho**2 * s * s
        keep = ~q.flat
        U = (4 * math.cos(2 * t) * ux + math.sin(2 * t) * (ux**2 + rho**2 - 4))[keep] / den[keep]
        R = 4 * rho[keep] / den[keep]
        assert np.max(np.abs(q.U[keep] - U)) <= 1e-9
        assert np.max(np.abs(q.R[keep] - R)) <= 1e-9


@pytest.mark.parametrize("name", ["stat", "smooth"])
def test_lagrangian_ode_residuals(name, rng):
    d, h = FIXTURES[name](128), 1e-4
    for t in rng.uniform(0, 2 * math.pi, 10):
        q, qp, qm = (lagrangian_at(d, s) for s in (t, t + h, t - h))
        U_t = (qp.U - qm.U) / (2 * h)
        R_t = (qp.R - qm.R) / (2 * h)
        assert np.max(np.abs(U_t + 0.5 * q.U**2 - 0.5 * q.R**2 + 2)) <= 1e-5
        assert np.max(np.abs(R_t + q.U * q.R)) <= 1e-5


def test_lagrangian_ode_residuals_second_order():
    d = datum_smooth(64)
    t, errs = 0.9, []
    for h in (1e-3, 5e-4):
        q, qp, qm = (lagrangian_at(d, s) for s in (t, t + h, t - h))
        errs.append(np.max(np.abs((qp.R - qm.R) / (2 * h) + q.U * q.R)))
    assert 3.9 <= errs[0] / errs[1] <= 4.1


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_state_is_pi_periodic(name, rng):
    d = FIXTURES[name](128)
    for t in rng.uniform(0, math.pi, 10):
        a, b = flow_map(d, t), flow_map(d, t + math.pi)
        np.testing.assert_allclose(b.f.values, -a.f.values, atol=1e-12)
        np.testing.assert_allclose(b.g.values, -a.g.values, atol=1e-12)
        for field in ("phi", "phi_x", "phi_t", "U", "R"):
            assert np.max(np.abs(getattr(a, field).values - getattr(b, field).values)) <= 1e-12


# -- breakdown -----------------------------------------------------------------------

def test_breakdown_set_examples():
    d = datum_pw(64)
    assert breakdown_set(d, math.pi / 4) == [(0.0, 0.25)]
    assert breakdown_set(d, 3 * math.pi / 4) == [(0.25, 0.5)]
    assert breakdown_set(d, 1.0) == []
    assert breakdown_set(d, 0.0) == []
    for t in (0.3, math.pi / 4, 2.0):
        assert breakdown_set(datum_smooth(64), t) == []


def test_flattening_time_locates_touch_down():
    t, m = flattening_time(datum_pw(256))
    assert t == math.pi / 4 and m <= 1e-30
    assert math.isinf(flattening_time(datum_smooth(64))[0])
    assert math.isinf(flattening_time(datum_stat(64))[0])


def test_threshold_crossing_precedes_touch_down():
    # for the piecewise fixture min phi_x = 2 sin^2(pi/4 - t) near pi/4, so the
    # predicate min phi_x <= tau first holds arcsin(sqrt(tau/2)) before T*
    tau = 1e-10
    t = threshold_crossing_time(datum_pw(256), tau)
    offset = math.asin(math.sqrt(tau / 2))
    assert abs(t - (math.pi / 4 - offset)) <= 1e-12
    assert offset > 1e-8
