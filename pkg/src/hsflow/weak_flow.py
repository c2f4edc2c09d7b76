"""Global conservative continuation of the flow through breakdown.

The Eulerian solution is read off the Lagrangian one through
u(t, phi(t, x)) = phi_t(t, x) and rho(t, phi(t, x)) = varrho_t(t, x), using the
generalized inverse of phi across flat regions.  Energy is audited against
the defect law E(t) = 4 - (4 / sin^2 t) |{u~_x = -2 cot t} n {rho~ = 0}|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .circle import PeriodicGridFn, derivative
from .datum import InitialDatum, level_set_measure, zero_set_slopes
from .lagrangian import LagrangianState, flat_threshold, flow_map, lagrangian_at

DEFECT_EXCLUSION = 1e-3


# -- defect times ------------------------------------------------------------

def defect_times(datum: InitialDatum, eps: float = 0.0) -> np.ndarray:
    """Times in [0, pi) where some label of {rho~ = 0} flattens.

    The flat label with slope p hits phi_x = 0 when cot t = -p/2, i.e. at
    t = pi/2 + arctan(p/2) mod pi.  For structured data these are exactly the
    times of positive defect measure.
    """
    slopes = zero_set_slopes(datum, eps)
    if slopes.size == 0:
        return np.array([])
    return np.unique(np.mod(math.pi / 2 + np.arctan(slopes / 2), math.pi))


def distance_to_defect(datum: InitialDatum, t: float) -> float:
    times = defect_times(datum)
    if times.size == 0:
        return math.inf
    d = np.abs(np.mod(t - times + math.pi / 2, math.pi) - math.pi / 2)
    return float(d.min())


def is_near_defect(datum: InitialDatum, t: float, tol: float = DEFECT_EXCLUSION) -> bool:
    return distance_to_defect(datum, t) <= tol


# -- varrho ------------------------------------------------------------------

def varrho_integral(datum: InitialDatum, t: float, steps: int = 256) -> PeriodicGridFn:
    """varrho(t, x) = rho~(x) int_0^t chi_{phi_x > 0} / phi_x ds by composite Simpson.

    Abscissae where phi_x falls below the flat threshold contribute 0.
    """
    if steps < 32:
        raise ValueError("varrho_integral needs at least 32 steps")
    steps += steps % 2
    rho = datum.rho_tilde.values
    ux = datum.u_tilde_x.values
    s = np.linspace(0.0, t, steps + 1)[:, None]
    f = np.cos(s) + 0.5 * ux * np.sin(s)
    g = 0.5 * rho * np.sin(s)
    phi_x = f * f + g * g
    cut = phi_x <= 1e-12 * phi_x.max(axis=1, keepdims=True)
    integrand = np.where(cut, 0.0, 1.0 / np.where(cut, 1.0, phi_x))
    w = np.ones(steps + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    quad = (t / steps / 3.0) * (w @ integrand)
    return datum.grid.fn(np.where(rho == 0.0, 0.0, rho * quad))


@dataclass(frozen=True, eq=False)
class WeakFlowState:
    t: float
    lag: LagrangianState
    varrho: PeriodicGridFn
    varrho_t: PeriodicGridFn


def weak_flow_state(datum: InitialDatum, t: float, steps: int = 256) -> WeakFlowState:
    lag = flow_map(datum, t)
    return WeakFlowState(t, lag, varrho_integral(datum, t, steps), lag.R)


# -- generalized inverse -----------------------------------------------------

def _locate(xs: np.ndarray, ys: np.ndarray, targets: np.ndarray, snap: float = 1e-13):
    """Generalized inverse of the polyline (xs, ys) at ``targets``.

    Returns (x, k, theta): x = min{x : poly(x) >= y}, lying on the segment
    [xs[k-1], xs[k]] at fraction theta (k = 0 means x = xs[0]).  Targets
    within ``snap`` of a vertex value land on that vertex.
    """
    targets = np.asarray(targets, dtype=float)
    k = np.searchsorted(ys, targets - snap, side="left")
    k = np.clip(k, 0, xs.size - 1)
    targets = np.where(np.abs(ys[k] - targets) <= snap, ys[k], targets)
    k = np.clip(k, 0, xs.size - 1)
    km = np.maximum(k - 1, 0)
    dy = ys[k] - ys[km]
    theta = np.where((k == 0) | (dy <= 0), 1.0,
                     (targets - ys[km]) / np.where(dy > 0, dy, 1.0))
    theta = np.clip(theta, 0.0, 1.0)
    x = xs[km] + theta * (xs[k] - xs[km])
    return x, k, theta


def _check_monotone(ys: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    if np.any(np.diff(ys) < -tol):
        raise ValueError("pseudo_inverse needs a nondecreasing flow map")
    return np.maximum.accumulate(ys)


def pseudo_inverse(phi: PeriodicGridFn, phi_end: float = 1.0) -> PeriodicGridFn:
    """psi(y_j) = min{x : phi(x) >= y_j} by inverting the sample polyline.

    The polyline runs through (x_j, phi_j) and the wrap vertex (1, phi_end).
    On flat stretches the left endpoint is returned.
    """
    grid = phi.grid
    xs = np.append(grid.x, 1.0)
    ys = _check_monotone(np.append(phi.values, phi_end))
    return grid.fn(_locate(xs, ys, grid.x)[0])


@dataclass(frozen=True, eq=False)
class EulerianFields:
    """Eulerian snapshot; ``mask`` flags nodes whose preimage is flat (values 0 there)."""

    t: float
    u: PeriodicGridFn
    u_x: PeriodicGridFn
    rho: PeriodicGridFn
    mask: np.ndarray

    @property
    def x(self):
        return self.u.grid.x


def eulerian_fields(datum: InitialDatum, t: float, interpolation: str = "cubic") -> EulerianFields:
    """u(y) = phi_t(psi(y)), u_x(y) = U(psi(y)), rho(y) = R(psi(y)).

    Structured data are inverted exactly (phi is piecewise linear between
    breakpoints).  Sampled data interpolate the Lagrangian values over the
    abscissae phi(x_j): ``"cubic"`` uses a periodic cubic spline (fourth
    order; needs phi strictly increasing and falls back to ``"linear"`` when
    flat labels exist), ``"linear"`` walks the sample polyline (second order).
    """
    grid = datum.grid
    y = grid.x
    if datum.structured is not None:
        b = np.array(datum.structured.breakpoints)
        vert = lagrangian_at(datum, t, b)
        ys = _check_monotone(vert.phi)
        psi, _, _ = _locate(b, ys, y)
        q = lagrangian_at(datum, t, psi)
        # the flat test must share the grid-wide scale, not the local one
        scale = flat_threshold(lagrangian_at(datum, t).phi_x)
        mask = q.phi_x <= scale
        u = q.phi_t
        ux = np.where(mask, 0.0, q.phi_tx / np.where(mask, 1.0, q.phi_x))
        rho = np.where(mask, 0.0, q.rho / np.where(mask, 1.0, q.phi_x))
    else:
        lag = lagrangian_at(datum, t)
        c, s = math.cos(t), math.sin(t)
        phi_end = c * c + s * s * datum.energy / 4.0
        xs = np.append(y, 1.0)
        ys = _check_monotone(np.append(lag.phi, phi_end))
        if interpolation == "cubic" and not lag.flat.any() and np.all(np.diff(ys) > 0):
            def spline(v):
                return CubicSpline(ys, np.append(v, v[0]), bc_type="periodic")(y)

            return EulerianFields(t, grid.fn(spline(lag.phi_t)), grid.fn(spline(lag.U)),
                                  grid.fn(spline(lag.R)), np.zeros(datum.n, dtype=bool))
        if interpolation not in ("cubic", "linear"):
            raise ValueError(f"unknown interpolation {interpolation!r}")
        _, k, theta = _locate(xs, ys, y)
        km = np.maximum(k - 1, 0)
        w0, w1 = 1.0 - theta, theta

        def wrap(v):
            return np.append(v, v[0])

        flat = wrap(lag.flat)
        mask = ((w0 > 0) & flat[km]) | ((w1 > 0) & flat[k])
        u = w0 * wrap(lag.phi_t)[km] + w1 * wrap(lag.phi_t)[k]
        ux = np.where(mask, 0.0, w0 * wrap(lag.U)[km] + w1 * wrap(lag.U)[k])
        rho = np.where(mask, 0.0, w0 * wrap(lag.R)[km] + w1 * wrap(lag.R)[k])
    return EulerianFields(t, grid.fn(u), grid.fn(ux), grid.fn(rho), np.asarray(mask))


# -- energy ------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyReport:
    t: float
    measured_E: float
    predicted_E: float
    defect_measure: float
    is_defect_time: bool


def measured_energy(datum: InitialDatum, t: float) -> float:
    """||u_x||^2 + ||rho||^2 through the change of variables y = phi(t, x).

    Equals 4 int_{phi_x > 0} (f_t^2 + g_t^2) dx.
    """
    if datum.structured is not None:
        st = datum.structured
        b = np.array(st.breakpoints)
        q = lagrangian_at(datum, t, 0.5 * (b[:-1] + b[1:]))
        keep = ~q.flat
        return float(4.0 * np.sum(((q.f_t**2 + q.g_t**2) * st.lengths)[keep]))
    q = lagrangian_at(datum, t)
    return float(4.0 * np.mean(np.where(q.flat, 0.0, q.f_t**2 + q.g_t**2)))


def energy_report(datum: InitialDatum, t: float, eps: float = 1e-9) -> EnergyReport:
    s = math.sin(t)
    if abs(s) > 1e-15:
        defect = level_set_measure(datum, -2.0 * math.cos(t) / s, eps)
        predicted = 4.0 - 4.0 * defect / (s * s)
    else:
        defect, predicted = 0.0, 4.0
    return EnergyReport(t, measured_energy(datum, t), predicted, defect, defect > 0)


# -- tangent spaces ----------------------------------------------------------

@dataclass(frozen=True)
class MembershipReport:
    origin_ok: bool
    flat_ok: bool
    finite_ok: bool
    integral: float
    inner_product: float
    flat_fraction: float

    @property
    def ok(self) -> bool:
        return self.origin_ok and self.flat_ok and self.finite_ok


def _phi_x_from_samples(phi: PeriodicGridFn) -> np.ndarray:
    periodic = phi.with_values(phi.values - phi.x)
    return derivative(periodic, method="centered").values + 1.0


def inner_product(U, F, V, G, phi_x, varrho, flat=None) -> float:
    """<(U,F),(V,G)> at (phi, varrho): 1/4 int_{S \\ N} U_x V_x / phi_x + (F - varrho)(G - varrho) phi_x.

    Here U, V are passed as their x-derivatives (arrays on the grid).
    """
    phi_x = np.asarray(phi_x)
    if flat is None:
        flat = phi_x <= flat_threshold(phi_x)
    keep = ~flat
    safe = np.where(keep, phi_x, 1.0)
    F, G, varrho = np.asarray(F), np.asarray(G), np.asarray(varrho)
    integrand = np.where(keep, np.asarray(U) * np.asarray(V) / safe
                         + (F - varrho) * (G - varrho) * phi_x, 0.0)
    return 0.25 * float(np.mean(integrand))


def tangent_membership(U: PeriodicGridFn, F: PeriodicGridFn, phi: PeriodicGridFn,
                       varrho: PeriodicGridFn, eps: float = 1e-9,
                       phi_x=None, U_x=None) -> MembershipReport:
    """Check (U, F) against the tangent-space characterization at (phi, varrho).

    The conditions are U(0) = 0, U_x = 0 on N = {phi_x = 0}, and finiteness
    of int_{S \\ N} U_x^2 / phi_x + (F - varrho)^2 phi_x.  ``phi_x`` and
    ``U_x`` default to centered differences of the samples; pass closed forms
    when available.
    """
    px = _phi_x_from_samples(phi) if phi_x is None else np.asarray(phi_x, dtype=float)
    ux = derivative(U, method="centered").values if U_x is None else np.asarray(U_x, dtype=float)
    flat = px <= flat_threshold(px) if px.max() > 0 else np.ones_like(px, dtype=bool)
    keep = ~flat
    safe = np.where(keep, px, 1.0)
    d = F.values - varrho.values
    integrand = np.where(keep, ux**2 / safe + d**2 * px, 0.0)
    integral = float(np.mean(integrand))
    flat_max = float(np.max(np.abs(ux[flat]))) if flat.any() else 0.0
    return MembershipReport(
        origin_ok=abs(U.values[0]) <= eps,
        flat_ok=flat_max <= eps,
        finite_ok=bool(np.isfinite(integral)),
        integral=integral,
        inner_product=0.25 * integral,
        flat_fraction=float(np.mean(flat)),
    )


def state_membership(datum: InitialDatum, t: float, base: str = "zero",
                     steps: int = 256, eps: float = 1e-9) -> MembershipReport:
    """Membership of (phi_t, varrho_t) with closed-form derivatives.

    ``base="zero"`` uses the base point (phi, 0); ``base="varrho"`` uses
    (phi, varrho(t)).
    """
    lag = flow_map(datum, t)
    if base == "zero":
        vr = lag.phi.with_values(np.zeros(datum.n))
    elif base == "varrho":
        vr = varrho_integral(datum, t, steps)
    else:
        raise ValueError(f"unknown base point {base!r}")
    return tangent_membership(lag.phi_t, lag.R, lag.phi, vr, eps,
                              phi_x=lag.phi_x.values, U_x=lag.phi_tx.values)
