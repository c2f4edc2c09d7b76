"""Christoffel operator, weak geodesic residuals and an Eulerian oracle.

In Eulerian variables the geodesic equation reads

    u_t + u u_x = Gamma1(u, rho),   rho_t + (u rho)_x = 0,
    Gamma1(x) = 1/2 int_0^x (u_x^2 + rho^2) dy - x/2 int_S (u_x^2 + rho^2) dy.

Residuals are measured weakly against Fourier modes theta_k(y) = exp(2 pi i k y)
after pulling the test functions back through the flow, y = phi(t, x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circle import (
    PeriodicGridFn,
    _spectral_cumulative,
    cumulative_integral,
    derivative,
    integrate,
    l2_norm_sq,
)
from .datum import InitialDatum, breakdown_time
from .lagrangian import lagrangian_at
from .weak_flow import (
    EulerianFields,
    distance_to_defect,
    eulerian_fields,
    measured_energy,
    DEFECT_EXCLUSION,
)

# weak residual bound max(RESIDUAL_FLOOR, RESIDUAL_C * h^2)
RESIDUAL_FLOOR = 1e-5
RESIDUAL_C = 10.0
DEFAULT_MODES = 4


class DefectTimeError(ValueError):
    """The classical residual is undefined at a defect time."""


class OracleGuardError(RuntimeError):
    """The oracle integration approached blow-up or lost energy."""


@dataclass(frozen=True, eq=False)
class ChristoffelValue:
    first: PeriodicGridFn
    second: PeriodicGridFn


def christoffel_diag(u: PeriodicGridFn, rho: PeriodicGridFn, method: str = "spectral",
                     u_x: PeriodicGridFn | None = None) -> ChristoffelValue:
    """Gamma((u, rho), (u, rho)) at the identity.

    first  = 1/2 int_0^x (u_x^2 + rho^2) - x/2 int_S (u_x^2 + rho^2)
    second = -(u rho)_x
    """
    if u_x is None:
        u_x = derivative(u)
    dens = u.with_values(u_x.values**2 + rho.values**2)
    first = 0.5 * cumulative_integral(dens, method).values - 0.5 * u.x * integrate(dens)
    second = -derivative(u.with_values(u.values * rho.values)).values
    return ChristoffelValue(u.with_values(first), u.with_values(second))


def christoffel_bilinear(u, rho, v, sigma, method: str = "spectral") -> ChristoffelValue:
    """Symmetric Gamma((u, rho), (v, sigma)).

    The velocity slot is the polarization of :func:`christoffel_diag`; the
    density slot is -(u_x sigma + v_x rho)/2.
    """
    plus = christoffel_diag(u.with_values(u.values + v.values),
                            rho.with_values(rho.values + sigma.values), method)
    minus = christoffel_diag(u.with_values(u.values - v.values),
                             rho.with_values(rho.values - sigma.values), method)
    first = 0.25 * (plus.first.values - minus.first.values)
    second = -0.5 * (derivative(u).values * sigma.values + derivative(v).values * rho.values)
    return ChristoffelValue(u.with_values(first), u.with_values(second))


# -- weak residuals -----------------------------------------------------------

@dataclass(frozen=True)
class ResidualReport:
    t: float
    h: float
    r1_weak: np.ndarray
    r2_weak: np.ndarray
    r1_linf_unmasked: float
    mask_fraction: float

    @property
    def max_weak(self) -> float:
        return float(max(self.r1_weak.max(), self.r2_weak.max()))


def _labels(datum: InitialDatum, points: int):
    """Quadrature labels and weights for pulled-back integrals.

    Sampled data use the grid (periodic trapezoid); structured data use
    Gauss-Legendre per piece, where every integrand is smooth.
    """
    if datum.structured is None:
        return None, np.full(datum.n, 1.0 / datum.n)
    b = np.array(datum.structured.breakpoints)
    node, weight = np.polynomial.legendre.leggauss(points)
    lo, hi = b[:-1, None], b[1:, None]
    x = 0.5 * (hi - lo) * node + 0.5 * (hi + lo)
    w = 0.5 * (hi - lo) * weight
    return x.ravel(), w.ravel()


def _gamma1_pulled_back(datum: InitialDatum, t: float, q) -> np.ndarray:
    """Gamma1(u, rho) evaluated at y = phi(t, x) for the labels of ``q``.

    int_0^{phi(x)} (u_x^2 + rho^2) dy = int_0^x (U^2 + R^2) phi_x dx' over
    non-flat labels.
    """
    if datum.structured is None:
        dens = np.where(q.flat, 0.0, (q.U**2 + q.R**2) * q.phi_x)
        cum = _spectral_cumulative(dens)
        total = float(np.mean(dens))
    else:
        st = datum.structured
        b = np.array(st.breakpoints)
        mid = lagrangian_at(datum, t, 0.5 * (b[:-1] + b[1:]))
        dens = np.where(mid.flat, 0.0, (mid.U**2 + mid.R**2) * mid.phi_x)
        prefix = np.concatenate([[0.0], np.cumsum(dens * st.lengths)])
        i = st.piece_index(q.x)
        cum = prefix[i] + dens[i] * (q.x - b[i])
        total = float(prefix[-1])
    return 0.5 * cum - 0.5 * q.phi * total


def _pairings(datum, t, x, w, k):
    q = lagrangian_at(datum, t, x)
    theta = np.exp(2j * np.pi * np.outer(k, q.phi))
    keep = ~q.flat
    p_u = theta @ (w * q.phi_t * q.phi_x)
    p_rho = theta @ (w * np.where(keep, q.R * q.phi_x, 0.0))
    return q, theta, p_u, p_rho


def geodesic_residual(datum: InitialDatum, t: float, h: float = 1e-4,
                      modes: int = DEFAULT_MODES, exclusion: float = DEFECT_EXCLUSION,
                      points: int = 16) -> ResidualReport:
    """Weak residuals of u_t + u u_x - Gamma1 and rho_t + (u rho)_x.

    For each test mode theta_k the pairings int u theta dy and int rho theta dy
    are computed in Lagrangian labels and differenced in time with step h:

        r1_k = d/dt int u theta_k - 1/2 int u^2 theta_k' - int Gamma1 theta_k
        r2_k = d/dt int rho theta_k - int u rho theta_k'

    ``r1_linf_unmasked`` is the pointwise residual phi_tt - Gamma1 o phi over
    non-flat grid labels.
    """
    if not 1e-5 <= h <= 1e-3:
        raise ValueError(f"h must lie in [1e-5, 1e-3], got {h}")
    gap = distance_to_defect(datum, t)
    if gap <= max(exclusion, 2 * h):
        raise DefectTimeError(f"t={t!r} lies within {gap:.3e} of a defect time")
    x, w = _labels(datum, points)
    k = np.arange(modes)
    _, _, pu_p, pr_p = _pairings(datum, t + h, x, w, k)
    _, _, pu_m, pr_m = _pairings(datum, t - h, x, w, k)
    q, theta, _, _ = _pairings(datum, t, x, w, k)
    dtheta = 2j * np.pi * k[:, None] * theta
    keep = ~q.flat
    gamma1 = _gamma1_pulled_back(datum, t, q)
    half_u2 = dtheta @ (w * 0.5 * q.phi_t**2 * q.phi_x)
    g_term = theta @ (w * gamma1 * q.phi_x)
    flux = dtheta @ (w * np.where(keep, q.phi_t * q.R * q.phi_x, 0.0))
    r1 = (pu_p - pu_m) / (2 * h) - half_u2 - g_term
    r2 = (pr_p - pr_m) / (2 * h) - flux

    grid = lagrangian_at(datum, t)
    gamma_grid = _gamma1_pulled_back(datum, t, grid)
    phi_tt = (lagrangian_at(datum, t + h).phi_t - lagrangian_at(datum, t - h).phi_t) / (2 * h)
    lag_res = np.abs(phi_tt - gamma_grid)[~grid.flat]
    return ResidualReport(t, h, np.abs(r1), np.abs(r2),
                          float(lag_res.max()) if lag_res.size else 0.0,
                          float(np.mean(grid.flat)))


def residual_bound(h: float) -> float:
    return max(RESIDUAL_FLOOR, RESIDUAL_C * h * h)


# -- audit --------------------------------------------------------------------

@dataclass
class ConditionResult:
    passed: bool
    value: float
    detail: str = ""


@dataclass
class AuditReport:
    conditions: dict = field(default_factory=dict)
    skipped_times: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions.values())


def weak_solution_audit(datum: InitialDatum, times, h: float = 1e-4,
                        modes: int = DEFAULT_MODES, exclusion: float = DEFECT_EXCLUSION,
                        energy_tol: float = 1e-6) -> AuditReport:
    """Check conditions (a)-(d) of a global conservative weak solution."""
    times = [float(t) for t in times]
    if not times or any(not math.isfinite(t) or t < 0 for t in times):
        raise ValueError("audit times must be finite and nonnegative")
    report = AuditReport()

    # (a) H^1 seminorm of u(t, .) on unmasked nodes
    worst = 0.0
    for t in times:
        ef = eulerian_fields(datum, t)
        vals = ef.u_x.values[~ef.mask]
        worst = max(worst, float(np.sum(vals**2)) / datum.n)
    report.conditions["a"] = ConditionResult(bool(np.isfinite(worst)), worst,
                                             "max ||u_x||^2 over unmasked nodes")

    # (b) initial data recovered
    ef0 = eulerian_fields(datum, 0.0)
    du = float(np.max(np.abs(ef0.u.values - datum.u_tilde.values)))
    close = np.abs(ef0.rho.values - datum.rho_tilde.values) <= 1e-9
    frac = float(np.mean(close))
    report.conditions["b"] = ConditionResult(du <= 1e-9 and frac >= 1 - 1.0 / datum.n, du,
                                             f"rho matches on {frac:.4f} of nodes")

    # (c) L^infinity in time of ||u_x||^2 + ||rho||^2
    energies = [measured_energy(datum, t) for t in times]
    sup_e = max(energies)
    report.conditions["c"] = ConditionResult(sup_e <= 4.0 + energy_tol, sup_e,
                                             "sup_t ||u_x||^2 + ||rho||^2")

    # (d) weak geodesic equation away from defect times
    worst_res, ok = 0.0, True
    for t in times:
        if distance_to_defect(datum, t) <= max(exclusion, 2 * h):
            report.skipped_times.append(t)
            continue
        r = geodesic_residual(datum, t, h=h, modes=modes, exclusion=exclusion)
        worst_res = max(worst_res, r.max_weak)
        ok &= r.max_weak <= residual_bound(h)
    report.conditions["d"] = ConditionResult(ok, worst_res,
                                             f"skipped defect times {report.skipped_times}")
    return report


# -- oracle -------------------------------------------------------------------

def _oracle_rhs(u: np.ndarray, rho: np.ndarray, grid, method: str):
    uf, rf = grid.fn(u), grid.fn(rho)
    ux = derivative(uf)
    gam = christoffel_diag(uf, rf, method=method, u_x=ux)
    return -u * ux.values + gam.first.values, gam.second.values


def oracle_solve(datum: InitialDatum, t_end: float, n: int | None = None, dt: float = 1e-4,
                 method: str = "spectral", max_slope: float = 1e3,
                 max_drift: float = 1e-3) -> EulerianFields:
    """Method-of-lines solution of the Eulerian system up to t_end.

    Fourier collocation in space, classical RK4 in time, u(t, 0) re-pinned to
    0 after every step.  Only valid before the breakdown time.
    """
    n = datum.n if n is None else n
    if t_end >= breakdown_time(datum):
        raise ValueError(f"t_end={t_end} is not below the breakdown time "
                         f"{breakdown_time(datum)!r}")
    if dt > 0.5 / n:
        raise ValueError(f"dt={dt} exceeds the stability limit 0.5/n={0.5 / n}")
    d = datum.resample(n)
    grid = d.grid
    u, rho = d.u_tilde.values.copy(), d.rho_tilde.values.copy()
    e0 = d.energy
    steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    dt = t_end / steps
    for i in range(steps):
        k1u, k1r = _oracle_rhs(u, rho, grid, method)
        k2u, k2r = _oracle_rhs(u + 0.5 * dt * k1u, rho + 0.5 * dt * k1r, grid, method)
        k3u, k3r = _oracle_rhs(u + 0.5 * dt * k2u, rho + 0.5 * dt * k2r, grid, method)
        k4u, k4r = _oracle_rhs(u + dt * k3u, rho + dt * k3r, grid, method)
        u = u + dt / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        rho = rho + dt / 6 * (k1r + 2 * k2r + 2 * k3r + k4r)
        u -= u[0]
        ux = derivative(grid.fn(u))
        slope = float(np.max(np.abs(ux.values)))
        energy = l2_norm_sq(ux) + float(np.mean(rho**2))
        if not np.isfinite(slope) or slope > max_slope:
            raise OracleGuardError(f"|u_x| reached {slope:.3e} at t={(i + 1) * dt:.6f}")
        if abs(energy - e0) > max_drift:
            raise OracleGuardError(f"energy drifted to {energy!r} at t={(i + 1) * dt:.6f}")
    ux = derivative(grid.fn(u))
    return EulerianFields(t_end, grid.fn(u), ux, grid.fn(rho), np.zeros(n, dtype=bool))


def field_distance(a: EulerianFields, b: EulerianFields) -> float:
    """L^2 distance sqrt(||u_a - u_b||^2 + ||rho_a - rho_b||^2) on common unmasked nodes."""
    keep = ~(a.mask | b.mask)
    du = (a.u.values - b.u.values)[keep]
    dr = (a.rho.values - b.rho.values)[keep]
    return math.sqrt(float(np.sum(du**2 + dr**2)) / a.u.grid.n)
