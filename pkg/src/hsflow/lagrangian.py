"""Closed-form Lagrangian solution along characteristics.

With f = cos t + (u~_x/2) sin t and g = (rho~/2) sin t the flow map is
phi(t, x) = int_0^x f^2 + g^2, and z = U + iR (U = u_x o phi, R = rho o phi)
solves the Riccati equation z_t = -(z^2 + 4)/2 pointwise in x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from .circle import PeriodicGridFn
from .datum import InitialDatum

EPS_FLAT_REL = 1e-12
BLOWUP_TOL = 1e-14


class BlowUpError(ArithmeticError):
    """A characteristic reached the pole of the Riccati solution."""

    def __init__(self, t, z0):
        self.t, self.z0 = t, z0
        super().__init__(f"characteristic blew up at t={t!r} for z0={z0!r}")


def riccati_solve(z0, t: float, tol: float = BLOWUP_TOL):
    """z(t) for z' = -(z^2 + 4)/2, z(0) = z0, in the pole-free sin/cos form.

    z0 may be a complex scalar or array (real part U, imaginary part R).
    """
    z0 = np.asarray(z0, dtype=complex)
    c, s = math.cos(t), math.sin(t)
    den = z0 * s + 2 * c
    bad = np.abs(den) <= tol
    if np.any(bad):
        raise BlowUpError(t, z0[bad].ravel()[0] if z0.ndim else complex(z0))
    z = (2 * z0 * c - 4 * s) / den
    return complex(z) if z.ndim == 0 else z


@dataclass(frozen=True, eq=False)
class LagrangianState:
    """Snapshot of the flow at time t on the label grid.

    ``U`` and ``R`` hold 0 on flat labels (phi_x = 0), where they blow up;
    ``flat`` marks those labels.  ``phi_end`` is phi(t, 1).
    """

    t: float
    phi: PeriodicGridFn
    phi_x: PeriodicGridFn
    phi_t: PeriodicGridFn
    phi_tx: PeriodicGridFn
    U: PeriodicGridFn
    R: PeriodicGridFn
    f: PeriodicGridFn
    g: PeriodicGridFn
    f_t: PeriodicGridFn
    g_t: PeriodicGridFn
    flat: np.ndarray
    phi_end: float


def flat_threshold(phi_x: np.ndarray) -> float:
    return EPS_FLAT_REL * float(np.max(phi_x))


def lagrangian_at(datum: InitialDatum, t: float, x=None):
    """Closed-form Lagrangian quantities as plain arrays.

    Without ``x`` the grid labels are used.  Arbitrary labels require a
    structured datum, whose u~, K are known in closed form.
    """
    if x is None:
        x = datum.grid.x
        u, ux = datum.u_tilde.values, datum.u_tilde_x.values
        rho, k = datum.rho_tilde.values, datum.energy_cumulative.values
    else:
        if datum.structured is None:
            raise ValueError("off-grid labels need a structured datum")
        u, ux, rho, k = datum.structured.evaluate(x)
    c, s = math.cos(t), math.sin(t)
    a, b = ux / 2, rho / 2
    f = c + a * s
    g = b * s
    f_t = -s + a * c
    g_t = b * c
    phi = x * c * c + s * c * u + s * s * k
    phi_x = f * f + g * g
    phi_t = math.cos(2 * t) * u + math.sin(2 * t) * (k - x)
    phi_tx = 2 * (f * f_t + g * g_t)
    flat = phi_x <= flat_threshold(phi_x)
    safe = np.where(flat, 1.0, phi_x)
    U = np.where(flat, 0.0, phi_tx / safe)
    R = np.where(flat, 0.0, rho / safe)
    return SimpleNamespace(t=t, x=x, u=u, ux=ux, rho=rho, k=k, f=f, g=g, f_t=f_t, g_t=g_t,
                           phi=phi, phi_x=phi_x, phi_t=phi_t, phi_tx=phi_tx,
                           U=U, R=R, flat=flat)


def fg(datum: InitialDatum, t: float):
    """The building blocks f = cos t + (u~_x/2) sin t and g = (rho~/2) sin t."""
    c, s = math.cos(t), math.sin(t)
    f = c + 0.5 * datum.u_tilde_x.values * s
    g = 0.5 * datum.rho_tilde.values * s
    return datum.grid.fn(f), datum.grid.fn(g)


def flow_map(datum: InitialDatum, t: float) -> LagrangianState:
    """Flow map, its derivatives and the Lagrangian fields at time t.

    phi = int_0^x (f^2 + g^2) is assembled as x cos^2 t + sin t cos t u~ +
    sin^2 t K, which is the same antiderivative written through the datum's
    cached K; this keeps phi(0, .) = id and phi_t(0, .) = u~ exact.
    """
    q = lagrangian_at(datum, t)
    fn = datum.grid.fn
    c, s = math.cos(t), math.sin(t)
    phi_end = c * c + s * s * datum.energy / 4.0
    return LagrangianState(
        t=t, phi=fn(q.phi), phi_x=fn(q.phi_x), phi_t=fn(q.phi_t), phi_tx=fn(q.phi_tx),
        U=fn(q.U), R=fn(q.R), f=fn(q.f), g=fn(q.g), f_t=fn(q.f_t), g_t=fn(q.g_t),
        flat=q.flat, phi_end=phi_end,
    )


def _runs(mask: np.ndarray):
    n = mask.size
    out, j = [], 0
    while j < n:
        if mask[j]:
            k = j
            while k + 1 < n and mask[k + 1]:
                k += 1
            out.append((j / n, k / n))
            j = k + 1
        else:
            j += 1
    return out


def breakdown_set(datum: InitialDatum, t: float, eps: float = 1e-9):
    """B(t) = {rho~ = 0} n {u~_x = -2 cot t} as a list of intervals."""
    s = math.sin(t)
    if abs(s) < 1e-15:
        return []
    c = -2 * math.cos(t) / s
    if datum.structured is not None:
        st = datum.structured
        b = st.breakpoints
        hits = [(b[i], b[i + 1]) for i, (p, r) in enumerate(zip(st.ux_pieces, st.rho_pieces))
                if r == 0.0 and abs(p - c) <= eps]
        merged = []
        for a, e in hits:
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], e)
            else:
                merged.append((a, e))
        return merged
    mask = (np.abs(datum.rho_tilde.values) <= eps) & (np.abs(datum.u_tilde_x.values - c) <= eps)
    return _runs(mask)


def _min_phi_x(datum: InitialDatum, ts: np.ndarray):
    ux, rho = datum.u_tilde_x.values, datum.rho_tilde.values
    c, s = np.cos(ts)[:, None], np.sin(ts)[:, None]
    f = c + 0.5 * ux * s
    g = 0.5 * rho * s
    return (f * f + g * g).min(axis=1)


def _touchdown_slope(datum: InitialDatum, t: float) -> float:
    q = lagrangian_at(datum, t)
    j = int(np.argmin(q.phi_x))
    return float(2 * (q.f[j] * q.f_t[j] + q.g[j] * q.g_t[j]))


def flattening_time(datum: InitialDatum, threshold: float = 1e-10, t_max: float = math.pi,
                    scan: int = 4096):
    """First time min_x phi_x(t, .) touches down to <= ``threshold``.

    A scan of m(t) = min_x phi_x(t, .) over (0, t_max) brackets each local
    minimum; bisection on the sign of d/dt phi_x at the minimizing label then
    locates the minimum to rounding.  Returns ``(t, m(t))`` for the first
    minimum with m <= threshold, or ``(inf, nan)``.
    """
    ts = np.linspace(0.0, t_max, scan + 1)
    m = _min_phi_x(datum, ts)
    for i in range(1, scan):
        if not (m[i] <= m[i - 1] and m[i] <= m[i + 1]):
            continue
        lo, hi = ts[i - 1], ts[i + 1]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if _touchdown_slope(datum, mid) < 0:
                lo = mid
            else:
                hi = mid
        t_star = float(0.5 * (lo + hi))
        m_star = float(_min_phi_x(datum, np.array([t_star]))[0])
        if m_star <= threshold:
            return t_star, m_star
    return math.inf, math.nan


def threshold_crossing_time(datum: InitialDatum, threshold: float = 1e-10,
                            t_max: float = math.pi, scan: int = 4096) -> float:
    """First t with min_x phi_x(t, .) <= ``threshold``, by bisection on that predicate.

    Near a quadratic touch-down this precedes the touch-down itself by about
    sqrt(threshold / (d^2 m / dt^2 / 2)).
    """
    ts = np.linspace(0.0, t_max, scan + 1)
    hit = np.nonzero(_min_phi_x(datum, ts) <= threshold)[0]
    if hit.size == 0:
        t_touch, _ = flattening_time(datum, threshold, t_max, scan)
        if not math.isfinite(t_touch):
            return math.inf
        i = int(np.searchsorted(ts, t_touch))
        lo, hi = ts[i - 1], t_touch
    else:
        i = int(hit[0])
        if i == 0:
            return 0.0
        lo, hi = ts[i - 1], ts[i]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _min_phi_x(datum, np.array([mid]))[0] <= threshold:
            hi = mid
        else:
            lo = mid
    return hi
