"""Initial data (u~, rho~) in the normalized gauge ||u~_x||^2 + ||rho~||^2 = 4.

Two representations coexist.  Sampled data carry grid values only; structured
data are piecewise linear in u~ (piecewise constant u~_x and rho~) and allow
level sets such as {u~_x = c} n {rho~ = 0} to be measured exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .circle import (
    PeriodicGrid,
    PeriodicGridFn,
    cumulative_integral,
    derivative,
    integrate,
    l2_norm_sq,
)

GAUGE_ENERGY = 4.0
ENERGY_TOL = 1e-8
PERIODIC_TOL = 1e-10
ORIGIN_TOL = 1e-10
STRUCTURED_ENERGY_TOL = 1e-12


class DatumError(ValueError):
    """An initial datum violates one of its invariants."""


@dataclass(frozen=True)
class StructuredDatum:
    breakpoints: tuple
    ux_pieces: tuple
    rho_pieces: tuple

    def __post_init__(self):
        b = tuple(float(v) for v in self.breakpoints)
        ux = tuple(float(v) for v in self.ux_pieces)
        rho = tuple(float(v) for v in self.rho_pieces)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "ux_pieces", ux)
        object.__setattr__(self, "rho_pieces", rho)
        if len(b) < 2 or b[0] != 0.0 or b[-1] != 1.0:
            raise DatumError("breakpoints must start at 0 and end at 1")
        if any(b1 <= b0 for b0, b1 in zip(b, b[1:])):
            raise DatumError("breakpoints must be strictly increasing")
        if len(ux) != len(b) - 1 or len(rho) != len(b) - 1:
            raise DatumError("need exactly one ux and one rho value per interval")

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def energy(self) -> float:
        ux, rho = np.array(self.ux_pieces), np.array(self.rho_pieces)
        return float(np.sum((ux**2 + rho**2) * self.lengths))

    @property
    def mean_slope(self) -> float:
        return float(np.sum(np.array(self.ux_pieces) * self.lengths))

    def scaled(self, alpha: float) -> StructuredDatum:
        return StructuredDatum(
            self.breakpoints,
            [alpha * v for v in self.ux_pieces],
            [alpha * v for v in self.rho_pieces],
        )

    def piece_index(self, x) -> np.ndarray:
        """Index of the left-closed piece [b_i, b_{i+1}) holding x (x = 1 maps to the last)."""
        idx = np.searchsorted(self.breakpoints, np.asarray(x, dtype=float), side="right") - 1
        return np.clip(idx, 0, len(self.ux_pieces) - 1)

    def evaluate(self, x):
        """Exact (u~, u~_x, rho~, K) at labels x, K(x) = int_0^x (u~_x^2 + rho~^2)/4."""
        x = np.asarray(x, dtype=float)
        b = np.array(self.breakpoints)
        ux = np.array(self.ux_pieces)
        rho = np.array(self.rho_pieces)
        dens = (ux**2 + rho**2) / 4.0
        u_at = np.concatenate([[0.0], np.cumsum(ux * self.lengths)])
        k_at = np.concatenate([[0.0], np.cumsum(dens * self.lengths)])
        i = self.piece_index(x)
        dx = x - b[i]
        return u_at[i] + ux[i] * dx, ux[i], rho[i], k_at[i] + dens[i] * dx


@dataclass(frozen=True, eq=False)
class InitialDatum:
    """Validated initial datum on a periodic grid.

    ``energy_cumulative`` caches K(x) = int_0^x (u~_x^2 + rho~^2)/4 dy, the
    only spatial antiderivative the closed-form flow needs.
    """

    u_tilde: PeriodicGridFn
    rho_tilde: PeriodicGridFn
    u_tilde_x: PeriodicGridFn
    energy_cumulative: PeriodicGridFn
    structured: StructuredDatum | None = None
    cumulative_method: str = "spectral"

    @property
    def grid(self) -> PeriodicGrid:
        return self.u_tilde.grid

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def energy(self) -> float:
        if self.structured is not None:
            return self.structured.energy
        return l2_norm_sq(self.u_tilde_x) + l2_norm_sq(self.rho_tilde)

    @classmethod
    def from_samples(cls, u, rho, ux=None, cumulative_method="spectral", validate=True):
        """Build a sampled datum; u~_x defaults to the collocation derivative of u~."""
        grid = u.grid
        if ux is None:
            ux = derivative(u)
        dens = grid.fn((ux.values**2 + rho.values**2) / 4.0)
        datum = cls(u, rho, ux, cumulative_integral(dens, cumulative_method),
                    None, cumulative_method)
        if validate:
            datum.validate()
        return datum

    @classmethod
    def from_structured(cls, structured: StructuredDatum, n: int, validate=True):
        grid = PeriodicGrid(n)
        u, ux, rho, k = structured.evaluate(grid.x)
        datum = cls(grid.fn(u), grid.fn(rho), grid.fn(ux), grid.fn(k), structured, "exact")
        if validate:
            datum.validate()
        return datum

    def validate(self) -> None:
        if abs(self.u_tilde.values[0]) > ORIGIN_TOL:
            raise DatumError(f"u~(0) = 0 violated: u~(0) = {self.u_tilde.values[0]:.3e}")
        if self.structured is not None:
            s = self.structured
            if abs(s.mean_slope) > PERIODIC_TOL:
                raise DatumError(f"periodicity violated: int u~_x = {s.mean_slope:.3e}")
            if abs(s.energy - GAUGE_ENERGY) > STRUCTURED_ENERGY_TOL:
                raise DatumError(f"gauge violated: energy = {s.energy!r}, expected 4")
            return
        mean_ux = integrate(self.u_tilde_x)
        if abs(mean_ux) > PERIODIC_TOL:
            raise DatumError(f"periodicity violated: int u~_x = {mean_ux:.3e}")
        if abs(self.energy - GAUGE_ENERGY) > ENERGY_TOL:
            raise DatumError(f"gauge violated: energy = {self.energy!r}, expected 4")

    def resample(self, n: int) -> InitialDatum:
        """Same datum on an n-point grid (exact for structured, Fourier otherwise)."""
        if n == self.n:
            return self
        if self.structured is not None:
            return InitialDatum.from_structured(self.structured, n)
        grid = PeriodicGrid(n)
        u = grid.fn(_fourier_resample(self.u_tilde.values, n))
        rho = grid.fn(_fourier_resample(self.rho_tilde.values, n))
        return InitialDatum.from_samples(u, rho, cumulative_method=self.cumulative_method)


def _fourier_resample(v: np.ndarray, n: int) -> np.ndarray:
    m = v.size
    c = np.fft.rfft(v) / m
    out = np.zeros(n // 2 + 1, dtype=complex)
    k = min(m // 2, n // 2)
    out[:k] = c[:k]
    return np.fft.irfft(out * n, n)


def normalize(u: PeriodicGridFn, rho: PeriodicGridFn, ux: PeriodicGridFn | None = None):
    """Rescale (u, rho) by alpha = 2/sqrt(E0) into the gauge energy = 4.

    Returns ``(datum, alpha)``.  The system is invariant under
    u -> alpha u(alpha t, x), so the normalized solution at time s is the
    original one at time alpha * s (see :func:`to_original_time`).
    """
    if abs(u.values[0]) > ORIGIN_TOL:
        raise DatumError(f"u(0) = 0 violated: u(0) = {u.values[0]:.3e}")
    if ux is None:
        ux = derivative(u)
    e0 = l2_norm_sq(ux) + l2_norm_sq(rho)
    if e0 <= 0.0:
        raise DatumError("zero datum has no normalized representative")
    alpha = 2.0 / math.sqrt(e0)
    if abs(alpha - 1.0) < 1e-13:
        alpha = 1.0
    datum = InitialDatum.from_samples(
        u.with_values(alpha * u.values),
        rho.with_values(alpha * rho.values),
        ux.with_values(alpha * ux.values),
    )
    return datum, alpha


def normalize_structured(structured: StructuredDatum, n: int):
    e0 = structured.energy
    if e0 <= 0.0:
        raise DatumError("zero datum has no normalized representative")
    alpha = 2.0 / math.sqrt(e0)
    if abs(alpha - 1.0) < 1e-13:
        alpha = 1.0
    return InitialDatum.from_structured(structured.scaled(alpha), n), alpha


def to_original_time(t_normalized: float, alpha: float) -> float:
    return alpha * t_normalized


# -- level sets ---------------------------------------------------------------

def _merge(intervals):
    out = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def _sampled_zero_set(rho: np.ndarray, eps: float):
    """Eps-band node runs plus sign-change brackets; returns (intervals, crossings).

    ``crossings`` are (j, theta) pairs locating linear-interpolation roots
    between nodes j and j+1.
    """
    n = rho.size
    x = np.arange(n + 1) / n
    intervals = []
    band = np.abs(rho) <= eps
    j = 0
    while j < n:
        if band[j]:
            k = j
            while k + 1 < n and band[k + 1]:
                k += 1
            intervals.append((x[j], x[k]))
            j = k + 1
        else:
            j += 1
    crossings = []
    nxt = np.roll(rho, -1)
    for j in np.nonzero(rho * nxt < 0)[0]:
        if band[j] or band[(j + 1) % n]:
            continue
        theta = rho[j] / (rho[j] - nxt[j])
        crossings.append((int(j), float(theta)))
        intervals.append((x[j], x[j + 1]))
    return _merge(intervals), crossings


def zero_set(datum: InitialDatum, eps: float = 0.0):
    """Intervals of {rho~ = 0} as (a, b) pairs in [0, 1]."""
    if datum.structured is not None:
        s = datum.structured
        b = s.breakpoints
        return _merge([(b[i], b[i + 1]) for i, r in enumerate(s.rho_pieces) if abs(r) <= eps])
    return _sampled_zero_set(datum.rho_tilde.values, eps)[0]


def level_set_measure(datum: InitialDatum, c: float, eps: float = 1e-9) -> float:
    """Lebesgue measure of {u~_x = c} n {rho~ = 0}.

    Structured data are measured exactly, with ``eps`` only absorbing the
    rounding in ``c``.  Sampled data return the eps-band estimate
    (1/n) #{j : |u~_x - c| <= eps and |rho~| <= eps}.
    """
    if datum.structured is not None:
        s = datum.structured
        hit = (np.array(s.rho_pieces) == 0.0) & (np.abs(np.array(s.ux_pieces) - c) <= eps)
        return float(np.sum(s.lengths[hit]))
    ux, rho = datum.u_tilde_x.values, datum.rho_tilde.values
    return float(np.count_nonzero((np.abs(ux - c) <= eps) & (np.abs(rho) <= eps)) / datum.n)


def zero_set_slopes(datum: InitialDatum, eps: float = 0.0) -> np.ndarray:
    """Values of u~_x over {rho~ = 0} (piece values or node/crossing samples)."""
    if datum.structured is not None:
        s = datum.structured
        return np.array([p for p, r in zip(s.ux_pieces, s.rho_pieces) if abs(r) <= eps])
    rho, ux = datum.rho_tilde.values, datum.u_tilde_x.values
    _, crossings = _sampled_zero_set(rho, eps)
    vals = list(ux[np.abs(rho) <= eps])
    for j, theta in crossings:
        vals.append((1 - theta) * ux[j] + theta * ux[(j + 1) % datum.n])
    return np.array(vals)


def breakdown_time(datum: InitialDatum, eps: float = 0.0) -> float:
    """First time the flow map flattens: pi/2 + arctan(min_{rho~=0} u~_x / 2), or inf."""
    slopes = zero_set_slopes(datum, eps)
    if slopes.size == 0:
        return math.inf
    return math.pi / 2 + math.atan(float(slopes.min()) / 2)


# -- fixtures -----------------------------------------------------------------

def datum_stat(n: int = 256) -> InitialDatum:
    grid = PeriodicGrid(n)
    return InitialDatum.from_samples(grid.constant(0.0), grid.constant(2.0))


def datum_smooth(n: int = 256) -> InitialDatum:
    grid = PeriodicGrid(n)
    u = grid.sample(lambda x: np.sin(2 * np.pi * x) / (math.sqrt(2) * np.pi))
    return InitialDatum.from_samples(u, grid.constant(math.sqrt(3.0)))


PW_STRUCTURE = StructuredDatum((0.0, 0.25, 0.5, 1.0), (-2.0, 2.0, 0.0), (0.0, 0.0, 2.0))


def datum_pw(n: int = 256) -> InitialDatum:
    return InitialDatum.from_structured(PW_STRUCTURE, n)


FIXTURES = {"stat": datum_stat, "smooth": datum_smooth, "pw": datum_pw}


# -- files --------------------------------------------------------------------

def datum_to_json(datum: InitialDatum) -> dict:
    if datum.structured is not None:
        s = datum.structured
        return {"structured": {"breakpoints": list(s.breakpoints),
                               "ux": list(s.ux_pieces), "rho": list(s.rho_pieces)}}
    return {"samples": {"n": datum.n, "u": datum.u_tilde.values.tolist(),
                        "rho": datum.rho_tilde.values.tolist()}}


def parse_datum(doc: dict, n: int | None = None, auto_normalize: bool = False):
    """Build a datum from its JSON document; returns ``(datum, alpha)``.

    ``n`` resamples onto another grid (exact for structured files, Fourier
    interpolation for sampled ones).  Unnormalized data are refused unless
    ``auto_normalize`` is set.
    """
    if "structured" in doc:
        body = doc["structured"]
        try:
            s = StructuredDatum(body["breakpoints"], body["ux"], body["rho"])
        except KeyError as e:
            raise DatumError(f"structured datum missing key {e}") from None
        n = n or 256
        if auto_normalize:
            return normalize_structured(s, n)
        return InitialDatum.from_structured(s, n), 1.0
    if "samples" in doc:
        body = doc["samples"]
        try:
            grid = PeriodicGrid(int(body["n"]))
            u, rho = grid.fn(body["u"]), grid.fn(body["rho"])
            ux = grid.fn(body["ux"]) if "ux" in body else None
        except KeyError as e:
            raise DatumError(f"sampled datum missing key {e}") from None
        except ValueError as e:
            raise DatumError(str(e)) from None
        if auto_normalize:
            datum, alpha = normalize(u, rho, ux)
        else:
            datum, alpha = InitialDatum.from_samples(u, rho, ux), 1.0
        if n is not None and n != datum.n:
            datum = datum.resample(n)
        return datum, alpha
    raise DatumError("datum file needs a 'samples' or 'structured' object")


def load_datum(path, n: int | None = None, auto_normalize: bool = False):
    with open(Path(path)) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise DatumError(f"datum file is not valid JSON: {e}") from None
    return parse_datum(doc, n=n, auto_normalize=auto_normalize)


def save_datum(datum: InitialDatum, path) -> None:
    with open(Path(path), "w") as fh:
        json.dump(datum_to_json(datum), fh, indent=1)
