"""Discrete calculus on the unit circle S = R/Z.

Functions live on the uniform grid x_j = j/n, j = 0..n-1.  Quadrature is the
periodic trapezoid rule, derivatives use Fourier collocation, and cumulative
integrals come in two flavours: the composite trapezoid (robust for
piecewise data) and a spectral antiderivative (exact for trigonometric
polynomials, used wherever smooth data need more than second order).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MEAN_ZERO_TOL = 1e-10


@dataclass(frozen=True)
class PeriodicGrid:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ValueError(f"grid size must be an even integer >= 8, got {self.n}")

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n) / self.n

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def fn(self, values) -> PeriodicGridFn:
        return PeriodicGridFn(self, values)

    def sample(self, func) -> PeriodicGridFn:
        """Evaluate a vectorised callable at the grid nodes."""
        return PeriodicGridFn(self, np.broadcast_to(func(self.x), (self.n,)))

    def constant(self, c: float) -> PeriodicGridFn:
        return PeriodicGridFn(self, np.full(self.n, float(c)))


@dataclass(frozen=True, eq=False)
class PeriodicGridFn:
    """Samples of a real function on a :class:`PeriodicGrid`.

    The value array is copied and frozen on construction.
    """

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def __len__(self):
        return self.grid.n

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def with_values(self, values) -> PeriodicGridFn:
        return PeriodicGridFn(self.grid, values)


def _wavenumbers(n: int) -> np.ndarray:
    k = 2j * np.pi * np.fft.fftfreq(n, d=1.0 / n)
    k[n // 2] = 0.0  # Nyquist mode has no real derivative
    return k


def _trapz_cumulative(v: np.ndarray) -> np.ndarray:
    n = v.size
    out = np.empty(n)
    out[0] = 0.0
    out[1:] = np.cumsum(0.5 * (v[:-1] + v[1:])) / n
    return out


def _spectral_cumulative(v: np.ndarray) -> np.ndarray:
    n = v.size
    c = np.fft.fft(v)
    mean = c[0].real / n
    k = _wavenumbers(n)
    k[0] = k[n // 2] = 1.0
    c = c / k
    c[0] = c[n // 2] = 0.0
    periodic = np.fft.ifft(c).real
    return mean * (np.arange(n) / n) + periodic - periodic[0]


def integrate(f: PeriodicGridFn) -> float:
    """Periodic trapezoid rule, (1/n) sum f(x_j)."""
    return float(np.mean(f.values))


def cumulative_integral(f: PeriodicGridFn, method: str = "trapezoid") -> PeriodicGridFn:
    """F(x_j) = int_0^{x_j} f dy with F(x_0) = 0.

    ``method="trapezoid"`` is the composite trapezoid over the nodes 0..j.
    ``method="spectral"`` integrates the Fourier interpolant of ``f``; it is
    exact for trigonometric polynomials below the Nyquist mode but rings on
    discontinuous data.
    """
    if method == "trapezoid":
        return f.with_values(_trapz_cumulative(f.values))
    if method == "spectral":
        return f.with_values(_spectral_cumulative(f.values))
    raise ValueError(f"unknown cumulative_integral method {method!r}")


def derivative(f: PeriodicGridFn, method: str = "spectral") -> PeriodicGridFn:
    """d/dx by Fourier collocation (Nyquist zeroed) or centered differences."""
    v = f.values
    if method == "spectral":
        d = np.fft.ifft(_wavenumbers(v.size) * np.fft.fft(v)).real
    elif method == "centered":
        d = (np.roll(v, -1) - np.roll(v, 1)) * (0.5 * v.size)
    else:
        raise ValueError(f"unknown derivative method {method!r}")
    return f.with_values(d)


def mean_zero_project(f: PeriodicGridFn) -> PeriodicGridFn:
    return f.with_values(f.values - integrate(f))


def l2_norm_sq(f: PeriodicGridFn) -> float:
    return float(np.mean(f.values**2))


def inverse_A(f: PeriodicGridFn, tol: float = MEAN_ZERO_TOL) -> PeriodicGridFn:
    """Invert A = -d^2/dx^2 on mean-zero data with g(0) = g(1) = 0.

    g(x) = -int_0^x int_0^y f dz dy + x int_0^1 int_0^y f dz dy, with both
    cumulative integrals taken spectrally so that -g'' = f holds in the
    collocation sense.
    """
    mean = integrate(f)
    if abs(mean) > tol:
        raise ValueError(
            f"inverse_A needs a mean-zero argument (mean = {mean:.3e}); "
            "apply mean_zero_project first"
        )
    inner = _spectral_cumulative(f.values)
    outer = _spectral_cumulative(inner)
    total = float(np.mean(inner))  # int_0^1 int_0^y f dz dy
    return f.with_values(-outer + f.x * total)
