"""Shaping-filter frequency responses.

The shaping filter g(t) keeps the Fourier-series coefficients of a periodic
waveform on the index set and rejects the others.  Only its values on the
grid ``2 pi k / T`` matter.  Three families are provided: an ideal on-grid
brick wall, analog Chebyshev type I lowpass filters and the Sum-of-Sincs
(SoS) filter.
"""
from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass

import numpy as np

from .signal_model import TWO_PI, IndexSet


@dataclass(frozen=True, eq=False)
class IdealOnGrid:
    """Passes the grid points of ``kset``, blocks every other grid point.

    Between grid points the response tapers linearly over one grid step
    (a transition band of width ``2 pi / T``).
    """

    kset: IndexSet
    T: float

    def response(self, omega) -> np.ndarray:
        u = np.asarray(omega, dtype=float) * self.T / TWO_PI
        lo, hi = self.kset.start, self.kset.start + self.kset.K - 1
        below = np.clip(1.0 - (lo - u), 0.0, 1.0)
        above = np.clip(1.0 - (u - hi), 0.0, 1.0)
        return np.minimum(below, above).astype(complex)


@dataclass(frozen=True, eq=False)
class ChebyshevI:
    """Analog Chebyshev type I lowpass; ``cutoff`` is the ripple-band edge in rad/s."""

    order: int
    ripple_db: float
    cutoff: float

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise ValueError("order must be an integer >= 1")
        if not self.ripple_db > 0:
            raise ValueError("ripple must be positive")
        if not self.cutoff > 0:
            raise ValueError("cutoff must be positive")

    @property
    def epsilon(self) -> float:
        return float(np.sqrt(10.0 ** (self.ripple_db / 10.0) - 1.0))

    @functools.cached_property
    def poles(self) -> np.ndarray:
        """Normalised prototype poles (cutoff at 1 rad/s)."""
        n = self.order
        mu = np.arcsinh(1.0 / self.epsilon) / n
        theta = np.pi * (2 * np.arange(1, n + 1) - 1) / (2 * n)
        p = -np.sinh(mu) * np.sin(theta) + 1j * np.cosh(mu) * np.cos(theta)
        p.setflags(write=False)
        return p

    @functools.cached_property
    def gain(self) -> float:
        k = np.real(np.prod(-self.poles))
        if self.order % 2 == 0:
            k /= np.sqrt(1.0 + self.epsilon ** 2)
        return float(k)

    def response(self, omega) -> np.ndarray:
        s = 1j * np.asarray(omega, dtype=float) / self.cutoff
        den = np.ones(s.shape, dtype=complex)
        for p in self.poles:
            den = den * (s - p)
        return self.gain / den


@dataclass(frozen=True, eq=False)
class SoSFilter:
    """Sum-of-Sincs filter, ``g(t) = rect(t/T) sum_k b_k exp(j 2 pi k t / T)``."""

    b: np.ndarray
    kset: IndexSet
    T: float

    def __post_init__(self):
        b = np.asarray(self.b, dtype=complex).copy()
        if b.shape != (self.kset.K,):
            raise ValueError("need one coefficient per index")
        if np.any(b == 0):
            raise ValueError("SoS coefficients must be nonzero")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)

    def response(self, omega) -> np.ndarray:
        u = np.asarray(omega, dtype=float) * self.T / TWO_PI
        return self.T * (np.sinc(np.subtract.outer(u, self.kset.indices)) @ self.b)


FilterSpec = IdealOnGrid | ChebyshevI | SoSFilter


def freq_response(filt: FilterSpec, omega) -> np.ndarray:
    """Complex frequency response ``G(omega)``."""
    return filt.response(omega)


def chebyshev_magnitude(order: int, ripple_db: float, cutoff: float, omega) -> np.ndarray:
    """Closed-form ``|G| = 1/sqrt(1 + eps^2 T_n(omega/cutoff)^2)``."""
    eps2 = 10.0 ** (ripple_db / 10.0) - 1.0
    x = np.abs(np.asarray(omega, dtype=float)) / cutoff
    Tn = np.where(x <= 1.0,
                  np.cos(order * np.arccos(np.minimum(x, 1.0))),
                  np.cosh(order * np.arccosh(np.maximum(x, 1.0))))
    return 1.0 / np.sqrt(1.0 + eps2 * Tn ** 2)


@dataclass
class GridResponse:
    indices: np.ndarray
    values: np.ndarray
    in_band: np.ndarray
    passband_ok: bool
    max_leakage: float
    min_passband: float

    @property
    def satisfies_filter_condition(self) -> bool:
        """True when nonzero on the index set and exactly zero elsewhere."""
        return self.passband_ok and self.max_leakage == 0.0


def grid_response(filt: FilterSpec, kset: IndexSet, T: float, extent: int | None = None,
                  zero_tol: float = 1e-12) -> GridResponse:
    """Sample the response on ``2 pi k / T`` for ``|k| <= extent``."""
    kmax = int(np.max(np.abs(kset.indices)))
    if extent is None:
        extent = max(4 * (kset.K // 2), kmax)
    if extent < kmax:
        raise ValueError("extent must cover the index set")
    k = np.arange(-extent, extent + 1)
    g = freq_response(filt, TWO_PI * k / T)
    in_band = (k >= kset.start) & (k < kset.start + kset.K)
    mag = np.abs(g)
    peak = float(np.max(mag[in_band]))
    min_pass = float(np.min(mag[in_band]))
    leak = float(np.max(mag[~in_band])) if np.any(~in_band) else 0.0
    return GridResponse(k, g, in_band, min_pass > zero_tol * max(peak, 1e-300), leak, min_pass)


def sos_time_value(b, t, T: float, kset: IndexSet | None = None) -> np.ndarray:
    """Time-domain SoS filter value; zero for ``|t| > T/2``."""
    b = np.asarray(b, dtype=complex)
    if kset is None:
        kset = IndexSet.symmetric(b.size)
    t = np.asarray(t, dtype=float)
    vals = np.exp(1j * TWO_PI * np.multiply.outer(t / T, kset.indices)) @ b
    return np.where(np.abs(t) <= 0.5 * T, vals, 0.0)


def write_response_csv(path, filt: FilterSpec, omega) -> None:
    """Dump ``omega, magnitude_db, phase`` rows."""
    omega = np.asarray(omega, dtype=float)
    g = freq_response(filt, omega)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega", "magnitude_db", "phase"])
        for om, val in zip(omega, g):
            mag = float(abs(val))
            w.writerow([repr(float(om)), repr(20 * math.log10(mag) if mag > 0 else -math.inf),
                        repr(float(np.angle(val)))])
