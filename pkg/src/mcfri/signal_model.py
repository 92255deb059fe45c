"""Pulse streams and their Fourier-series coefficients.

A finite stream is ``x(t) = sum_l a_l h(t - t_l)`` confined to one period
``[0, T)``.  Its Fourier-series coefficients on an index set of consecutive
integers are available in closed form::

    X[k] = (1/T) H(2 pi k / T) sum_l a_l exp(-j 2 pi k t_l / T)

which is the forward model every other module builds on.  Pulses are
described relative to their centre, so ``h(t - t_l)`` occupies
``[t_l - s, t_l + s]`` where ``s`` is the support half-width.
"""
from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DiracNotEvaluable, SupportViolation, ZeroCTFTOnGrid

TWO_PI = 2.0 * np.pi

# relative threshold below which a CTFT value on the grid counts as zero
CTFT_ZERO_TOL = 1e-10

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


@functools.lru_cache(maxsize=256)
def _truncated_gaussian_ctft(sigma: float, halfwidth: float, omegas: tuple) -> np.ndarray:
    # composite Gauss-Legendre over [-c, c]; the integrand is even so only the
    # cosine part survives
    n_panels = max(8, int(np.ceil(halfwidth / sigma)) * 2)
    edges = np.linspace(-halfwidth, halfwidth, n_panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    t = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    g = w * np.exp(-0.5 * (t / sigma) ** 2)
    om = np.asarray(omegas, dtype=float)
    vals = np.cos(np.outer(om, t)) @ g
    vals.setflags(write=False)
    return vals


@dataclass(frozen=True)
class PulseShape:
    """Known pulse ``h(t)``, centred at ``t = 0``.

    Use the constructors :meth:`dirac`, :meth:`rectangle`, :meth:`gaussian`
    and :meth:`tabulated` rather than building instances by hand.
    """

    kind: str
    width: float = 0.0
    sigma: float = 0.0
    truncation_halfwidth: float = 0.0
    samples: tuple = ()
    step: float = 0.0

    def __post_init__(self):
        if self.kind not in ("dirac", "rectangle", "gaussian", "tabulated"):
            raise ValueError(f"unknown pulse kind {self.kind!r}")
        if self.kind == "rectangle" and not self.width > 0:
            raise ValueError("rectangle width must be positive")
        if self.kind == "gaussian" and not (self.sigma > 0 and self.truncation_halfwidth > 0):
            raise ValueError("gaussian needs positive sigma and truncation half-width")
        if self.kind == "tabulated" and not (len(self.samples) > 0 and self.step > 0):
            raise ValueError("tabulated pulse needs samples and a positive step")

    @classmethod
    def dirac(cls) -> "PulseShape":
        return cls("dirac")

    @classmethod
    def rectangle(cls, width: float) -> "PulseShape":
        return cls("rectangle", width=float(width))

    @classmethod
    def gaussian(cls, sigma: float, truncation_halfwidth: float | None = None) -> "PulseShape":
        if truncation_halfwidth is None:
            truncation_halfwidth = 6.0 * sigma
        return cls("gaussian", sigma=float(sigma), truncation_halfwidth=float(truncation_halfwidth))

    @classmethod
    def tabulated(cls, samples: Sequence[float], step: float) -> "PulseShape":
        """Piecewise-linear pulse through ``samples`` spaced ``step`` apart.

        The grid is centred on zero and the pulse is zero one step beyond
        either end (hat-function interpolation).
        """
        return cls("tabulated", samples=tuple(float(s) for s in samples), step=float(step))

    @property
    def is_dirac(self) -> bool:
        return self.kind == "dirac"

    def _tab_grid(self) -> np.ndarray:
        n = len(self.samples)
        return (np.arange(n) - 0.5 * (n - 1)) * self.step

    @property
    def support_halfwidth(self) -> float:
        if self.kind == "dirac":
            return 0.0
        if self.kind == "rectangle":
            return 0.5 * self.width
        if self.kind == "gaussian":
            return self.truncation_halfwidth
        vals = np.asarray(self.samples)
        nz = np.nonzero(vals)[0]
        if nz.size == 0:
            return 0.0
        return float(np.max(np.abs(self._tab_grid()[nz]))) + self.step

    def __call__(self, t) -> np.ndarray:
        """Pointwise value ``h(t)``."""
        t = np.asarray(t, dtype=float)
        if self.kind == "dirac":
            raise DiracNotEvaluable("a Dirac pulse has no pointwise value")
        if self.kind == "rectangle":
            return np.where(np.abs(t) <= 0.5 * self.width, 1.0, 0.0)
        if self.kind == "gaussian":
            return np.where(np.abs(t) <= self.truncation_halfwidth,
                            np.exp(-0.5 * (t / self.sigma) ** 2), 0.0)
        grid = self._tab_grid()
        xs = np.concatenate(([grid[0] - self.step], grid, [grid[-1] + self.step]))
        ys = np.concatenate(([0.0], self.samples, [0.0]))
        return np.interp(t, xs, ys, left=0.0, right=0.0)

    def ctft(self, omega) -> np.ndarray:
        """Continuous-time Fourier transform ``H(omega)``."""
        omega = np.asarray(omega, dtype=float)
        if self.kind == "dirac":
            return np.ones(omega.shape, dtype=complex)
        if self.kind == "rectangle":
            return (self.width * np.sinc(omega * self.width / TWO_PI)).astype(complex)
        if self.kind == "gaussian":
            flat = tuple(float(w) for w in omega.ravel())
            vals = _truncated_gaussian_ctft(self.sigma, self.truncation_halfwidth, flat)
            return vals.reshape(omega.shape).astype(complex)
        grid = self._tab_grid()
        hat = self.step * np.sinc(omega * self.step / TWO_PI) ** 2
        phase = np.exp(-1j * np.multiply.outer(omega, grid))
        return hat * (phase @ np.asarray(self.samples))

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "rectangle":
            d["width"] = self.width
        elif self.kind == "gaussian":
            d["sigma"] = self.sigma
            d["truncation_halfwidth"] = self.truncation_halfwidth
        elif self.kind == "tabulated":
            d["samples"] = list(self.samples)
            d["step"] = self.step
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PulseShape":
        kind = d["kind"]
        if kind == "dirac":
            return cls.dirac()
        if kind == "rectangle":
            return cls.rectangle(d["width"])
        if kind == "gaussian":
            return cls.gaussian(d["sigma"], d.get("truncation_halfwidth"))
        if kind == "tabulated":
            return cls.tabulated(d["samples"], d["step"])
        raise ValueError(f"unknown pulse kind {kind!r}")


def _as_delays_amps(delays, amplitudes):
    delays = np.atleast_1d(np.asarray(delays, dtype=float)).copy()
    amplitudes = np.atleast_1d(np.asarray(amplitudes, dtype=complex)).copy()
    if delays.shape != amplitudes.shape or delays.ndim != 1:
        raise ValueError("delays and amplitudes must be 1-D arrays of equal length")
    delays.setflags(write=False)
    amplitudes.setflags(write=False)
    return delays, amplitudes


def _check_delays(delays: np.ndarray, T: float):
    if np.any(delays < 0) or np.any(delays >= T):
        raise ValueError("delays must lie in [0, T)")
    if np.unique(delays).size != delays.size:
        raise ValueError("delays must be distinct")


@dataclass(frozen=True, eq=False)
class FiniteStream:
    """Pulse stream confined to one period ``[0, T)``."""

    period_T: float
    delays: np.ndarray
    amplitudes: np.ndarray
    pulse: PulseShape = field(default_factory=PulseShape.dirac)

    def __post_init__(self):
        if not self.period_T > 0:
            raise ValueError("period must be positive")
        d, a = _as_delays_amps(self.delays, self.amplitudes)
        _check_delays(d, self.period_T)
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "amplitudes", a)

    @property
    def L(self) -> int:
        return self.delays.size

    def shifted(self, delta: float) -> "FiniteStream":
        return FiniteStream(self.period_T, self.delays + delta, self.amplitudes, self.pulse)


@dataclass(frozen=True, eq=False)
class InfiniteStream:
    """Sequence of periods, each a finite stream with delays relative to the period start."""

    period_T: float
    max_L: int
    periods: tuple
    pulse: PulseShape = field(default_factory=PulseShape.dirac)

    def __post_init__(self):
        cleaned = []
        for delays, amps in self.periods:
            d, a = _as_delays_amps(delays, amps)
            _check_delays(d, self.period_T)
            if d.size > self.max_L:
                raise ValueError(f"period holds {d.size} pulses, more than max_L={self.max_L}")
            cleaned.append((d, a))
        object.__setattr__(self, "periods", tuple(cleaned))

    @property
    def M(self) -> int:
        return len(self.periods)

    def period(self, m: int) -> FiniteStream:
        d, a = self.periods[m]
        return FiniteStream(self.period_T, d, a, self.pulse)

    @classmethod
    def from_finite(cls, stream: FiniteStream, repeats: int = 1) -> "InfiniteStream":
        return cls(stream.period_T, stream.L,
                   tuple((stream.delays, stream.amplitudes) for _ in range(repeats)),
                   stream.pulse)

    @classmethod
    def shift_invariant(cls, T: float, delays, amplitude_rows, pulse=None) -> "InfiniteStream":
        """Common delays in every period; ``amplitude_rows`` is M x L."""
        rows = np.atleast_2d(np.asarray(amplitude_rows, dtype=complex))
        return cls(T, len(delays), tuple((np.asarray(delays, float), r) for r in rows),
                   pulse or PulseShape.dirac())


@dataclass(frozen=True, eq=False)
class IndexSet:
    """``K`` consecutive integers starting at ``start``."""

    start: int
    K: int

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("index set must be nonempty")

    @classmethod
    def symmetric(cls, K: int) -> "IndexSet":
        # odd K: {-K//2..K//2}; even K: {-K/2..K/2-1}
        return cls(-(K // 2), K)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start, self.start + self.K)

    @property
    def is_symmetric(self) -> bool:
        return self.start == -(self.start + self.K - 1)

    def position(self, k: int) -> int:
        return int(k) - self.start

    def __contains__(self, k) -> bool:
        return self.start <= k < self.start + self.K

    def __eq__(self, other):
        return isinstance(other, IndexSet) and (self.start, self.K) == (other.start, other.K)

    def __hash__(self):
        return hash((self.start, self.K))

    def validate(self, pulse: PulseShape, T: float) -> None:
        H = np.abs(pulse.ctft(TWO_PI * self.indices / T))
        scale = max(float(np.max(H)), abs(complex(pulse.ctft(0.0))))
        bad = self.indices[H <= CTFT_ZERO_TOL * scale]
        if bad.size:
            raise ZeroCTFTOnGrid(f"H(2 pi k / T) vanishes for k in {bad.tolist()}")


@dataclass(frozen=True, eq=False)
class FourierVector:
    values: np.ndarray
    kset: IndexSet

    def __getitem__(self, k: int) -> complex:
        return complex(self.values[self.kset.position(k)])


@dataclass
class SupportReport:
    ok: bool
    delta_max: float
    # (period, pulse index, delay, occupied start, occupied end)
    offenders: list

    def __bool__(self):
        return self.ok


def validate_support(stream, delta_max: float = 0.0) -> SupportReport:
    """Check that every pulse lies inside ``[delta_max, T - delta_max)`` of its period."""
    if delta_max < 0:
        raise ValueError("delta_max must be non-negative")
    if isinstance(stream, FiniteStream):
        periods = [(stream.delays, stream.amplitudes)]
    else:
        periods = stream.periods
    T = stream.period_T
    s = stream.pulse.support_halfwidth
    tol = 1e-12 * T
    offenders = []
    for m, (delays, _) in enumerate(periods):
        for l, t in enumerate(delays):
            lo, hi = t - s, t + s
            if stream.pulse.is_dirac:
                bad = lo < delta_max - tol or hi >= T - delta_max
            else:
                bad = lo < delta_max - tol or hi > T - delta_max + tol
            if bad:
                offenders.append((m, l, float(t), float(lo), float(hi)))
    return SupportReport(not offenders, delta_max, offenders)


def _cisoid_sum(indices: np.ndarray, delays: np.ndarray, amps: np.ndarray, T: float) -> np.ndarray:
    # reduce k * t / T modulo 1 before taking the exponential
    frac = np.mod(np.multiply.outer(indices.astype(float), delays / T), 1.0)
    return np.exp(-1j * TWO_PI * frac) @ amps


def fourier_series(stream: FiniteStream, indices) -> np.ndarray:
    """Closed-form Fourier-series coefficients on arbitrary integer indices.

    No support or index-set validation is done; see :func:`fourier_coefficients`.
    """
    indices = np.asarray(indices)
    T = stream.period_T
    H = stream.pulse.ctft(TWO_PI * indices / T)
    return H / T * _cisoid_sum(indices, stream.delays, stream.amplitudes, T)


def fourier_series_periods(stream: InfiniteStream, indices) -> np.ndarray:
    """Coefficients for every period as a ``len(indices) x M`` array."""
    indices = np.asarray(indices)
    T = stream.period_T
    H = stream.pulse.ctft(TWO_PI * indices / T) / T
    out = np.empty((indices.size, stream.M), dtype=complex)
    for m, (d, a) in enumerate(stream.periods):
        out[:, m] = H * _cisoid_sum(indices, d, a, T)
    return out


def fourier_coefficients(stream: FiniteStream, kset: IndexSet) -> FourierVector:
    """Fourier-series coefficients ``X[k]`` for ``k`` in ``kset``.

    Raises:
        SupportViolation: if the stream is not confined to ``[0, T)``.
    """
    report = validate_support(stream)
    if not report.ok:
        raise SupportViolation(f"pulses leave [0, T): {report.offenders}")
    return FourierVector(fourier_series(stream, kset.indices), kset)


def h_matrix(pulse: PulseShape, kset: IndexSet, T: float) -> np.ndarray:
    """Diagonal matrix of ``(1/T) H(2 pi k / T)`` over ``kset``."""
    kset.validate(pulse, T)
    return np.diag(pulse.ctft(TWO_PI * kset.indices / T) / T)


def evaluate(stream: FiniteStream, t) -> np.ndarray:
    """``x(t) = sum_l a_l h(t - t_l)``; zero outside ``[0, T)``."""
    if stream.pulse.is_dirac:
        raise DiracNotEvaluable("Dirac streams have no pointwise value")
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape, dtype=complex)
    for tl, al in zip(stream.delays, stream.amplitudes):
        out += al * stream.pulse(t - tl)
    inside = (t >= 0) & (t < stream.period_T)
    return np.where(inside, out, 0.0)


def stream_to_text(stream) -> str:
    """Serialise a finite or infinite stream to JSON text."""
    if isinstance(stream, FiniteStream):
        periods = [(stream.delays, stream.amplitudes)]
        max_L = stream.L
    else:
        periods = stream.periods
        max_L = stream.max_L
    doc = {
        "period_T": stream.period_T,
        "max_L": max_L,
        "pulse": stream.pulse.to_dict(),
        "periods": [[[float(t), float(a.real), float(a.imag)] for t, a in zip(d, amps)]
                    for d, amps in periods],
    }
    return json.dumps(doc, indent=2)


def stream_from_text(text: str):
    """Inverse of :func:`stream_to_text`; a single period yields a FiniteStream."""
    doc = json.loads(text)
    pulse = PulseShape.from_dict(doc["pulse"])
    T = float(doc["period_T"])
    periods = []
    for rows in doc["periods"]:
        rows = np.asarray(rows, dtype=float).reshape(-1, 3)
        periods.append((rows[:, 0], rows[:, 1] + 1j * rows[:, 2]))
    if len(periods) == 1:
        return FiniteStream(T, periods[0][0], periods[0][1], pulse)
    return InfiniteStream(T, int(doc.get("max_L", max(len(p[0]) for p in periods))),
                          tuple(periods), pulse)
