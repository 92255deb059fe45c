"""Multichannel modulate-and-integrate front end.

Channel ``i`` produces one sample per period,

    c_i[m] = (1/T) int_{I_m} x(t - Delta_i) s_i(t) dt,

where ``Delta_i`` is the channel's timing offset.  :func:`sample_analytic`
evaluates this exactly through the Fourier-series forward model;
:func:`sample_quadrature` integrates it numerically and serves as an
independent check.  Failed channels are marked missing (NaN plus a mask),
never zero-filled.
"""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .errors import DiracNeedsAnalytic, SupportViolation
from .signal_model import (TWO_PI, FiniteStream, IndexSet, InfiniteStream, evaluate,
                           fourier_series, fourier_series_periods, validate_support)
from .waveforms import MixingMatrix, _columns

REAL_TOL = 1e-12


@dataclass(frozen=True)
class ChannelConfig:
    """Per-channel timing offsets, failed channels and optional noise."""

    offsets: tuple | None = None
    failed: frozenset = frozenset()
    snr_db: float | None = None
    rng_seed: int = 0
    delta_max: float | None = None

    def __post_init__(self):
        if self.offsets is not None:
            object.__setattr__(self, "offsets", tuple(float(o) for o in self.offsets))
        object.__setattr__(self, "failed", frozenset(int(i) for i in self.failed))
        if self.delta_max is not None and self.offsets is not None:
            if max(abs(o) for o in self.offsets) > self.delta_max * (1 + 1e-12):
                raise ValueError("offset exceeds delta_max")

    def offsets_for(self, p: int) -> np.ndarray:
        if self.offsets is None:
            return np.zeros(p)
        if len(self.offsets) != p:
            raise ValueError(f"expected {p} offsets, got {len(self.offsets)}")
        return np.asarray(self.offsets)

    def guard(self) -> float:
        if self.delta_max is not None:
            return self.delta_max
        return max((abs(o) for o in self.offsets), default=0.0) if self.offsets else 0.0

    def validate(self, p: int) -> None:
        if any(i < 0 or i >= p for i in self.failed):
            raise ValueError("failed channel index out of range")
        if len(self.failed) >= p:
            raise ValueError("at least one channel must survive")


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """``p x M`` channel samples; missing entries hold NaN and are flagged in ``missing``."""

    values: np.ndarray
    missing: np.ndarray
    period_T: float
    provenance: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def M(self) -> int:
        return self.values.shape[1]

    @property
    def surviving_channels(self) -> np.ndarray:
        return np.nonzero(~self.missing.any(axis=1))[0]

    def column(self, m: int) -> np.ndarray:
        return self.values[:, m]


def _as_periods(stream):
    if isinstance(stream, FiniteStream):
        return InfiniteStream.from_finite(stream)
    return stream


def _mask(values: np.ndarray, failed) -> tuple:
    values = values.copy()
    missing = np.zeros(values.shape, dtype=bool)
    for i in sorted(failed):
        missing[i, :] = True
    values[missing] = np.nan + 1j * np.nan
    return values, missing


def sample_analytic(stream, S: MixingMatrix, kset: IndexSet | None = None,
                    config: ChannelConfig | None = None) -> SampleMatrix:
    """Exact channel samples ``c[m] = S_tilde x[m]`` for every period.

    ``S_tilde`` carries the channel offset phases and every out-of-set column
    that the waveforms contain.

    Raises:
        SupportViolation: a pulse crosses into the offset guard band.
    """
    config = config or ChannelConfig()
    if kset is not None and kset != S.kset:
        raise ValueError("index set does not match the mixing matrix")
    stream = _as_periods(stream)
    config.validate(S.p)
    report = validate_support(stream, config.guard())
    if not report.ok:
        raise SupportViolation(f"pulses outside [Dmax, T - Dmax): {report.offenders}")
    offsets = config.offsets_for(S.p)
    St = S.with_offsets(offsets) if np.any(offsets) else S
    x = fourier_series_periods(stream, S.ext_indices)
    values, missing = _mask(St.extended @ x, config.failed)
    c = SampleMatrix(values, missing, stream.period_T,
                     {"source": "analytic", "mixing": S.provenance})
    if config.snr_db is not None:
        c = add_noise(c, config.snr_db, config.rng_seed)
    return c


def _simpson_segments(f, edges, n_total):
    """Composite Simpson over consecutive segments; returns (value, coarse value)."""
    span = edges[-1] - edges[0]
    fine = coarse = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a <= 0:
            continue
        n = max(16, int(math.ceil(n_total * (b - a) / span / 4)) * 4)
        t = np.linspace(a, b, n + 1)
        # pulse edges sit on segment ends: evaluate the pulse from inside the segment
        nudge = 1e-13 * span
        y = f(t, np.clip(t, a + nudge, b - nudge))
        fine = fine + simpson(y, x=t, axis=0)
        coarse = coarse + simpson(y[::2], x=t[::2], axis=0)
    return fine, coarse


def sample_quadrature(stream, spec, config: ChannelConfig | None = None,
                      points_per_period: int = 2 ** 14, method: str = "auto") -> SampleMatrix:
    """Numerically integrate each channel's product ``x(t) s_i(t + Delta_i)`` per period.

    Each period is split at the pulse support edges and integrated with
    composite Simpson on every smooth piece; a half-resolution pass gives the
    Richardson error estimate stored in the provenance.  Dirac streams use
    the sifting property (``method="auto"`` or ``"sifting"``).

    Raises:
        DiracNeedsAnalytic: ``method="grid"`` was requested for a Dirac stream.
    """
    config = config or ChannelConfig()
    stream = _as_periods(stream)
    p = spec.p
    config.validate(p)
    T = stream.period_T
    offsets = config.offsets_for(p)
    _, ext, idx = _columns(spec)
    dirac = stream.pulse.is_dirac
    if method == "grid" and dirac:
        raise DiracNeedsAnalytic("Dirac streams have no grid integrand")
    if method not in ("auto", "grid", "sifting"):
        raise ValueError(f"unknown method {method!r}")
    use_sifting = dirac or method == "sifting"

    # s_i(t + Delta_i) = sum_k ext[i, k] exp(-j 2 pi k Delta_i / T) exp(-j 2 pi k t / T)
    shifted = ext * np.exp(-1j * TWO_PI * np.mod(np.outer(offsets / T, idx), 1.0))

    def waves(t):
        ph = np.exp(-1j * TWO_PI * np.mod(np.multiply.outer(np.asarray(t) / T, idx), 1.0))
        return ph @ shifted.T

    out = np.empty((p, stream.M), dtype=complex)
    rich = 0.0
    s = stream.pulse.support_halfwidth
    for m in range(stream.M):
        fs = stream.period(m)
        if use_sifting:
            if fs.L == 0:
                out[:, m] = 0.0
                continue
            out[:, m] = fs.amplitudes @ waves(fs.delays) / T
            continue
        edges = np.unique(np.clip(np.concatenate(([0.0, T], fs.delays - s, fs.delays + s)), 0, T))
        fine, coarse = _simpson_segments(
            lambda t, ti: evaluate(fs, ti)[:, None] * waves(t) / T, edges, points_per_period)
        out[:, m] = fine
        rich = max(rich, float(np.max(np.abs(fine - coarse))) / 15.0)
    values, missing = _mask(out, config.failed)
    prov = {"source": "sifting" if use_sifting else "quadrature",
            "points_per_period": points_per_period, "richardson_error": rich}
    c = SampleMatrix(values, missing, T, prov)
    if config.snr_db is not None:
        c = add_noise(c, config.snr_db, config.rng_seed)
    return c


def _period_rng(seed: int, m: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(m,)))


def add_noise(c: SampleMatrix, snr_db: float | None, rng_seed: int = 0) -> SampleMatrix:
    """Add white Gaussian noise at ``snr_db`` relative to the mean sample energy.

    Noise is circular complex, or real when every surviving sample is real.
    Each period draws from its own seeded stream so columns are reproducible
    independently of processing order.
    """
    if snr_db is None or snr_db == math.inf:
        return c
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite or +inf")
    ok = ~c.missing
    live = c.values[ok]
    energy = float(np.mean(np.abs(live) ** 2)) if live.size else 0.0
    var = energy / 10.0 ** (snr_db / 10.0)
    scale = max(float(np.max(np.abs(live))), 1e-300) if live.size else 1.0
    real = bool(np.all(np.abs(live.imag) <= REAL_TOL * scale))
    noise = np.empty(c.values.shape, dtype=complex)
    for m in range(c.M):
        g = _period_rng(rng_seed, m)
        if real:
            noise[:, m] = math.sqrt(var) * g.standard_normal(c.p)
        else:
            z = g.standard_normal((2, c.p))
            noise[:, m] = math.sqrt(var / 2) * (z[0] + 1j * z[1])
    values = c.values + np.where(ok, noise, 0.0)
    prov = dict(c.provenance, snr_db=snr_db, noise_seed=rng_seed,
                noise_model="real" if real else "complex-circular")
    return SampleMatrix(values, c.missing.copy(), c.period_T, prov)


def sample_sos_single_channel(stream: FiniteStream, b, p: int,
                              kset: IndexSet | None = None) -> np.ndarray:
    """Samples of a periodic stream filtered by the SoS kernel and taken every ``T/p``.

    ``c[n] = sum_k b_k X[k] exp(j 2 pi k n / p)`` for ``n = 0..p-1``.
    """
    b = np.asarray(b, dtype=complex)
    kset = kset or IndexSet.symmetric(b.size)
    X = fourier_series(stream, kset.indices)
    n = np.arange(p)
    return np.exp(1j * TWO_PI * np.mod(np.outer(n, kset.indices), p) / p) @ (b * X)


def spec_hash(obj) -> str:
    return hashlib.sha256(repr(obj).encode()).hexdigest()[:16]


def write_samples_csv(path, c: SampleMatrix, header: dict | None = None) -> None:
    """Rows ``period_index, channel_index, re, im, missing_flag`` after ``#`` header lines."""
    meta = dict(c.provenance)
    meta.setdefault("period_T", c.period_T)
    meta.update(header or {})
    with open(path, "w", newline="") as fh:
        for k in sorted(meta):
            fh.write(f"# {k}={meta[k]}\n")
        w = csv.writer(fh)
        w.writerow(["period_index", "channel_index", "re", "im", "missing_flag"])
        for m in range(c.M):
            for i in range(c.p):
                v = c.values[i, m]
                miss = bool(c.missing[i, m])
                w.writerow([m, i, "nan" if miss else repr(float(v.real)),
                            "nan" if miss else repr(float(v.imag)), int(miss)])


def read_samples_csv(path) -> SampleMatrix:
    meta = {}
    rows = []
    with open(path, newline="") as fh:
        lines = [ln for ln in fh]
    body = []
    for ln in lines:
        if ln.startswith("#"):
            k, _, v = ln[1:].strip().partition("=")
            meta[k] = v
        else:
            body.append(ln)
    reader = csv.DictReader(body)
    for r in reader:
        rows.append(r)
    p = 1 + max(int(r["channel_index"]) for r in rows)
    M = 1 + max(int(r["period_index"]) for r in rows)
    vals = np.full((p, M), np.nan + 1j * np.nan)
    miss = np.zeros((p, M), dtype=bool)
    for r in rows:
        i, m = int(r["channel_index"]), int(r["period_index"])
        if int(r["missing_flag"]):
            miss[i, m] = True
        else:
            vals[i, m] = float(r["re"]) + 1j * float(r["im"])
    return SampleMatrix(vals, miss, float(meta.get("period_T", 1.0)), meta)
