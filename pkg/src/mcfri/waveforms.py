"""Modulating waveforms and the mixing matrices they induce.

Channel ``i`` multiplies the input by

    s_i(t) = sum_{k in K} s_ik exp(-j 2 pi k t / T)

and integrates over one period, so the channel outputs are ``c = S x`` with
``x`` the Fourier-series coefficients of the input.  Channels are indexed
from 0.

Non-ideal shaping filters let coefficients outside the index set through.
:class:`MixingMatrix` therefore also carries an *extended* matrix whose
columns cover a wider symmetric grid; the sampler uses it for the forward
model while recovery only ever inverts the in-set block.
"""
from __future__ import annotations

import csv
import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (AuditFailed, FilterConditionViolated, PulseOverlap, RankDeficient,
                     ZeroDFTBin)
from .filters import ChebyshevI, FilterSpec, IdealOnGrid, SoSFilter, freq_response
from .signal_model import TWO_PI, IndexSet, PulseShape

RANK_RTOL = 1e-10
DFT_ZERO_TOL = 1e-9


def mirror(kset: IndexSet) -> IndexSet:
    """The index set ``{-k : k in kset}``."""
    return IndexSet(-(kset.start + kset.K - 1), kset.K)


def default_extent(kset: IndexSet) -> int:
    return max(4 * (kset.K // 2), int(np.max(np.abs(kset.indices))))


@dataclass(frozen=True, eq=False)
class Direct:
    """One complex exponential per channel; ``S`` is the identity."""

    kset: IndexSet
    T: float = 1.0

    @property
    def p(self) -> int:
        return self.kset.K


@dataclass(frozen=True, eq=False)
class CosSin:
    """Cosine and sine tones plus a constant channel.

    For odd ``K`` the channels are ``cos(2 pi k t/T)`` for ``k = 1..K//2``,
    then ``sin`` for the same ``k``, then the constant 1.  For even ``K``
    (index set ``-K/2..K/2-1``) the unpaired edge index ``-K/2`` gets its own
    complex tone in the last channel.
    """

    kset: IndexSet
    T: float = 1.0

    def __post_init__(self):
        K = self.kset.K
        if self.kset != IndexSet.symmetric(K):
            raise ValueError("CosSin needs the default symmetric index set")

    @property
    def p(self) -> int:
        return self.kset.K


@dataclass(frozen=True, eq=False)
class PulseSequence:
    """Filtered periodic pulse trains ``sum_n alpha_i[n] p(t - nT/N)``.

    ``base_pulse`` is placed so it starts at ``t = 0`` (a centred pulse of
    half-width ``s`` is delayed by ``s``).  ``shaping_filter`` defaults to the
    ideal on-grid filter passing the mirrored index set.
    """

    kset: IndexSet
    alpha: np.ndarray
    base_pulse: PulseShape | None = None
    shaping_filter: FilterSpec | None = None
    T: float = 1.0
    extent: int | None = None

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.alpha, dtype=float)).copy()
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)
        if self.base_pulse is None:
            object.__setattr__(self, "base_pulse", PulseShape.rectangle(self.T / self.N))
        if self.shaping_filter is None:
            object.__setattr__(self, "shaping_filter", IdealOnGrid(mirror(self.kset), self.T))
        if self.extent is None:
            object.__setattr__(self, "extent", default_extent(self.kset))

    @property
    def p(self) -> int:
        return self.alpha.shape[0]

    @property
    def N(self) -> int:
        return self.alpha.shape[1]

    def base_ctft(self, omega) -> np.ndarray:
        s = self.base_pulse.support_halfwidth
        omega = np.asarray(omega, dtype=float)
        return self.base_pulse.ctft(omega) * np.exp(-1j * omega * s)

    def check_overlap(self) -> None:
        if 2 * self.base_pulse.support_halfwidth > self.T / self.N * (1 + 1e-12):
            raise PulseOverlap("base pulse is wider than T/N")


@dataclass(frozen=True, eq=False)
class SoSDelayed:
    """Channel ``i`` uses the periodic SoS filter reflected and delayed by ``iT/p``."""

    kset: IndexSet
    b: np.ndarray
    n_channels: int
    T: float = 1.0

    def __post_init__(self):
        b = np.asarray(self.b, dtype=complex).copy()
        if b.shape != (self.kset.K,):
            raise ValueError("need one SoS coefficient per index")
        if np.any(b == 0):
            raise ValueError("SoS coefficients must be nonzero")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)

    @property
    def p(self) -> int:
        return self.n_channels


MixingSpec = Direct | CosSin | PulseSequence | SoSDelayed


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    entries: np.ndarray
    kset: IndexSet
    T: float
    extended: np.ndarray
    ext_indices: np.ndarray
    provenance: str = ""
    spec: object = field(default=None, repr=False)

    @property
    def p(self) -> int:
        return self.entries.shape[0]

    @functools.cached_property
    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.entries, compute_uv=False)

    @property
    def rank(self) -> int:
        s = self.singular_values
        return int(np.sum(s > RANK_RTOL * s[0])) if s.size and s[0] > 0 else 0

    @property
    def condition_number(self) -> float:
        s = self.singular_values
        return float(s[0] / s[-1]) if s[-1] > 0 else math.inf

    @property
    def is_left_invertible(self) -> bool:
        return self.rank == self.kset.K

    def with_offsets(self, offsets) -> "MixingMatrix":
        """Effective matrix ``s_ik exp(-j 2 pi k Delta_i / T)`` for channel offsets."""
        d = np.asarray(offsets, dtype=float)[:, None] / self.T
        ent = self.entries * np.exp(-1j * TWO_PI * d * self.kset.indices[None, :])
        ext = self.extended * np.exp(-1j * TWO_PI * d * self.ext_indices[None, :])
        return MixingMatrix(ent, self.kset, self.T, ext, self.ext_indices,
                            self.provenance + "+offsets", self.spec)


def is_left_invertible(M: np.ndarray, rtol: float = RANK_RTOL) -> bool:
    s = np.linalg.svd(M, compute_uv=False)
    return bool(s.size and s[0] > 0 and s[-1] > rtol * s[0] and M.shape[0] >= M.shape[1])


def pulse_sequence_coeffs(spec: PulseSequence, channel: int, indices=None):
    """Fourier-series coefficients of one channel's pulse train, before and after filtering.

    Returns:
        ``(indices, d, d_filtered)`` where ``d[k] = (1/T) P(2 pi k/T)
        sum_n alpha[n] exp(-j 2 pi k n / N)`` and ``d_filtered = d G(2 pi k/T)``.
    """
    spec.check_overlap()
    if indices is None:
        indices = spec.kset.indices
    indices = np.asarray(indices)
    om = TWO_PI * indices / spec.T
    n = np.arange(spec.N)
    dft = np.exp(-1j * TWO_PI * np.mod(np.outer(indices, n), spec.N) / spec.N) @ spec.alpha[channel]
    d = spec.base_ctft(om) / spec.T * dft
    return indices, d, d * freq_response(spec.shaping_filter, om)


def _ext_embed(kset: IndexSet, S: np.ndarray, ext_indices: np.ndarray) -> np.ndarray:
    ext = np.zeros((S.shape[0], ext_indices.size), dtype=complex)
    ext[:, kset.indices - ext_indices[0]] = S
    return ext


@functools.lru_cache(maxsize=128)
def _columns(spec) -> tuple:
    """(in-set block, extended block, extended indices) without rank checks."""
    kset, T = spec.kset, spec.T
    k = kset.indices
    if isinstance(spec, Direct):
        S = np.eye(kset.K, dtype=complex)
        E = default_extent(kset)
    elif isinstance(spec, CosSin):
        K = kset.K
        S = np.zeros((K, K), dtype=complex)
        h = (K - 1) // 2
        col = kset.position
        for r, kk in enumerate(range(1, h + 1)):
            S[r, col(kk)] = S[r, col(-kk)] = 0.5
            S[h + r, col(kk)] = 0.5j
            S[h + r, col(-kk)] = -0.5j
        S[2 * h, col(0)] = 1.0
        if K % 2 == 0:
            S[K - 1, col(-(K // 2))] = 1.0
        E = default_extent(kset)
    elif isinstance(spec, SoSDelayed):
        i = np.arange(spec.p)
        S = np.exp(1j * TWO_PI * np.mod(np.outer(i, k), spec.p) / spec.p) * spec.b[None, :]
        E = default_extent(kset)
    elif isinstance(spec, PulseSequence):
        E = spec.extent
        ext_idx = np.arange(-E, E + 1)
        ext = np.empty((spec.p, ext_idx.size), dtype=complex)
        for i in range(spec.p):
            # column for index k holds d_filtered[-k]
            _, _, dt = pulse_sequence_coeffs(spec, i, -ext_idx)
            ext[i] = dt
        S = ext[:, k - ext_idx[0]]
        return S, ext, ext_idx
    else:
        raise TypeError(f"unknown mixing spec {type(spec).__name__}")
    ext_idx = np.arange(-E, E + 1)
    return S, _ext_embed(kset, S, ext_idx), ext_idx


def build_mixing_matrix(spec: MixingSpec) -> MixingMatrix:
    """Mixing matrix ``S`` (p x K) of a waveform family.

    Raises:
        RankDeficient: ``S`` is not left invertible.
        FilterConditionViolated: the shaping filter vanishes on a needed grid point.
        PulseOverlap: the pulse-sequence base pulse is wider than ``T/N``.
    """
    if spec.p < spec.kset.K:
        raise RankDeficient(f"p={spec.p} channels cannot resolve K={spec.kset.K} coefficients")
    if isinstance(spec, PulseSequence):
        spec.check_overlap()
        kp = -spec.kset.indices
        G = np.abs(freq_response(spec.shaping_filter, TWO_PI * kp / spec.T))
        if np.any(G <= 1e-12 * max(float(G.max()), 1e-300)):
            raise FilterConditionViolated(
                f"shaping filter vanishes at k in {kp[G <= 1e-12 * G.max()].tolist()}")
    S, ext, ext_idx = _columns(spec)
    M = MixingMatrix(S.copy(), spec.kset, spec.T, ext.copy(), ext_idx.copy(),
                     type(spec).__name__, spec)
    if not M.is_left_invertible:
        raise RankDeficient(f"{type(spec).__name__} mixing matrix has rank {M.rank} < {spec.kset.K}")
    return M


def waveform_value(spec: MixingSpec, channel: int, t) -> np.ndarray:
    """``s_i(t)``, including any out-of-set terms a non-ideal filter lets through."""
    _, ext, idx = _columns(spec)
    if not 0 <= channel < ext.shape[0]:
        raise IndexError("channel out of range")
    t = np.asarray(t, dtype=float)
    frac = np.mod(np.multiply.outer(t / spec.T, idx), 1.0)
    return np.exp(-1j * TWO_PI * frac) @ ext[channel]


def decompose_awphi(spec: PulseSequence):
    """Factor a pulse-sequence mixing matrix as ``S = A W Phi``.

    ``A`` holds the sign sequences, ``W[n, j] = exp(-j 2 pi k'_j n / N)`` and
    ``Phi`` is diagonal with ``(1/T) P(2 pi k'/T) G(2 pi k'/T)`` where
    ``k'_j = -k_j``.
    """
    spec.check_overlap()
    kp = -spec.kset.indices
    n = np.arange(spec.N)
    A = np.array(spec.alpha)
    W = np.exp(-1j * TWO_PI * np.mod(np.outer(n, kp), spec.N) / spec.N)
    om = TWO_PI * kp / spec.T
    Phi = np.diag(spec.base_ctft(om) * freq_response(spec.shaping_filter, om) / spec.T)
    return A, W, Phi


def circulant_dft(base) -> np.ndarray:
    return np.fft.fft(np.asarray(base, dtype=float))


def circulant_condition(base) -> float:
    """Condition number of the circulant built from ``base`` via its DFT."""
    mag = np.abs(circulant_dft(base))
    return float(mag.max() / mag.min()) if mag.min() > 0 else math.inf


def cyclic_generator(base, p: int | None = None) -> np.ndarray:
    """Circulant sequence matrix with row ``i`` equal to ``base[(n - i) mod N]``.

    Raises:
        ZeroDFTBin: the DFT of ``base`` has a zero bin (matrix singular).
    """
    base = np.asarray(base, dtype=float)
    N = base.size
    if p is not None and p != N:
        raise ValueError("single-generator layout needs p == N")
    mag = np.abs(circulant_dft(base))
    if mag.min() <= DFT_ZERO_TOL * max(mag.max(), 1e-300):
        raise ZeroDFTBin(f"DFT bins {np.nonzero(mag <= DFT_ZERO_TOL * mag.max())[0].tolist()} are zero")
    return delayed_rows(base, N)


def delayed_rows(base, count: int) -> np.ndarray:
    """Rows ``base[(n - i) mod N]`` for ``i = 0..count-1`` (no invertibility check)."""
    base = np.asarray(base, dtype=float)
    N = base.size
    n = np.arange(N)
    return np.stack([base[(n - i) % N] for i in range(count)])


def draw_pm1_sequence(N: int, seed: int, max_tries: int = 10_000):
    """Random +-1 sequence whose DFT has no zero bin.

    Candidate seeds ``seed, seed+1, ...`` are tried in turn; the accepted
    seed is returned with the sequence.
    """
    for s in range(seed, seed + max_tries):
        a = np.random.default_rng(s).choice([-1.0, 1.0], size=N)
        mag = np.abs(circulant_dft(a))
        if mag.min() > DFT_ZERO_TOL * mag.max():
            return a, s
    raise ZeroDFTBin(f"no admissible sequence within {max_tries} seeds")


@dataclass
class AuditReport:
    p: int
    K: int
    # per number of deleted rows: worst condition number, subsets examined
    worst_condition: dict
    subsets_checked: dict
    exhaustive: dict
    first_failure: dict
    seeds: tuple = ()

    @property
    def ok(self) -> bool:
        return all(v is None for v in self.first_failure.values())

    def worst_log10_condition(self, p_e: int) -> float:
        c = self.worst_condition[p_e]
        return math.log10(c) if math.isfinite(c) else math.inf


def _subset_conditions(S: np.ndarray, keep_sets: np.ndarray) -> np.ndarray:
    out = np.empty(len(keep_sets))
    chunk = 4096
    for lo in range(0, len(keep_sets), chunk):
        sub = S[keep_sets[lo:lo + chunk]]
        s = np.linalg.svd(sub, compute_uv=False)
        smin, smax = s[:, -1], s[:, 0]
        with np.errstate(divide="ignore"):
            c = np.where(smin > RANK_RTOL * smax, smax / smin, np.inf)
        out[lo:lo + chunk] = c
    return out


def audit_row_deletions(S, max_deleted: int, exhaustive_limit: int = 1_000_000,
                        samples: int = 100_000, seed: int = 0) -> AuditReport:
    """Worst-case condition number of ``S`` after deleting up to ``max_deleted`` rows.

    Every subset is checked while ``C(p, p_e) <= exhaustive_limit``; larger
    levels fall back to ``samples`` random subsets and are flagged as such.
    """
    S = np.asarray(getattr(S, "entries", S))
    p, K = S.shape
    worst, checked, exhaustive, failure = {}, {}, {}, {}
    rng = np.random.default_rng(seed)
    rows = np.arange(p)
    for pe in range(max_deleted + 1):
        n_sub = math.comb(p, pe)
        if p - pe < K:
            worst[pe], checked[pe], exhaustive[pe] = math.inf, 0, True
            failure[pe] = tuple(range(pe))
            continue
        if n_sub <= exhaustive_limit:
            dels = np.array(list(itertools.combinations(rows, pe)), dtype=int).reshape(n_sub, pe)
            exhaustive[pe] = True
        else:
            dels = np.stack([np.sort(rng.choice(p, pe, replace=False)) for _ in range(samples)])
            exhaustive[pe] = False
        mask = np.ones((len(dels), p), dtype=bool)
        np.put_along_axis(mask, dels, False, axis=1)
        keep = np.nonzero(mask)[1].reshape(len(dels), p - pe)
        conds = _subset_conditions(S, keep)
        worst[pe] = float(conds.max())
        checked[pe] = len(dels)
        bad = np.nonzero(~np.isfinite(conds))[0]
        failure[pe] = tuple(int(r) for r in dels[bad[0]]) if bad.size else None
    return AuditReport(p, K, worst, checked, exhaustive, failure)


def dual_generator_alpha(base1, base2, p: int) -> np.ndarray:
    """First half of the channels: delayed copies of ``base1``; second half: ``base2``.

    Channel ``i`` within a half is delayed by ``i T/N``.
    """
    h1 = (p + 1) // 2
    return np.vstack([delayed_rows(base1, h1), delayed_rows(base2, p - h1)])


def failure_robust_spec(N: int, K: int, p: int, p_e: int, base1=None, base2=None,
                        seed: int = 0, T: float = 1.0, base_pulse: PulseShape | None = None,
                        shaping_filter: FilterSpec | None = None):
    """Two-generator pulse-sequence design tolerating ``p_e`` failed channels.

    Returns:
        ``(spec, report)``; the report lists worst-case condition numbers for
        every deletion count up to ``p_e`` and the generator seeds used.

    Raises:
        AuditFailed: some surviving submatrix is rank deficient.
    """
    if p < N + p_e or p < 2 * p_e:
        raise ValueError("need p >= N + p_e and p >= 2 p_e")
    seeds = []
    if base1 is None:
        base1, s1 = draw_pm1_sequence(N, seed)
        seeds.append(s1)
    if base2 is None:
        start = seeds[-1] + 1 if seeds else seed + 1
        base2, s2 = draw_pm1_sequence(N, start)
        while np.array_equal(np.abs(circulant_dft(base2)), np.abs(circulant_dft(base1))):
            base2, s2 = draw_pm1_sequence(N, s2 + 1)
        seeds.append(s2)
    alpha = dual_generator_alpha(base1, base2, p)
    spec = PulseSequence(IndexSet.symmetric(K), alpha, base_pulse, shaping_filter, T)
    S, _, _ = _columns(spec)
    report = audit_row_deletions(S, p_e)
    report.seeds = tuple(seeds)
    if not report.ok:
        bad = {k: v for k, v in report.first_failure.items() if v is not None}
        raise AuditFailed(f"rank lost after deleting rows {bad}")
    return spec, report


def sos_matrix_oracle(b, kset: IndexSet, p: int) -> np.ndarray:
    """``V(-t_s) B`` with sampling instants ``t_s = {0, T/p, ..., (p-1)T/p}``."""
    ts = np.arange(p) / p
    V = np.exp(1j * TWO_PI * np.outer(ts, kset.indices))
    return V @ np.diag(np.asarray(b, dtype=complex))


def spec_to_dict(spec: MixingSpec) -> dict:
    d = {"variant": type(spec).__name__, "K": spec.kset.K, "k_start": spec.kset.start,
         "T": spec.T}
    if isinstance(spec, SoSDelayed):
        d["b_re"] = spec.b.real.tolist()
        d["b_im"] = spec.b.imag.tolist()
        d["p"] = spec.p
    elif isinstance(spec, PulseSequence):
        d["alpha"] = spec.alpha.tolist()
        d["base_pulse"] = spec.base_pulse.to_dict()
        d["extent"] = spec.extent
        f = spec.shaping_filter
        if isinstance(f, ChebyshevI):
            d["filter"] = {"kind": "chebyshev1", "order": f.order, "ripple_db": f.ripple_db,
                           "cutoff": f.cutoff}
        elif isinstance(f, IdealOnGrid):
            d["filter"] = {"kind": "ideal", "k_start": f.kset.start, "K": f.kset.K}
        elif isinstance(f, SoSFilter):
            d["filter"] = {"kind": "sos", "b_re": f.b.real.tolist(), "b_im": f.b.imag.tolist(),
                           "k_start": f.kset.start, "K": f.kset.K}
    return d


def spec_from_dict(d: dict) -> MixingSpec:
    kset = IndexSet(int(d["k_start"]), int(d["K"]))
    T = float(d.get("T", 1.0))
    v = d["variant"]
    if v == "Direct":
        return Direct(kset, T)
    if v == "CosSin":
        return CosSin(kset, T)
    if v == "SoSDelayed":
        b = np.asarray(d["b_re"]) + 1j * np.asarray(d["b_im"])
        return SoSDelayed(kset, b, int(d["p"]), T)
    if v == "PulseSequence":
        f = d.get("filter")
        filt = None
        if f is not None:
            if f["kind"] == "chebyshev1":
                filt = ChebyshevI(int(f["order"]), float(f["ripple_db"]), float(f["cutoff"]))
            elif f["kind"] == "ideal":
                filt = IdealOnGrid(IndexSet(int(f["k_start"]), int(f["K"])), T)
            elif f["kind"] == "sos":
                filt = SoSFilter(np.asarray(f["b_re"]) + 1j * np.asarray(f["b_im"]),
                                 IndexSet(int(f["k_start"]), int(f["K"])), T)
        return PulseSequence(kset, np.asarray(d["alpha"]), PulseShape.from_dict(d["base_pulse"]),
                             filt, T, d.get("extent"))
    raise ValueError(f"unknown mixing variant {v!r}")


def write_waveform_csv(path, spec: MixingSpec, t) -> None:
    """Columns ``t, re_s0, im_s0, re_s1, ...``."""
    t = np.asarray(t, dtype=float)
    vals = [waveform_value(spec, i, t) for i in range(spec.p)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"{part}_s{i}" for i in range(spec.p) for part in ("re", "im")])
        for j, tt in enumerate(t):
            row = [repr(float(tt))]
            for v in vals:
                row += [repr(float(v[j].real)), repr(float(v[j].imag))]
            w.writerow(row)
