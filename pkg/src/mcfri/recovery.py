"""Reconstruction: samples -> Fourier coefficients -> cisoids -> delays and amplitudes.

After inverting the mixing matrix and the pulse's diagonal response, each
period leaves a sum of cisoids

    y_k = sum_l a_l u_l^k,   u_l = exp(-j 2 pi t_l / T),

whose "frequencies" ``u_l`` carry the delays.  Three estimators are
provided: the annihilating filter (Prony with total least squares), the
matrix pencil and ESPRIT across periods for shift-invariant streams.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateRootsWarning, IllConditionedVandermondeWarning, OrderTooHigh,
                     RankBelowOrder, RankDeficientAfterFailure)
from .signal_model import TWO_PI, FourierVector, IndexSet, PulseShape, h_matrix
from .waveforms import RANK_RTOL, MixingMatrix

ROOT_DEVIATION_LIMIT = 0.2
VANDERMONDE_COND_LIMIT = 1e10

ESTIMATORS = ("annihilating_filter", "matrix_pencil", "esprit_si")


@dataclass(frozen=True)
class RecoveryConfig:
    estimator: str = "annihilating_filter"
    model_order_L: int = 1
    pencil_len: int | None = None
    # None lets esprit_si switch smoothing on when the snapshot rank is below L
    smoothing: bool | None = None
    subarray_len: int | None = None
    known_offsets: tuple | None = None
    eta_rtol: float = 1e-6

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.model_order_L < 1:
            raise ValueError("model order must be >= 1")


@dataclass
class RecoveryResult:
    """Recovered parameters, one row per period.

    In shift-invariant mode every row of ``delays`` is the same common estimate.
    """

    delays: np.ndarray
    amplitudes: np.ndarray
    period_T: float
    mode: str = "per_period"
    diagnostics: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.delays.shape[0]


def _y_matrix(y) -> np.ndarray:
    if isinstance(y, FourierVector):
        y = y.values
    return np.asarray(y, dtype=complex)


def recover_fourier(c, S: MixingMatrix, offsets=None) -> np.ndarray:
    """Least-squares Fourier coefficients ``pinv(S_tilde) c`` from surviving channels.

    Args:
        c: SampleMatrix (or a ``p x M`` / length-``p`` array without missing rows).
        S: mixing matrix.
        offsets: known channel timing offsets to compensate.

    Returns:
        ``K x M`` array (``K`` vector for 1-D input).

    Raises:
        RankDeficientAfterFailure: surviving rows do not have rank ``K``.
    """
    if hasattr(c, "missing"):
        vals, keep = c.values, ~c.missing.any(axis=1)
    else:
        vals = np.asarray(c, dtype=complex)
        keep = np.ones(vals.shape[0], dtype=bool)
    squeeze = vals.ndim == 1
    vals = vals.reshape(vals.shape[0], -1)
    St = S.with_offsets(offsets) if offsets is not None and np.any(offsets) else S
    A = St.entries[keep]
    s = np.linalg.svd(A, compute_uv=False)
    if A.shape[0] < A.shape[1] or s[-1] <= RANK_RTOL * s[0]:
        raise RankDeficientAfterFailure(
            f"{int(keep.sum())} surviving channels do not determine K={S.kset.K} coefficients")
    x = np.linalg.pinv(A) @ vals[keep]
    return x[:, 0] if squeeze else x


def deconvolve(x, H) -> np.ndarray:
    """``y = H^{-1} x`` for the diagonal pulse matrix ``H``."""
    x = _y_matrix(x)
    h = np.diag(H) if np.ndim(H) == 2 else np.asarray(H)
    return x / (h[:, None] if x.ndim == 2 else h)


def roots_to_delays(z, T: float = 1.0) -> np.ndarray:
    """Map ``u = exp(-j 2 pi t / T)`` to ``t`` in ``[0, T)``; magnitudes are ignored."""
    t = np.mod(-np.angle(z) / TWO_PI, 1.0) * T
    t = np.where(t >= T, t - T, t)
    return np.sort(t)


def _check_roots(z, where: str) -> float:
    dev = float(np.max(np.abs(np.abs(z) - 1.0))) if len(z) else 0.0
    if dev > ROOT_DEVIATION_LIMIT:
        warnings.warn(f"{where}: roots deviate from the unit circle by {dev:.3g}",
                      DegenerateRootsWarning, stacklevel=3)
    return dev


def _y_vector(y) -> np.ndarray:
    y = _y_matrix(y)
    if y.ndim == 2 and 1 in y.shape:
        y = y.ravel()
    if y.ndim != 1:
        raise ValueError("expected a single coefficient vector")
    return y


def annihilating_roots(y, L: int) -> np.ndarray:
    y = _y_vector(y)
    K = y.size
    if K < 2 * L:
        raise OrderTooHigh(f"K={K} coefficients cannot resolve L={L} cisoids (need K >= 2L)")
    # row r: [y_{r+L}, y_{r+L-1}, ..., y_r]
    rows = np.arange(L, K)[:, None] - np.arange(L + 1)[None, :]
    A = y[rows]
    _, _, vh = np.linalg.svd(A)
    h = vh[-1].conj()
    if L == 1:
        return np.array([-h[1] / h[0]])
    return np.roots(h)


def annihilating_filter(y, L: int, T: float = 1.0) -> np.ndarray:
    """Delays from the annihilating filter (total least squares when ``K > 2L``).

    Raises:
        OrderTooHigh: ``K < 2L``.
    """
    z = annihilating_roots(y, L)
    _check_roots(z, "annihilating_filter")
    return roots_to_delays(z, T)


def pencil_roots(y, L: int, pencil_len: int | None = None) -> np.ndarray:
    y = _y_vector(y)
    K = y.size
    if K < 2 * L:
        raise OrderTooHigh(f"K={K} coefficients cannot resolve L={L} cisoids (need K >= 2L)")
    P = K // 2 if pencil_len is None else int(pencil_len)
    if not L <= P <= K - L:
        raise ValueError(f"pencil length must lie in [{L}, {K - L}]")
    Y = y[np.arange(K - P)[:, None] + np.arange(P + 1)[None, :]]
    _, _, vh = np.linalg.svd(Y, full_matrices=False)
    V = vh[:L]
    # V[:, 1:] = B diag(u) B^-1 V[:, :-1]
    F = V[:, 1:] @ np.linalg.pinv(V[:, :-1])
    return np.linalg.eigvals(F)


def matrix_pencil(y, L: int, pencil_len: int | None = None, T: float = 1.0) -> np.ndarray:
    """Delays from the SVD-truncated matrix pencil of the Hankel data matrix."""
    z = pencil_roots(y, L, pencil_len)
    _check_roots(z, "matrix_pencil")
    return roots_to_delays(z, T)


def estimate_eta(Y, rel_threshold: float = 1e-6) -> int:
    """Numerical rank of the snapshot matrix (dimension spanned by the amplitude vectors)."""
    Y = np.atleast_2d(np.asarray(Y))
    if Y.size == 0:
        return 0
    s = np.linalg.svd(Y, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > rel_threshold * s[0]))


def default_subarray_len(K: int, L: int) -> int:
    return min(K, max(math.ceil(K / 2) + 1, L + 1))


def esprit_roots(Y, L: int, smoothing: bool = True, subarray_len: int | None = None,
                 eta_rtol: float = 1e-6) -> np.ndarray:
    Y = _y_matrix(Y)
    if Y.ndim == 1:
        Y = Y[:, None]
    K, M = Y.shape
    if M < 1:
        raise ValueError("need at least one period")
    if smoothing:
        Ms = default_subarray_len(K, L) if subarray_len is None else int(subarray_len)
        if not L + 1 <= Ms <= K:
            raise ValueError(f"subarray length must lie in [{L + 1}, {K}]")
        n_sub = K - Ms + 1
        eta = estimate_eta(Y, eta_rtol)
        if eta * n_sub < L:
            raise RankBelowOrder(f"snapshot rank {eta} over {n_sub} subarrays cannot reach L={L}; "
                                 f"need more coefficients (K={K})")
    else:
        Ms = K
        if K < L + 1:
            raise OrderTooHigh(f"K={K} coefficients cannot resolve L={L} cisoids (need K >= L+1)")
        eta = estimate_eta(Y, eta_rtol)
        if eta < L:
            raise RankBelowOrder(f"snapshot rank {eta} < L={L}; enable smoothing")
    R = Y @ Y.conj().T / M
    n_sub = K - Ms + 1
    Rs = sum(R[i:i + Ms, i:i + Ms] for i in range(n_sub)) / n_sub
    _, vecs = np.linalg.eigh(Rs)
    Es = vecs[:, -L:]
    Psi = np.linalg.lstsq(Es[:-1], Es[1:], rcond=None)[0]
    return np.linalg.eigvals(Psi)


def esprit_si(Y, L: int, smoothing: bool = True, subarray_len: int | None = None,
              T: float = 1.0, eta_rtol: float = 1e-6) -> np.ndarray:
    """Common delays of a shift-invariant stream from its ``K x M`` deconvolved periods.

    With ``smoothing`` the correlation matrix is averaged over subarrays of
    length ``subarray_len`` (forward spatial smoothing), which restores the
    signal-subspace rank when the amplitude vectors are coherent.

    Raises:
        RankBelowOrder: the snapshots span fewer than ``L`` dimensions and
            smoothing is off, or too few subarrays are available to restore the rank.
    """
    z = esprit_roots(Y, L, smoothing, subarray_len, eta_rtol)
    _check_roots(z, "esprit_si")
    return roots_to_delays(z, T)


def vandermonde(delays, kset: IndexSet, T: float = 1.0) -> np.ndarray:
    frac = np.mod(np.outer(kset.indices, np.asarray(delays) / T), 1.0)
    return np.exp(-1j * TWO_PI * frac)


def amplitudes_ls(y, delays, kset: IndexSet, T: float = 1.0, return_residual: bool = False):
    """Least-squares amplitudes ``pinv(V(t)) y``; ``y`` may hold one column per period."""
    y = _y_matrix(y)
    V = vandermonde(delays, kset, T)
    if kset.K < V.shape[1]:
        raise OrderTooHigh("need K >= L for the amplitude fit")
    cond = np.linalg.cond(V) if V.shape[1] else 1.0
    if cond > VANDERMONDE_COND_LIMIT:
        warnings.warn(f"Vandermonde condition number {cond:.3g}", IllConditionedVandermondeWarning,
                      stacklevel=2)
    a = np.linalg.lstsq(V, y, rcond=None)[0]
    if return_residual:
        return a, np.linalg.norm(V @ a - y, axis=0)
    return a


def recover_stream(c, S: MixingMatrix, pulse: PulseShape, kset: IndexSet | None = None,
                   config: RecoveryConfig | None = None) -> RecoveryResult:
    """Full chain: mixing inversion, deconvolution, delay estimation, amplitude fit."""
    config = config or RecoveryConfig()
    kset = kset or S.kset
    if kset != S.kset:
        raise ValueError("index set does not match the mixing matrix")
    T = S.T
    L = config.model_order_L
    offsets = None if config.known_offsets is None else np.asarray(config.known_offsets)
    x = recover_fourier(c, S, offsets)
    if x.ndim == 1:
        x = x[:, None]
    H = h_matrix(pulse, kset, T)
    y = deconvolve(x, H)
    M = y.shape[1]
    diag = {}
    St = S.with_offsets(offsets) if offsets is not None and np.any(offsets) else S
    if hasattr(c, "missing"):
        keep = ~c.missing.any(axis=1)
        cv = c.values
    else:
        cv = np.asarray(c).reshape(S.p, -1)
        keep = np.ones(S.p, dtype=bool)
    diag["cond_S"] = float(np.linalg.cond(St.entries[keep]))
    diag["cond_H"] = float(np.linalg.cond(H))
    diag["fourier_residual"] = np.linalg.norm(St.entries[keep] @ x - cv[keep], axis=0)

    if config.estimator == "esprit_si":
        smoothing = config.smoothing
        eta = estimate_eta(y, config.eta_rtol)
        diag["eta"] = eta
        if smoothing is None:
            smoothing = eta < L
        diag["smoothing"] = bool(smoothing)
        z = esprit_roots(y, L, smoothing, config.subarray_len, config.eta_rtol)
        common = roots_to_delays(z, T)
        delays = np.tile(common, (M, 1))
        root_dev = [float(np.max(np.abs(np.abs(z) - 1.0)))]
        mode = "si"
    else:
        rows, root_dev = [], []
        for m in range(M):
            if config.estimator == "annihilating_filter":
                z = annihilating_roots(y[:, m], L)
            else:
                z = pencil_roots(y[:, m], L, config.pencil_len)
            root_dev.append(float(np.max(np.abs(np.abs(z) - 1.0))))
            rows.append(roots_to_delays(z, T))
        delays = np.vstack(rows)
        mode = "per_period"
    diag["root_deviation"] = np.asarray(root_dev)
    diag["degenerate_roots"] = bool(np.max(root_dev) > ROOT_DEVIATION_LIMIT)

    amps = np.empty((M, L), dtype=complex)
    cond_v = np.empty(M)
    model_res = np.empty(M)
    for m in range(M):
        V = vandermonde(delays[m], kset, T)
        cond_v[m] = np.linalg.cond(V)
        amps[m] = np.linalg.lstsq(V, y[:, m], rcond=None)[0]
        model_res[m] = np.linalg.norm(St.entries[keep] @ (H @ (V @ amps[m])) - cv[keep, m])
    diag["cond_V"] = cond_v
    diag["model_residual"] = model_res
    diag["ill_conditioned_vandermonde"] = bool(np.max(cond_v) > VANDERMONDE_COND_LIMIT)
    return RecoveryResult(delays, amps, T, mode, diag)


def match_delays(est, true, T: float = 1.0):
    """Pair estimated with true delays by optimal assignment on circular distance.

    Returns:
        ``(order, errors)`` with ``est[order[j]]`` matched to ``true[j]`` and
        signed circular errors ``est - true`` in ``[-T/2, T/2)``.
    """
    from scipy.optimize import linear_sum_assignment

    est, true = np.asarray(est, float), np.asarray(true, float)
    diff = np.subtract.outer(true, est)
    circ = np.mod(diff + 0.5 * T, T) - 0.5 * T
    r, col = linear_sum_assignment(np.abs(circ))
    order = np.empty(true.size, dtype=int)
    order[r] = col
    err = -circ[r, col]
    out = np.empty(true.size)
    out[r] = err
    return order, out


def write_result_csv(path, result: RecoveryResult, true_delays=None) -> None:
    """Rows ``period, l, delay_est, delay_true, amp_re, amp_im, residual``."""
    res = result.diagnostics.get("model_residual", np.full(result.M, np.nan))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period", "l", "delay_est", "delay_true", "amp_re", "amp_im", "residual"])
        for m in range(result.M):
            truth = None
            if true_delays is not None:
                tm = np.asarray(true_delays[m] if np.ndim(true_delays) == 2 else true_delays)
                order, _ = match_delays(result.delays[m], tm, result.period_T)
                truth = np.full(result.delays.shape[1], np.nan)
                truth[order] = tm
            for l in range(result.delays.shape[1]):
                a = result.amplitudes[m, l]
                w.writerow([m, l, repr(float(result.delays[m, l])),
                            "" if truth is None else repr(float(truth[l])),
                            repr(float(a.real)), repr(float(a.imag)), repr(float(res[m]))])
