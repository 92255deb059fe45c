import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from mcfri.errors import (AuditFailed, FilterConditionViolated, PulseOverlap, RankDeficient,
                          ZeroDFTBin)
from mcfri.filters import ChebyshevI, IdealOnGrid, sos_time_value
from mcfri.signal_model import IndexSet, PulseShape
from mcfri.waveforms import (CosSin, Direct, PulseSequence, SoSDelayed, audit_row_deletions,
                             build_mixing_matrix, circulant_condition, cyclic_generator,
                             decompose_awphi, delayed_rows, draw_pm1_sequence,
                             dual_generator_alpha, failure_robust_spec, is_left_invertible,
                             mirror, sos_matrix_oracle, spec_from_dict, spec_to_dict,
                             waveform_value, write_waveform_csv)

TWO_PI = 2 * np.pi


def test_direct_is_identity():
    S = build_mixing_matrix(Direct(IndexSet.symmetric(5)))
    assert np.array_equal(S.entries, np.eye(5))
    assert S.condition_number == 1.0 and S.rank == 5


def test_cos_sin_waveforms_odd_K():
    T = 2.0
    spec = CosSin(IndexSet.symmetric(5), T)
    t = np.linspace(0, T, 37)
    assert np.allclose(waveform_value(spec, 0, t), np.cos(TWO_PI * t / T))
    assert np.allclose(waveform_value(spec, 1, t), np.cos(2 * TWO_PI * t / T))
    assert np.allclose(waveform_value(spec, 2, t), np.sin(TWO_PI * t / T))
    assert np.allclose(waveform_value(spec, 3, t), np.sin(2 * TWO_PI * t / T))
    assert np.allclose(waveform_value(spec, 4, t), 1.0)
    assert build_mixing_matrix(spec).is_left_invertible


def test_cos_sin_even_K_uses_complex_edge_tone():
    spec = CosSin(IndexSet.symmetric(4))
    S = build_mixing_matrix(spec)
    t = np.linspace(0, 1, 11)
    # channel 3 carries exp(-j 2 pi (-2) t) for the unpaired index -2
    assert np.allclose(waveform_value(spec, 3, t), np.exp(2j * TWO_PI * t))
    assert S.is_left_invertible
    with pytest.raises(ValueError):
        CosSin(IndexSet(0, 5))


def test_sos_matrix_matches_vandermonde_oracle(rng):
    kset = IndexSet.symmetric(7)
    b = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    S = build_mixing_matrix(SoSDelayed(kset, b, 9))
    assert np.allclose(S.entries, sos_matrix_oracle(b, kset, 9), atol=1e-13)


def test_sos_waveform_is_delayed_reflected_filter(rng):
    kset = IndexSet.symmetric(5)
    b = rng.standard_normal(5) + 0.3j
    spec = SoSDelayed(kset, b, 5)
    t = np.linspace(0.01, 0.99, 23)
    for i in range(5):
        arg = np.mod(i / 5 - t + 0.5, 1.0) - 0.5
        assert np.allclose(waveform_value(spec, i, t), sos_time_value(b, arg, 1.0, kset))


def pulse_train_coefficient(alpha, N, width, k, T=1.0):
    """(1/T) int_0^T sum_n alpha[n] rect(t - nT/N) exp(j 2 pi k t / T) dt, by quadrature."""
    total = 0.0
    for n, a in enumerate(alpha):
        lo = n * T / N
        f = lambda t: np.exp(2j * np.pi * k * t / T)
        re = quad(lambda t: f(t).real, lo, lo + width, epsabs=1e-14)[0]
        im = quad(lambda t: f(t).imag, lo, lo + width, epsabs=1e-14)[0]
        total += a * (re + 1j * im)
    return total / T


def test_pulse_sequence_entries_match_quadrature():
    N = 5
    base = np.array([1, 1, 1, -1, -1.0])
    spec = PulseSequence(IndexSet.symmetric(5), cyclic_generator(base))
    S = build_mixing_matrix(spec)
    for i in (0, 3):
        for j, k in enumerate(spec.kset.indices):
            # S_ij multiplies X[k]: the waveform term exp(-j 2 pi k t / T)
            ref = pulse_train_coefficient(spec.alpha[i], N, 1.0 / N, k)
            assert abs(S.entries[i, j] - ref) < 1e-12


def test_pulse_sequence_waveform_is_filtered_train():
    base = np.array([1, -1, 1, 1, -1.0])
    spec = PulseSequence(IndexSet.symmetric(5), cyclic_generator(base))
    t = np.linspace(0, 1, 41)
    v = waveform_value(spec, 0, t)
    # ideal filter keeps harmonics -2..2 of the train: rebuild from quadrature
    ref = sum(pulse_train_coefficient(base, 5, 0.2, k) * np.exp(-2j * np.pi * k * t)
              for k in range(-2, 3))
    assert np.allclose(v, ref, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(N=st.integers(3, 9), seed=st.integers(0, 10_000), extra=st.integers(0, 3),
       use_cheb=st.booleans(), width_frac=st.floats(0.3, 1.0))
def test_awphi_decomposition(N, seed, extra, use_cheb, width_frac):
    rng = np.random.default_rng(seed)
    K = N if N % 2 else N - 1
    kset = IndexSet.symmetric(K)
    alpha = rng.choice([-1.0, 1.0], size=(N + extra, N))
    filt = ChebyshevI(6, 3.0, TWO_PI * (K // 2)) if use_cheb else None
    spec = PulseSequence(kset, alpha, PulseShape.rectangle(width_frac / N), filt)
    A, W, Phi = decompose_awphi(spec)
    from mcfri.waveforms import _columns
    S, _, _ = _columns(spec)
    assert np.max(np.abs(S - A @ W @ Phi)) < 1e-12


def test_pulse_sequence_defaults():
    spec = PulseSequence(IndexSet.symmetric(5), cyclic_generator([1, 1, 1, -1, -1]))
    assert spec.base_pulse == PulseShape.rectangle(0.2)
    assert isinstance(spec.shaping_filter, IdealOnGrid)
    assert spec.shaping_filter.kset == mirror(spec.kset)


def test_pulse_overlap_and_filter_condition():
    alpha = cyclic_generator([1, 1, 1, -1, -1])
    kset = IndexSet.symmetric(5)
    with pytest.raises(PulseOverlap):
        build_mixing_matrix(PulseSequence(kset, alpha, PulseShape.rectangle(0.3)))
    with pytest.raises(FilterConditionViolated):
        build_mixing_matrix(PulseSequence(kset, alpha, shaping_filter=IdealOnGrid(IndexSet(8, 5), 1.0)))


def test_rank_deficiency_detected():
    kset = IndexSet.symmetric(5)
    with pytest.raises(RankDeficient):
        build_mixing_matrix(SoSDelayed(kset, np.ones(5), 4))
    alpha = np.vstack([delayed_rows([1, 1, 1, -1, -1], 4), [[1, 1, 1, -1, -1]]])
    with pytest.raises(RankDeficient):
        build_mixing_matrix(PulseSequence(kset, alpha))


def test_cyclic_generator_and_sequence_draws():
    base = np.array([1, 1, 1, -1, -1.0])
    C = cyclic_generator(base)
    assert np.array_equal(C[2], np.roll(base, 2))
    assert circulant_condition(base) == pytest.approx(np.linalg.cond(C))
    with pytest.raises(ZeroDFTBin):
        cyclic_generator(np.ones(4))
    seq, seed = draw_pm1_sequence(9, 2)
    assert seed == 2 and set(seq) <= {-1.0, 1.0}
    again, _ = draw_pm1_sequence(9, 2)
    assert np.array_equal(seq, again)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from([-1.0, 1.0]), min_size=3, max_size=12))
def test_circulant_condition_equals_dense_condition(base):
    base = np.array(base)
    mag = np.abs(np.fft.fft(base))
    if mag.min() < 1e-9:
        with pytest.raises(ZeroDFTBin):
            cyclic_generator(base)
    else:
        C = cyclic_generator(base)
        assert circulant_condition(base) == pytest.approx(np.linalg.cond(C), rel=1e-9)


def test_audit_matches_brute_force(rng):
    S = rng.standard_normal((7, 4))
    S[6] = S[5]  # duplicated rows make some deletions harmless, others not
    S[:, 3] = 0
    S[0, 3] = S[1, 3] = S[2, 3] = 1.0
    rep = audit_row_deletions(S, 4)
    for pe in range(5):
        worst = 0.0
        for dele in itertools.combinations(range(7), pe):
            keep = [r for r in range(7) if r not in dele]
            s = np.linalg.svd(S[keep], compute_uv=False)
            c = np.inf if s[-1] <= 1e-10 * s[0] else s[0] / s[-1]
            worst = max(worst, c)
        assert rep.worst_condition[pe] == pytest.approx(worst)
    assert rep.first_failure[3] == (0, 1, 2) and rep.first_failure[2] is None


def test_audit_falls_back_to_sampling():
    rep = audit_row_deletions(np.random.default_rng(0).standard_normal((12, 3)), 3,
                              exhaustive_limit=100, samples=50)
    assert rep.exhaustive[2] and not rep.exhaustive[3] and rep.subsets_checked[3] == 50


def test_failure_robust_design():
    b1, _ = draw_pm1_sequence(9, 2)
    b2, _ = draw_pm1_sequence(9, 3)
    spec, rep = failure_robust_spec(9, 9, 18, 6, b1, b2)
    assert rep.ok and rep.subsets_checked[6] == 18564
    assert np.array_equal(spec.alpha, dual_generator_alpha(b1, b2, 18))
    with pytest.raises(AuditFailed):
        failure_robust_spec(9, 9, 18, 6, draw_pm1_sequence(9, 0)[0], draw_pm1_sequence(9, 1)[0])
    with pytest.raises(ValueError):
        failure_robust_spec(9, 9, 12, 6)


def test_offsets_multiply_columns():
    S = build_mixing_matrix(CosSin(IndexSet.symmetric(3)))
    St = S.with_offsets([0.1, 0.0, 0.05])
    k = np.array([-1, 0, 1])
    assert np.allclose(St.entries[0], S.entries[0] * np.exp(-1j * TWO_PI * k * 0.1))
    assert np.array_equal(St.entries[1], S.entries[1])


def test_spec_dict_round_trip(rng):
    kset = IndexSet.symmetric(5)
    specs = [Direct(kset, 2.0), CosSin(kset), SoSDelayed(kset, rng.standard_normal(5) + 1j, 6),
             PulseSequence(kset, cyclic_generator([1, 1, 1, -1, -1]),
                           shaping_filter=ChebyshevI(4, 3.0, TWO_PI * 2), extent=20)]
    for spec in specs:
        a = build_mixing_matrix(spec)
        b = build_mixing_matrix(spec_from_dict(spec_to_dict(spec)))
        assert np.array_equal(a.extended, b.extended) and a.T == b.T


def test_is_left_invertible():
    assert is_left_invertible(np.eye(3))
    assert not is_left_invertible(np.ones((3, 2)))
    assert not is_left_invertible(np.eye(3)[:2])


def test_waveform_csv(tmp_path):
    path = tmp_path / "w.csv"
    write_waveform_csv(path, CosSin(IndexSet.symmetric(3)), [0.0, 0.25])
    rows = path.read_text().splitlines()
    assert rows[0] == "t,re_s0,im_s0,re_s1,im_s1,re_s2,im_s2"
    assert float(rows[1].split(",")[1]) == pytest.approx(1.0)
