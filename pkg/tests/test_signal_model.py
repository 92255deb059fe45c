import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from mcfri.errors import DiracNotEvaluable, SupportViolation, ZeroCTFTOnGrid
from mcfri.signal_model import (FiniteStream, IndexSet, InfiniteStream, PulseShape, evaluate,
                                fourier_coefficients, fourier_series, fourier_series_periods,
                                h_matrix, stream_from_text, stream_to_text, validate_support)

TWO_PI = 2 * np.pi


def ctft_quad(pulse, omega, lo, hi, points=()):
    re = quad(lambda t: pulse(t) * np.cos(omega * t), lo, hi, points=points, limit=400,
              epsabs=1e-14, epsrel=1e-13)[0]
    im = quad(lambda t: -pulse(t) * np.sin(omega * t), lo, hi, points=points, limit=400,
              epsabs=1e-14, epsrel=1e-13)[0]
    return re + 1j * im


@pytest.mark.parametrize("omega", [0.0, 3.0, 17.5, 120.0])
def test_rectangle_ctft_matches_quadrature(omega):
    p = PulseShape.rectangle(0.1)
    assert abs(p.ctft(omega) - ctft_quad(p, omega, -0.05, 0.05)) < 1e-12


@pytest.mark.parametrize("omega", [0.0, 5.0, 60.0, 250.0])
def test_truncated_gaussian_ctft_matches_quadrature(omega):
    p = PulseShape.gaussian(0.02, 0.07)
    ref = ctft_quad(p, omega, -0.07, 0.07)
    assert abs(p.ctft(omega) - ref) < 1e-12 * max(1.0, abs(ref))


def test_gaussian_default_truncation_is_six_sigma():
    p = PulseShape.gaussian(0.01)
    assert p.truncation_halfwidth == pytest.approx(0.06)
    assert p.support_halfwidth == pytest.approx(0.06)
    assert p(0.061) == 0.0 and p(0.0) == 1.0


@pytest.mark.parametrize("omega", [0.0, 9.0, 40.0])
def test_tabulated_ctft_matches_quadrature(omega):
    samples = [0.2, 1.0, 0.7, -0.3]
    p = PulseShape.tabulated(samples, 0.01)
    s = p.support_halfwidth
    knots = list(np.arange(-s, s + 1e-9, 0.01))
    assert abs(p.ctft(omega) - ctft_quad(p, omega, -s, s, points=knots)) < 1e-12


def test_dirac_pointwise_evaluation_raises():
    d = PulseShape.dirac()
    assert d.ctft(np.array([0.0, 10.0])).tolist() == [1, 1]
    with pytest.raises(DiracNotEvaluable):
        d(0.0)
    with pytest.raises(DiracNotEvaluable):
        evaluate(FiniteStream(1.0, [0.2], [1.0]), [0.1])


def test_pulse_dict_round_trip():
    for p in (PulseShape.dirac(), PulseShape.rectangle(0.2), PulseShape.gaussian(0.01, 0.05),
              PulseShape.tabulated([1, 2, 1], 0.1)):
        assert PulseShape.from_dict(p.to_dict()) == p


def test_stream_validation():
    with pytest.raises(ValueError):
        FiniteStream(1.0, [0.2, 0.2], [1, 1])
    with pytest.raises(ValueError):
        FiniteStream(1.0, [1.0], [1])
    with pytest.raises(ValueError):
        FiniteStream(1.0, [-0.1], [1])
    with pytest.raises(ValueError):
        FiniteStream(1.0, [0.1, 0.2], [1])
    s = FiniteStream(1.0, [0.1], [1.0])
    with pytest.raises(ValueError):
        s.delays[0] = 0.3


def test_index_set_layouts():
    assert IndexSet.symmetric(5).indices.tolist() == [-2, -1, 0, 1, 2]
    assert IndexSet.symmetric(4).indices.tolist() == [-2, -1, 0, 1]
    k = IndexSet(3, 4)
    assert 3 in k and 6 in k and 7 not in k
    assert k.position(5) == 2
    assert IndexSet.symmetric(5).is_symmetric and not k.is_symmetric
    assert IndexSet(3, 4) == IndexSet(3, 4) and len({IndexSet(3, 4), IndexSet(3, 4)}) == 1


def test_index_set_rejects_zero_ctft():
    # a rectangle of width T/2 has spectral zeros at k = +-2
    with pytest.raises(ZeroCTFTOnGrid):
        IndexSet.symmetric(5).validate(PulseShape.rectangle(0.5), 1.0)
    IndexSet.symmetric(3).validate(PulseShape.rectangle(0.5), 1.0)
    with pytest.raises(ZeroCTFTOnGrid):
        h_matrix(PulseShape.rectangle(0.5), IndexSet.symmetric(5), 1.0)


def test_dirac_fourier_series_matches_direct_sum(rng):
    T = 2.5
    t = rng.uniform(0, T, 4)
    a = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    s = FiniteStream(T, t, a)
    k = np.arange(-7, 8)
    ref = np.array([sum(al * np.exp(-2j * np.pi * kk * tl / T) for tl, al in zip(t, a)) / T
                    for kk in k])
    assert np.allclose(fourier_series(s, k), ref, atol=1e-14)


def test_pulse_fourier_series_matches_quadrature():
    T = 1.0
    s = FiniteStream(T, [0.3, 0.62], [1.0, -0.7], PulseShape.gaussian(0.015))
    for k in (-3, 0, 2, 5):
        f = lambda t, k=k: evaluate(s, np.array([t]))[0] * np.exp(-2j * np.pi * k * t / T)
        edges = [0.3 - 0.09, 0.3 + 0.09, 0.62 - 0.09, 0.62 + 0.09]
        re = quad(lambda t: f(t).real, 0, T, points=edges, limit=400, epsabs=1e-14)[0]
        im = quad(lambda t: f(t).imag, 0, T, points=edges, limit=400, epsabs=1e-14)[0]
        assert abs(fourier_series(s, [k])[0] - (re + 1j * im) / T) < 1e-12


def test_fourier_coefficients_checks_support():
    ok = FiniteStream(1.0, [0.5], [1.0], PulseShape.rectangle(0.1))
    v = fourier_coefficients(ok, IndexSet.symmetric(3))
    assert v[0] == pytest.approx(0.1)
    bad = FiniteStream(1.0, [0.97], [1.0], PulseShape.rectangle(0.1))
    with pytest.raises(SupportViolation):
        fourier_coefficients(bad, IndexSet.symmetric(3))


def test_validate_support_with_guard_band():
    s = FiniteStream(1.0, [0.05, 0.5], [1, 1], PulseShape.rectangle(0.02))
    assert validate_support(s, 0.03).ok
    r = validate_support(s, 0.05)
    assert not r.ok and r.offenders[0][:2] == (0, 0)
    d = FiniteStream(1.0, [0.0, 0.99], [1, 1])
    assert validate_support(d).ok
    assert not validate_support(d, 0.01).ok


def test_evaluate_is_zero_outside_period():
    s = FiniteStream(1.0, [0.5], [2.0], PulseShape.rectangle(0.2))
    v = evaluate(s, [-0.5, 0.45, 0.55, 1.5])
    assert v.tolist() == [0, 2, 2, 0]


def test_periods_and_shift_invariant_stream():
    s = InfiniteStream.shift_invariant(1.0, [0.1, 0.4], [[1, 2], [3, 4], [5, 6]])
    assert s.M == 3 and s.period(1).amplitudes.tolist() == [3, 4]
    X = fourier_series_periods(s, np.arange(-2, 3))
    for m in range(3):
        assert np.allclose(X[:, m], fourier_series(s.period(m), np.arange(-2, 3)))
    with pytest.raises(ValueError):
        InfiniteStream(1.0, 1, (([0.1, 0.2], [1, 1]),))


def test_text_round_trip():
    s = FiniteStream(2.0, [0.1, 1.3], [1 + 2j, -0.5], PulseShape.gaussian(0.01))
    back = stream_from_text(stream_to_text(s))
    assert isinstance(back, FiniteStream)
    assert np.array_equal(back.delays, s.delays) and np.array_equal(back.amplitudes, s.amplitudes)
    assert back.pulse == s.pulse and back.period_T == 2.0
    inf = InfiniteStream.shift_invariant(1.0, [0.2], [[1.0], [2.0]])
    back = stream_from_text(stream_to_text(inf))
    assert isinstance(back, InfiniteStream) and back.M == 2


@settings(max_examples=50, deadline=None)
@given(t=st.floats(0.05, 0.6), tau=st.floats(0.0, 0.3), k=st.integers(-20, 20),
       T=st.sampled_from([1.0, 3.7, 1e6]))
def test_delay_shift_is_a_phase_ramp(t, tau, k, T):
    s = FiniteStream(T, [t * T], [1.3], PulseShape.dirac())
    x0 = fourier_series(s, [k])[0]
    x1 = fourier_series(s.shifted(tau * T), [k])[0]
    assert abs(x1 - x0 * np.exp(-2j * np.pi * k * tau)) < 1e-9 * abs(x0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.1, 0.9), min_size=1, max_size=5, unique=True),
       st.integers(1, 12))
def test_real_stream_coefficients_are_conjugate_symmetric(delays, k):
    s = FiniteStream(1.0, delays, np.linspace(0.5, 1.5, len(delays)), PulseShape.gaussian(0.01))
    x = fourier_series(s, [k, -k])
    assert abs(x[1] - np.conj(x[0])) < 1e-12
