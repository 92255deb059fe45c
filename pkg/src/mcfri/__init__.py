"""Multichannel sampling and reconstruction of pulse streams at the rate of innovation."""

__version__ = "0.1.0"

from .errors import (AuditFailed, DegenerateRootsWarning, DiracNeedsAnalytic, DiracNotEvaluable,
                     FilterConditionViolated, IllConditionedVandermondeWarning, MCFRIError,
                     OrderTooHigh, PulseOverlap, RankBelowOrder, RankDeficient,
                     RankDeficientAfterFailure, SupportViolation, ZeroCTFTOnGrid, ZeroDFTBin)
from .filters import (ChebyshevI, IdealOnGrid, SoSFilter, chebyshev_magnitude, freq_response,
                      grid_response, sos_time_value)
from .recovery import (RecoveryConfig, RecoveryResult, amplitudes_ls, annihilating_filter,
                       esprit_si, estimate_eta, match_delays, matrix_pencil, recover_fourier,
                       recover_stream, vandermonde)
from .sampler import (ChannelConfig, SampleMatrix, add_noise, sample_analytic,
                      sample_quadrature, sample_sos_single_channel)
from .signal_model import (FiniteStream, FourierVector, IndexSet, InfiniteStream, PulseShape,
                           evaluate, fourier_coefficients, fourier_series, stream_from_text,
                           stream_to_text, validate_support)
from .waveforms import (CosSin, Direct, MixingMatrix, PulseSequence, SoSDelayed,
                        audit_row_deletions, build_mixing_matrix, cyclic_generator,
                        decompose_awphi, failure_robust_spec, is_left_invertible,
                        sos_matrix_oracle, waveform_value)
from .experiments import ScenarioConfig, equivalent_snr_gap, load_config, preset, run

__all__ = [name for name in dir() if not name.startswith("_")]
