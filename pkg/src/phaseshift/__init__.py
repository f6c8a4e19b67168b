"""Phase-shift event detection in oscillatory signals.

Instantaneous phase by complex demodulation, CUSUM and phase-derivative
change-point statistics with bootstrap calibration, coupled-oscillator
simulation, and evaluation harnesses (ROC, power-law ISI analysis).
"""

from .series import PhaseSeries, TimeSeries, wrap_phase
from .signals import (PhaseProfile, RosslerParams, gen_oscillator,
                      gen_shift_profile, mix_noise, poincare_phase,
                      simulate_rossler, snr_from_weight, weight_from_snr)
from .phase import (DemodConfig, acf_first_zero, complex_demodulate,
                    phase_bias_approx, phase_difference, straighten_phase,
                    theoretical_bias)
from .detect import (CUSUM, PD, DetectorConfig, NullModel, ShiftEvent,
                     block_bootstrap_critical, cusum_stat,
                     parametric_critical, pd_fixed_threshold_detect, pd_stat,
                     recursive_cusum_detect, threshold_pd_detect)
from .evaluation import (ConfusionCounts, RocCurve, accuracy, isi_powerlaw,
                         match_events, roc_curve, uniformity_test)
from .pipeline import METHODS, ParametricNullBank, detect_events, estimate_tau

__version__ = "0.1.0"
