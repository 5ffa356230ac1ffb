"""Frequency-error-resilient chirp synchronization waveforms.

Synthesis, spectral-constraint optimisation, matched-filter detection,
paired up/down-chirp frequency-error estimation and Monte-Carlo evaluation.
All library functions work in SI units (s, Hz, Hz/s); the CLI speaks
kHz/us, us and kHz.
"""

from .correlate import (
    CorrelationResult,
    PeakEstimate,
    cross_correlate,
    detection_loss,
    find_peak,
    predicted_shift,
)
from .montecarlo import SimConfig, awgn_channel, degradation_sweep, link_budget, run_trials
from .optimize import ConstraintSet, InfeasibleError, OptimalPair, optimize_alpha
from .profile import load_profile
from .spectral import (
    NBIOT_MASK,
    SpectralMask,
    bandwidth_contour,
    mask_check,
    occupied_bandwidth,
    power_spectrum,
)
from .sync import DetectionError, SearchConfig, estimate_frequency_error, paired_detect, synchronize
from .waveform import (
    ChirpParams,
    ComplexSignal,
    conjugate_pair,
    synthesize_composite,
    synthesize_prototype,
)

__version__ = "0.1.0"

__all__ = [
    "ChirpParams", "ComplexSignal", "ConstraintSet", "CorrelationResult", "DetectionError",
    "InfeasibleError", "NBIOT_MASK", "OptimalPair", "PeakEstimate", "SearchConfig", "SimConfig",
    "SpectralMask", "awgn_channel", "bandwidth_contour", "conjugate_pair", "cross_correlate",
    "degradation_sweep", "detection_loss", "estimate_frequency_error", "find_peak", "link_budget",
    "load_profile", "mask_check", "occupied_bandwidth", "optimize_alpha", "paired_detect",
    "power_spectrum", "predicted_shift", "run_trials", "synchronize", "synthesize_composite",
    "synthesize_prototype",
]
