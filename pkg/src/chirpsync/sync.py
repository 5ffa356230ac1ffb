"""Paired-chirp detection, frequency-error estimation and timing refinement.

A composite burst is an up-chirp of length ``T_s`` followed by its conjugate.
Two matched filters locate the halves at ``t1`` and ``t2``. A frequency error
``df`` moves them in opposite directions by ``df/alpha``, so the separation

    d_hat = t2 - t1 = T_s + 2*df/alpha

gives ``df = (alpha/2)*(d_hat - T_s)``, and the midpoint of the two peaks
recovers the burst start free of the shift.

Times ``t1``/``t2`` are on the capture's time axis: each is the instant the
first sample of the matching template lines up with the capture.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.ndimage import maximum_filter1d

from .correlate import CorrelationResult, cross_correlate, cross_correlate_pair, find_peak
from .waveform import ChirpParams, ComplexSignal, conjugate_pair, synthesize_prototype

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.15
COMPOSITE = "composite"
ALTERNATE = "alternate"


class DetectionError(RuntimeError):
    """No paired peak cleared the detection threshold."""


@dataclass(frozen=True)
class SearchConfig:
    delta_f_max: float = 20e3
    threshold: float = DEFAULT_THRESHOLD
    # nominal up-to-down separation; None means back-to-back halves (T_s)
    separation: Optional[float] = None


@dataclass(frozen=True)
class PairedPeaks:
    t1: float
    t2: float
    magnitudes: tuple
    joint_metric: float
    window: tuple

    @property
    def d_hat(self) -> float:
        return self.t2 - self.t1


@dataclass(frozen=True)
class SyncEstimate:
    delta_f_hat: float
    tau_hat: float
    alpha_dot: float
    mode: str
    nominal_separation: float


def _templates(sub_params: ChirpParams, sample_rate: float):
    up = synthesize_prototype(sub_params, sample_rate)
    return up, synthesize_prototype(conjugate_pair(sub_params), sample_rate)


def paired_correlations(received: ComplexSignal, sub_params: ChirpParams):
    """Up- and down-chirp correlator outputs, re-timed to template starts.

    With ``beta = 0`` the down template is the conjugate of the up template
    and both outputs come from a shared transform.
    """
    up_t, down_t = _templates(sub_params, received.sample_rate)
    if sub_params.beta == 0.0:
        up, down = cross_correlate_pair(received, up_t)
    else:
        up, down = cross_correlate(received, up_t), cross_correlate(received, down_t)
    # lag + template t0 = capture time of the template's first sample
    shift = up_t.t0
    return (
        CorrelationResult(up.lags + shift, up.values, up.normalization_energy, up.sample_rate, up.bound),
        CorrelationResult(down.lags + shift, down.values, down.normalization_energy, down.sample_rate, down.bound),
    )


def separation_window(nominal: float, alpha_dot: float, delta_f_max: float):
    slack = 2.0 * abs(delta_f_max) / abs(alpha_dot)
    return nominal - slack, nominal + slack


def _joint_statistic(up: CorrelationResult, down: CorrelationResult, lo: float, hi: float) -> np.ndarray:
    """``(|up[m]| + max |down| over [m + lo, m + hi]) / 2`` for every lag ``m``."""
    fs = up.sample_rate
    a, b = int(np.floor(lo * fs)), int(np.ceil(hi * fs))
    size = b - a + 1
    dmag = down.magnitudes
    # maximum_filter1d centres its window; shift it so lag m sees [m + a, m + b]
    centre = a + size // 2
    win_max = maximum_filter1d(dmag, size=size, mode="constant", cval=0.0)
    shifted = np.zeros_like(dmag)
    if centre >= 0:
        shifted[: dmag.size - centre] = win_max[centre:]
    else:
        shifted[-centre:] = win_max[: dmag.size + centre]
    return 0.5 * (up.magnitudes + shifted)


def paired_detect(
    received: ComplexSignal,
    sub_params: ChirpParams,
    search_cfg: SearchConfig = SearchConfig(),
) -> PairedPeaks:
    """Find the up-chirp peak ``t1`` and the down-chirp peak inside ``t1 + T_s +- 2*df_max/alpha``.

    The whole capture is searched for ``t1``, ranking each lag by the joint
    statistic of its up-chirp magnitude and the best down-chirp magnitude in
    its separation window. Both peaks are then refined by parabolic
    interpolation; the refined ``t2`` is held inside the window, so the
    implied frequency error never exceeds ``search_cfg.delta_f_max``.

    Raises
    ------
    DetectionError
        If the mean of the two peak magnitudes is below ``search_cfg.threshold``.
    """
    if sub_params.alpha == 0:
        raise ValueError("paired detection needs a nonzero chirp rate")
    up, down = paired_correlations(received, sub_params)
    nominal = sub_params.duration if search_cfg.separation is None else search_cfg.separation
    lo, hi = separation_window(nominal, sub_params.alpha, search_cfg.delta_f_max)
    joint_stat = _joint_statistic(up, down, lo, hi)
    k = int(np.argmax(joint_stat))
    dt = 1.0 / up.sample_rate
    first = find_peak(up, (up.lags[k] - 0.5 * dt, up.lags[k] + 0.5 * dt))
    window = (first.time + lo, first.time + hi)
    try:
        # one sample of slack so a peak sitting on the window edge keeps its true neighbour
        second = find_peak(down, (window[0] - dt, window[1] + dt))
    except ValueError as exc:
        raise DetectionError(f"down-chirp window falls outside the capture: {exc}") from None
    # keep d_hat inside the separation window, i.e. |df_hat| <= df_max
    t2 = min(max(second.time, window[0]), window[1])
    joint = 0.5 * (first.magnitude + second.magnitude)
    if joint < search_cfg.threshold:
        raise DetectionError(
            f"joint metric {joint:.3f} below threshold {search_cfg.threshold:.3f}"
        )
    return PairedPeaks(first.time, t2, (first.magnitude, second.magnitude), joint, window)


def estimate_frequency_error(
    peaks: PairedPeaks,
    alpha_dot: float,
    period: float,
    mode: str = COMPOSITE,
) -> SyncEstimate:
    """Frequency error from the measured peak separation.

    In ``composite`` mode ``period`` is the full composite length ``T`` and
    the nominal separation is ``T/2``. In ``alternate`` mode the halves are
    sent ``period`` apart and that is the nominal separation.
    """
    if alpha_dot == 0:
        raise ValueError("alpha_dot must be nonzero")
    if not period > 0:
        raise ValueError(f"period must be > 0, got {period!r}")
    if mode == COMPOSITE:
        nominal = period / 2
    elif mode == ALTERNATE:
        nominal = period
    else:
        raise ValueError(f"unknown mode {mode!r}; expected {COMPOSITE!r} or {ALTERNATE!r}")
    delta_f = 0.5 * alpha_dot * (peaks.d_hat - nominal)
    return SyncEstimate(delta_f, -delta_f / alpha_dot, alpha_dot, mode, nominal)


def timing_by_shift(peaks: PairedPeaks, estimate: SyncEstimate) -> float:
    """Burst start as ``t1 - tau_hat``."""
    return peaks.t1 - estimate.tau_hat


def refine_timing(peaks: PairedPeaks, estimate: SyncEstimate) -> float:
    """Burst start corrected for the frequency-induced shift.

    Uses the midpoint ``(t1 + t2 - nominal)/2``, where the two opposite
    shifts cancel. The ``t1 - tau_hat`` form is computed as a cross-check and
    any disagreement is logged.
    """
    midpoint = 0.5 * (peaks.t1 + peaks.t2 - estimate.nominal_separation)
    by_shift = timing_by_shift(peaks, estimate)
    if abs(midpoint - by_shift) > 1e-9:
        logger.warning("timing forms disagree by %.3g s", midpoint - by_shift)
    return midpoint


def detection_report(
    peaks: Optional[PairedPeaks],
    estimate: Optional[SyncEstimate] = None,
    corrected_timing: Optional[float] = None,
) -> dict:
    if peaks is None:
        return {"detected": False}
    out = {
        "detected": True,
        "t1_s": peaks.t1,
        "t2_s": peaks.t2,
        "d_hat_s": peaks.d_hat,
        "joint_metric": peaks.joint_metric,
    }
    if estimate is not None:
        out["delta_f_hat_hz"] = estimate.delta_f_hat
        out["tau_hat_s"] = estimate.tau_hat
        out["timing_discrepancy_s"] = (
            corrected_timing - timing_by_shift(peaks, estimate) if corrected_timing is not None else None
        )
    if corrected_timing is not None:
        out["corrected_timing_s"] = corrected_timing
    return out


def synchronize(
    received: ComplexSignal,
    sub_params: ChirpParams,
    search_cfg: SearchConfig = SearchConfig(),
):
    """Detect, estimate and refine in one call. Returns ``(peaks, estimate, timing)``."""
    peaks = paired_detect(received, sub_params, search_cfg)
    if search_cfg.separation is None:
        est = estimate_frequency_error(peaks, sub_params.alpha, 2 * sub_params.duration, COMPOSITE)
    else:
        est = estimate_frequency_error(peaks, sub_params.alpha, search_cfg.separation, ALTERNATE)
    return peaks, est, refine_timing(peaks, est)
