"""Matched-filter correlation, peak picking and the offset/loss model.

The correlator output at lag ``tau`` is::

    gamma(tau) = (1/E) * sum_t r(t) * conj(x(t - tau))

with ``E`` the template energy, so a noiseless matched input peaks at exactly
1. A chirp template turns a frequency error ``df`` into a peak shift of
``-df/alpha`` and an energy loss of ``(1 - |shift|/T)^2``.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .waveform import ComplexSignal


@dataclass(frozen=True, eq=False)
class CorrelationResult:
    """Normalised correlation over every lag with any overlap.

    ``lags[k]`` is the shift (s) applied to the template's time axis, and
    ``values`` keeps the complex output for callers that need phase.
    ``bound[k]`` is the Cauchy-Schwarz limit on ``|values[k]|`` given the
    capture energy under the template at that lag.
    """

    lags: np.ndarray
    values: np.ndarray
    normalization_energy: float
    sample_rate: float
    bound: Optional[np.ndarray] = None

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.values)


@dataclass(frozen=True)
class PeakEstimate:
    time: float
    magnitude: float
    sample_index: int


def _next_fast_len(n: int) -> int:
    from scipy.fft import next_fast_len

    return next_fast_len(n)


def _full_lags(received: ComplexSignal, template: ComplexSignal) -> np.ndarray:
    n = template.n_samples
    m = np.arange(-(n - 1), received.n_samples)
    return received.t0 - template.t0 + m / received.sample_rate


def _check_pair(received: ComplexSignal, template: ComplexSignal) -> None:
    if received.sample_rate != template.sample_rate:
        raise ValueError(
            f"sample rate mismatch: received {received.sample_rate} Hz, "
            f"template {template.sample_rate} Hz"
        )
    if template.n_samples > received.n_samples:
        raise ValueError("template is longer than the received signal")


def _template_energy(template: ComplexSignal) -> float:
    e = float(np.vdot(template.samples, template.samples).real)
    if e == 0.0:
        raise ValueError("template has zero energy")
    return e


def _overlap_bound(received: ComplexSignal, template: ComplexSignal, energy: float) -> np.ndarray:
    n = template.n_samples
    power = np.abs(received.samples) ** 2
    csum = np.concatenate([[0.0], np.cumsum(power)])
    m = np.arange(-(n - 1), received.n_samples)
    hi = np.minimum(m + n, received.n_samples)
    lo = np.maximum(m, 0)
    window = np.maximum(csum[hi] - csum[lo], 0.0)
    return np.sqrt(window / energy)


def cross_correlate(received: ComplexSignal, template: ComplexSignal) -> CorrelationResult:
    """FFT-based correlation of ``received`` against ``template`` at every lag.

    The template energy normalises the output. Both signals must share a
    sample rate and the template may not be longer than the capture.
    """
    _check_pair(received, template)
    r = received.samples
    x = template.samples
    n_full = r.size + x.size - 1
    n_fft = _next_fast_len(n_full)
    energy = _template_energy(template)
    # correlation = convolution with the time-reversed conjugate template
    spec = np.fft.fft(r, n_fft) * np.fft.fft(np.conj(x[::-1]), n_fft)
    values = np.fft.ifft(spec)[:n_full] / energy
    return CorrelationResult(
        _full_lags(received, template), values, energy, received.sample_rate,
        _overlap_bound(received, template, energy),
    )


def cross_correlate_pair(received: ComplexSignal, template: ComplexSignal):
    """Correlate against ``template`` and its complex conjugate in one pass.

    The transform of ``conj(x)`` is the index-reversed conjugate of the
    transform of ``x``, so only one template FFT and one capture FFT are
    needed. Returns ``(up, down)`` results.
    """
    _check_pair(received, template)
    r = received.samples
    x = template.samples
    n_full = r.size + x.size - 1
    n_fft = _next_fast_len(n_full)
    energy = _template_energy(template)
    r_spec = np.fft.fft(r, n_fft)
    x_rev = np.fft.fft(np.conj(x[::-1]), n_fft)
    # for y = x*: fft(conj(y[::-1]))[k] = conj(fft(conj(x[::-1]))[-k])
    y_rev = np.conj(np.roll(x_rev[::-1], 1))
    lags = _full_lags(received, template)
    bound = _overlap_bound(received, template, energy)
    up = np.fft.ifft(r_spec * x_rev)[:n_full] / energy
    down = np.fft.ifft(r_spec * y_rev)[:n_full] / energy
    return (
        CorrelationResult(lags, up, energy, received.sample_rate, bound),
        CorrelationResult(lags, down, energy, received.sample_rate, bound),
    )


def parabolic_vertex(left: float, centre: float, right: float) -> Tuple[float, float]:
    """Offset (bins) and height of the parabola through three equally spaced points."""
    denom = 2.0 * centre - left - right
    if denom <= 0.0:
        return 0.0, centre
    delta = (right - left) / (2.0 * denom)
    return delta, centre + 0.25 * (right - left) * delta


def find_peak(corr: CorrelationResult, search_window: Optional[Tuple[float, float]] = None) -> PeakEstimate:
    """Largest magnitude inside ``search_window`` with parabolic refinement.

    The neighbours used for the three-point fit may lie just outside the
    window. With no window the whole lag range is searched. The interpolated
    height never exceeds the Cauchy-Schwarz bound of the three lags used.
    """
    mags = corr.magnitudes
    lags = corr.lags
    if search_window is None:
        idx = np.arange(mags.size)
    else:
        lo, hi = search_window
        if lo > hi:
            raise ValueError(f"search window ({lo}, {hi}) is reversed")
        idx = np.nonzero((lags >= lo) & (lags <= hi))[0]
        if idx.size == 0:
            raise ValueError(
                f"search window ({lo:.6g}, {hi:.6g}) s contains no lags "
                f"(range {lags[0]:.6g} to {lags[-1]:.6g} s)"
            )
    k = int(idx[np.argmax(mags[idx])])
    if 0 < k < mags.size - 1:
        delta, height = parabolic_vertex(mags[k - 1], mags[k], mags[k + 1])
        if corr.bound is not None:
            height = min(height, float(corr.bound[k - 1 : k + 2].max()))
    else:
        delta, height = 0.0, float(mags[k])
    dt = 1.0 / corr.sample_rate
    return PeakEstimate(float(lags[k] + delta * dt), float(height), k)


def predicted_shift(alpha: float, delta_f: float) -> float:
    """Peak displacement ``-delta_f/alpha`` caused by a frequency error."""
    if alpha == 0:
        raise ValueError("alpha = 0: a frequency error cannot be converted into a time shift")
    return -delta_f / alpha


@dataclass(frozen=True)
class DetectionLoss:
    linear: float
    db: float
    feasible: bool


def detection_loss(alpha: float, delta_f: float, duration: float) -> DetectionLoss:
    """Energy loss ``(1 - mu/|alpha|)^2`` with ``mu = |delta_f|/T``.

    When ``|alpha| <= mu`` the shifted peak leaves the template support; the
    loss is then 0 (``-inf`` dB) and ``feasible`` is False.
    """
    if duration <= 0:
        raise ValueError(f"duration must be > 0, got {duration!r}")
    mu = abs(delta_f) / duration
    if abs(alpha) <= mu:
        return DetectionLoss(0.0, -math.inf, False)
    linear = (1.0 - mu / abs(alpha)) ** 2
    return DetectionLoss(linear, 10.0 * math.log10(linear), True)


@dataclass(frozen=True)
class FrequencyOffsetScenario:
    delta_f: float
    alpha: float
    duration: float
    tau_hat: float
    mu: float
    loss_linear: float

    @classmethod
    def build(cls, delta_f: float, alpha: float, duration: float) -> "FrequencyOffsetScenario":
        tau = predicted_shift(alpha, delta_f)
        loss = detection_loss(alpha, delta_f, duration)
        return cls(delta_f, alpha, duration, tau, abs(delta_f) / duration, loss.linear)
