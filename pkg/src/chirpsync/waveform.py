"""Quadratic-phase (chirp) waveform synthesis.

A prototype chirp is ``exp(j*pi*(alpha*t**2 + beta*t))`` restricted to
``-T/2 <= t < T/2``. Its instantaneous frequency is ``alpha*t + beta/2``.
The composite waveform is an up-chirp of length ``T_s`` followed directly by
its ``-alpha`` partner, giving a burst of length ``2*T_s``.

Samples live on the half-open grid ``t_n = -T/2 + n/fs`` with
``n = 0 .. floor(T*fs) - 1``, so back-to-back halves never repeat an endpoint.
"""

import math
from dataclasses import dataclass

import numpy as np

from .units import rate_from_khz_per_us, hz_from_khz, s_from_us

DEFAULT_SAMPLE_RATE = 1.6e6
MIN_SAMPLES = 8


@dataclass(frozen=True)
class ChirpParams:
    """Chirp rate ``alpha`` (Hz/s), linear-phase term ``beta`` (Hz) and duration (s)."""

    alpha: float
    beta: float
    duration: float

    def __post_init__(self):
        for name in ("alpha", "beta", "duration"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.duration <= 0:
            raise ValueError(f"duration must be > 0, got {self.duration!r}")

    @classmethod
    def from_display(cls, alpha_khz_per_us: float, beta_khz: float, t_us: float) -> "ChirpParams":
        return cls(
            rate_from_khz_per_us(alpha_khz_per_us), hz_from_khz(beta_khz), s_from_us(t_us)
        )

    @property
    def sweep_width(self) -> float:
        """Frequency span swept over the support, ``|alpha|*T``."""
        return abs(self.alpha) * self.duration

    def min_sample_rate(self) -> float:
        return 2.0 * (abs(self.alpha) * self.duration + abs(self.beta))


@dataclass(frozen=True, eq=False)
class ComplexSignal:
    """Uniformly sampled complex baseband signal.

    ``t0`` is the time of the first sample; sample ``n`` sits at ``t0 + n/fs``.
    The sample array is stored read-only.
    """

    samples: np.ndarray
    sample_rate: float
    t0: float = 0.0

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.complex128).reshape(-1)
        if arr.size == 0:
            raise ValueError("signal must contain at least one sample")
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise ValueError(f"sample_rate must be positive and finite, got {self.sample_rate!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def n_samples(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.sample_rate

    @property
    def energy(self) -> float:
        """Energy ``sum(|s|^2)/fs``; equals ``T`` for a unit-modulus chirp."""
        return float(np.vdot(self.samples, self.samples).real) / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> "ComplexSignal":
        return ComplexSignal(samples, self.sample_rate, self.t0)


def n_samples_for(duration: float, sample_rate: float) -> int:
    # tolerate products like 780e-6 * 1.6e6 = 1247.9999999999998
    return int(math.floor(duration * sample_rate + 1e-9))


def sample_times(duration: float, sample_rate: float) -> np.ndarray:
    n = n_samples_for(duration, sample_rate)
    return -duration / 2 + np.arange(n) / sample_rate


def chirp_phase(params: ChirpParams, t) -> np.ndarray:
    """Phase ``pi*(alpha*t^2 + beta*t)`` in radians (no support check)."""
    t = np.asarray(t, dtype=float)
    return np.pi * (params.alpha * t * t + params.beta * t)


def unbounded_chirp(params: ChirpParams, t) -> np.ndarray:
    """Evaluate the chirp at arbitrary times, ignoring the finite support."""
    return np.exp(1j * chirp_phase(params, t))


def check_sample_rate(params: ChirpParams, sample_rate: float) -> None:
    if not (sample_rate > 0 and math.isfinite(sample_rate)):
        raise ValueError(f"sample_rate must be positive and finite, got {sample_rate!r}")
    required = params.min_sample_rate()
    if sample_rate < required:
        raise ValueError(
            f"sample_rate {sample_rate:.6g} Hz is below 2*(|alpha|*T + |beta|) = "
            f"{required:.6g} Hz; the frequency sweep would alias"
        )
    if n_samples_for(params.duration, sample_rate) < MIN_SAMPLES:
        raise ValueError(
            f"duration*sample_rate must be >= {MIN_SAMPLES}, got "
            f"{params.duration * sample_rate:.3g}"
        )


def synthesize_prototype(params: ChirpParams, sample_rate: float = DEFAULT_SAMPLE_RATE) -> ComplexSignal:
    """Sample the time-bounded chirp on ``[-T/2, T/2)``.

    Parameters
    ----------
    params : ChirpParams
        Chirp rate, linear-phase coefficient and duration.
    sample_rate : float
        Sampling rate in Hz. Must be at least ``2*(|alpha|*T + |beta|)``.

    Returns
    -------
    ComplexSignal
        ``floor(T*fs)`` unit-modulus samples with ``t0 = -T/2``.
    """
    check_sample_rate(params, sample_rate)
    t = sample_times(params.duration, sample_rate)
    return ComplexSignal(unbounded_chirp(params, t), sample_rate, -params.duration / 2)


def conjugate_pair(params: ChirpParams) -> ChirpParams:
    """Return the partner ``<-alpha, beta, T>`` of an optimal pair."""
    return ChirpParams(-params.alpha, params.beta, params.duration)


def synthesize_composite(sub_params: ChirpParams, sample_rate: float = DEFAULT_SAMPLE_RATE) -> ComplexSignal:
    """Up-chirp of length ``T_s`` followed by its conjugate partner.

    ``sub_params.duration`` is the half length. The result spans
    ``[-T_s/2, 3*T_s/2)``, so the first half is centred on ``t = 0`` and the
    second on ``t = T_s``.
    """
    first = synthesize_prototype(sub_params, sample_rate)
    second = synthesize_prototype(conjugate_pair(sub_params), sample_rate)
    samples = np.concatenate([first.samples, second.samples])
    return ComplexSignal(samples, sample_rate, -sub_params.duration / 2)


def instantaneous_frequency(params: ChirpParams, t: float) -> float:
    if abs(t) > params.duration / 2:
        raise ValueError(
            f"t = {t!r} s lies outside the support [-{params.duration / 2}, {params.duration / 2}]"
        )
    return params.alpha * t + params.beta / 2
