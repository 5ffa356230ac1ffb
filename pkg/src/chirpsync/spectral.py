"""Power spectrum, occupied bandwidth, bandwidth contours and mask compliance.

The power spectrum is ``|X(f)|^2`` of the time-bounded chirp, approximated by
a zero-padded DFT scaled by ``1/fs``. With that scaling the Riemann sum
``sum(psd) * bin_width`` equals the time-domain energy exactly (Parseval).

The estimate samples the chirp at the centres of the ``floor(T*fs)`` sample
cells, ``t = -T/2 + (n + 1/2)/fs``. That grid is symmetric about ``t = 0``,
so the reflections ``alpha -> -alpha`` (same spectrum) and ``beta -> -beta``
(mirrored spectrum) hold to rounding error; the half-open synthesis grid
breaks them by a few percent near the band edges.

Mask levels are read as dBc in a 1 kHz resolution bandwidth: the power that
falls in a 1 kHz window centred on ``f``, relative to the total waveform
power.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .waveform import (
    DEFAULT_SAMPLE_RATE,
    ChirpParams,
    check_sample_rate,
    n_samples_for,
    unbounded_chirp,
)

logger = logging.getLogger(__name__)

DEFAULT_ZERO_PAD = 64
DEFAULT_RBW = 1e3
AXIS_TOLERANCE = 1e6  # 1e-3 kHz/us


@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    """Sampled power spectrum on a uniform grid centred on 0 Hz.

    ``psd`` holds the squared magnitude of the Fourier transform at each bin
    centre, so ``psd.sum() * bin_width`` is the signal energy.
    """

    freqs: np.ndarray
    psd: np.ndarray
    bin_width: float
    energy: float

    @property
    def spectral_energy(self) -> float:
        return float(self.psd.sum() * self.bin_width)

    def to_dbc(self, rbw: Optional[float] = None) -> np.ndarray:
        """Spectrum in dB relative to total power.

        With ``rbw`` given, each bin holds the power captured by a boxcar of
        that width centred on it; otherwise the raw per-bin fraction is used.
        """
        if rbw is None:
            power = self.psd * self.bin_width
        else:
            power = smooth_psd(self.psd, self.bin_width, rbw) * rbw
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(power / self.spectral_energy)

    def peak_normalized_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.psd / self.psd.max())


def auto_sample_rate(params: ChirpParams, floor: float = DEFAULT_SAMPLE_RATE) -> float:
    """Smallest 100 kHz multiple that is both ``>= floor`` and alias-free."""
    required = params.min_sample_rate()
    if required <= floor:
        return floor
    return math.ceil(required / 1e5) * 1e5


def power_spectrum(
    params: ChirpParams,
    sample_rate: Optional[float] = None,
    zero_pad_factor: int = DEFAULT_ZERO_PAD,
) -> SpectrumEstimate:
    """Zero-padded DFT estimate of ``|X(f)|^2`` for the bounded chirp.

    Parameters
    ----------
    params : ChirpParams
    sample_rate : float, optional
        Defaults to 1.6 MHz, raised automatically for wide sweeps.
    zero_pad_factor : int
        Transform length as a multiple of the waveform length. The bin width
        is ``1/(T*zero_pad_factor)`` regardless of the sample rate.
    """
    if int(zero_pad_factor) != zero_pad_factor or zero_pad_factor < 1:
        raise ValueError(f"zero_pad_factor must be an integer >= 1, got {zero_pad_factor!r}")
    fs = auto_sample_rate(params) if sample_rate is None else float(sample_rate)
    check_sample_rate(params, fs)
    n = n_samples_for(params.duration, fs)
    t = (np.arange(n) - (n - 1) / 2) / fs  # cell centres, symmetric about 0
    samples = unbounded_chirp(params, t)
    n_fft = n * int(zero_pad_factor)
    # the time offset of the first sample only adds a linear phase to X(f)
    spec = np.fft.fftshift(np.fft.fft(samples, n_fft)) / fs
    freqs = np.fft.fftshift(np.fft.fftfreq(n_fft, d=1.0 / fs))
    psd = spec.real**2 + spec.imag**2
    energy = float(np.vdot(samples, samples).real) / fs
    return SpectrumEstimate(freqs=freqs, psd=psd, bin_width=fs / n_fft, energy=energy)


def smooth_psd(psd: np.ndarray, bin_width: float, rbw: float) -> np.ndarray:
    """Boxcar average over ``rbw`` (odd number of bins, circular)."""
    k = max(1, int(round(rbw / bin_width)))
    if k % 2 == 0:
        k += 1
    if k == 1:
        return psd.copy()
    half = k // 2
    padded = np.concatenate([psd[-half:], psd, psd[:half]])
    csum = np.concatenate([[0.0], np.cumsum(padded)])
    return (csum[k:] - csum[:-k]) / k


def _folded_energy(spec: SpectrumEstimate) -> np.ndarray:
    """Energy per ``|f|`` ring: element ``k`` holds bins at ``+k`` and ``-k``."""
    psd = spec.psd
    n = psd.size
    centre = n // 2  # index of f = 0 after fftshift
    pos = psd[centre:]
    neg = psd[:centre][::-1]
    rings = pos.copy()
    m = min(pos.size - 1, neg.size)
    rings[1 : m + 1] += neg[:m]
    if neg.size > m:
        rings = np.append(rings, neg[m:].sum())
    return rings * spec.bin_width


def occupied_bandwidth_from_spectrum(spec: SpectrumEstimate, sigma: float) -> float:
    if not 0.0 < sigma < 1.0:
        raise ValueError(f"sigma must lie in (0, 1), got {sigma!r}")
    rings = _folded_energy(spec)
    cum = np.cumsum(rings)
    k = int(np.searchsorted(cum, (1.0 - sigma) * cum[-1]))
    return 2.0 * k * spec.bin_width


def occupied_bandwidth(
    params: ChirpParams,
    sigma: float = 0.01,
    sample_rate: Optional[float] = None,
    zero_pad_factor: int = DEFAULT_ZERO_PAD,
) -> float:
    """Smallest ``W`` with at least ``1 - sigma`` of the energy in ``[-W/2, W/2]``.

    The band is symmetric about 0 Hz even when ``beta`` shifts the spectrum.
    Resolution is one frequency bin.
    """
    if not 0.0 < sigma < 1.0:
        raise ValueError(f"sigma must lie in (0, 1), got {sigma!r}")
    return occupied_bandwidth_from_spectrum(
        power_spectrum(params, sample_rate, zero_pad_factor), sigma
    )


@dataclass(frozen=True)
class SpectralMask:
    """Piecewise-constant emission limit in dBc over ``|f|``.

    ``segments`` holds ``(lower_hz, upper_hz, level_dbc)`` triples, sorted and
    non-overlapping; ``upper_hz`` may be ``inf``. Frequencies outside every
    segment are unconstrained.
    """

    segments: tuple

    def __post_init__(self):
        segs = tuple((float(lo), float(hi), float(level)) for lo, hi, level in self.segments)
        if not segs:
            raise ValueError("mask needs at least one segment")
        prev_hi = -math.inf
        for lo, hi, level in segs:
            if not (lo >= 0 and hi > lo):
                raise ValueError(f"bad segment bounds ({lo}, {hi})")
            if not math.isfinite(level):
                raise ValueError(f"mask level must be finite, got {level}")
            if lo < prev_hi:
                raise ValueError("mask segments must be sorted and non-overlapping")
            prev_hi = hi
        object.__setattr__(self, "segments", segs)

    @property
    def lowest_edge(self) -> float:
        return self.segments[0][0]

    @property
    def outermost_edge(self) -> float:
        return self.segments[-1][0]

    def level_at(self, freqs) -> np.ndarray:
        """Mask level per frequency, ``+inf`` where no segment applies."""
        af = np.abs(np.asarray(freqs, dtype=float))
        out = np.full(af.shape, np.inf)
        for lo, hi, level in self.segments:
            out[(af >= lo) & (af < hi)] = level
        return out


NBIOT_MASK = SpectralMask(((300e3, 500e3, -40.0), (500e3, math.inf, -50.0)))


@dataclass(frozen=True)
class MaskResult:
    passed: bool
    worst_margin_db: float
    worst_freq_hz: float

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "worst_margin_db": self.worst_margin_db,
            "worst_freq_hz": self.worst_freq_hz,
        }


def mask_check_spectrum(spec: SpectrumEstimate, mask: SpectralMask, rbw: float = DEFAULT_RBW) -> MaskResult:
    nyquist = -spec.freqs[0]
    if mask.outermost_edge >= nyquist:
        raise ValueError(
            f"sample rate {2 * nyquist:.6g} Hz cannot represent the mask segment starting at "
            f"{mask.outermost_edge:.6g} Hz; need more than {2 * mask.outermost_edge:.6g} Hz"
        )
    levels = mask.level_at(spec.freqs)
    constrained = np.isfinite(levels)
    dbc = spec.to_dbc(rbw)
    margin = levels[constrained] - dbc[constrained]
    i = int(np.argmin(margin))
    worst = float(margin[i])
    return MaskResult(worst >= 0.0, worst, float(spec.freqs[constrained][i]))


def mask_check(
    params: ChirpParams,
    mask: SpectralMask = NBIOT_MASK,
    sample_rate: Optional[float] = None,
    zero_pad_factor: int = DEFAULT_ZERO_PAD,
    rbw: float = DEFAULT_RBW,
) -> MaskResult:
    """Compare the ``rbw``-integrated spectrum against ``mask`` pointwise.

    Returns the pass flag, the smallest margin ``mask - level`` in dB and the
    frequency where it occurs.
    """
    fs = auto_sample_rate(params) if sample_rate is None else float(sample_rate)
    if fs <= 2 * mask.outermost_edge:
        raise ValueError(
            f"sample rate {fs:.6g} Hz cannot represent the mask segment starting at "
            f"{mask.outermost_edge:.6g} Hz; need more than {2 * mask.outermost_edge:.6g} Hz"
        )
    return mask_check_spectrum(power_spectrum(params, fs, zero_pad_factor), mask, rbw)


@dataclass(frozen=True, eq=False)
class FeasibleRegion:
    """Grid of ``(alpha, beta)`` points flagged inside a region.

    ``inside[i, j]`` refers to ``alphas[i]`` and ``betas[j]``. Both axes must
    be symmetric about zero; the flags are checked for the reflections
    ``alpha -> -alpha`` and ``beta -> -beta`` on construction.
    """

    alphas: np.ndarray
    betas: np.ndarray
    inside: np.ndarray
    kind: str
    resolution: tuple = field(default=(0.0, 0.0))
    boundary: np.ndarray = field(default=None)
    axis_extremum: Optional[float] = None

    def __post_init__(self):
        inside = np.asarray(self.inside, dtype=bool)
        if inside.shape != (self.alphas.size, self.betas.size):
            raise ValueError("inside flags do not match the grid shape")
        for axis, name in ((self.alphas, "alpha"), (self.betas, "beta")):
            if not np.allclose(axis, -axis[::-1], atol=1e-9 * max(1.0, np.abs(axis).max())):
                raise ValueError(f"{name} grid must be symmetric about zero")
        if not (
            np.array_equal(inside, inside[::-1, :]) and np.array_equal(inside, inside[:, ::-1])
        ):
            raise ValueError("region is not symmetric under alpha -> -alpha and beta -> -beta")
        object.__setattr__(self, "inside", inside)
        if self.boundary is None:
            object.__setattr__(self, "boundary", _boundary_points(self.alphas, self.betas, inside))

    @property
    def points(self) -> np.ndarray:
        ia, ib = np.nonzero(self.inside)
        return np.column_stack([self.alphas[ia], self.betas[ib]])

    def contains(self, alpha: float, beta: float) -> bool:
        """Membership of the nearest grid point."""
        i = int(np.argmin(np.abs(self.alphas - alpha)))
        j = int(np.argmin(np.abs(self.betas - beta)))
        return bool(self.inside[i, j])

    def intersect(self, other: "FeasibleRegion") -> "FeasibleRegion":
        if not (np.array_equal(self.alphas, other.alphas) and np.array_equal(self.betas, other.betas)):
            raise ValueError("regions live on different grids")
        return FeasibleRegion(
            self.alphas, self.betas, self.inside & other.inside, "intersection", self.resolution
        )


def _boundary_points(alphas, betas, inside) -> np.ndarray:
    padded = np.pad(inside, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    edge = inside & ~interior
    ia, ib = np.nonzero(edge)
    return np.column_stack([alphas[ia], betas[ib]])


def _symmetric_axis(limit: float, steps: int) -> np.ndarray:
    if steps < 3 or steps % 2 == 0:
        raise ValueError(f"grid steps must be odd and >= 3 so that 0 lies on the grid, got {steps}")
    half = np.linspace(0.0, limit, steps // 2 + 1)
    return np.concatenate([-half[:0:-1], half])


def bandwidth_surface(
    alphas: Sequence[float],
    betas: Sequence[float],
    duration: float,
    sigma: float = 0.01,
    zero_pad_factor: int = DEFAULT_ZERO_PAD,
) -> np.ndarray:
    """Occupied bandwidth over a grid, ``surface[i, j]`` for ``alphas[i]``, ``betas[j]``.

    Only the ``alpha >= 0, beta >= 0`` quadrant is computed; the spectrum is
    unchanged by ``alpha -> -alpha`` and mirrored by ``beta -> -beta``, and
    the symmetric band is blind to that mirror.
    """
    alphas = np.asarray(alphas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    cache = {}
    out = np.empty((alphas.size, betas.size))
    for i, a in enumerate(alphas):
        for j, b in enumerate(betas):
            key = (abs(a), abs(b))
            if key not in cache:
                cache[key] = occupied_bandwidth(
                    ChirpParams(key[0], key[1], duration), sigma, None, zero_pad_factor
                )
            out[i, j] = cache[key]
    return out


def axis_extremum(
    w_target: float,
    sigma: float,
    duration: float,
    lo: float,
    hi: float,
    tol: float = AXIS_TOLERANCE,
    zero_pad_factor: int = DEFAULT_ZERO_PAD,
) -> float:
    """Bisect for the largest ``alpha`` on ``beta = 0`` with bandwidth <= ``w_target``.

    ``lo`` must satisfy the target and ``hi`` must not.
    """

    def ok(a):
        return occupied_bandwidth(ChirpParams(a, 0.0, duration), sigma, None, zero_pad_factor) <= w_target

    if not ok(lo) or ok(hi):
        raise ValueError("axis bisection needs a satisfying lower and a violating upper bound")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def bandwidth_contour(
    w_target: float,
    sigma: float,
    duration: float,
    alpha_max: float,
    beta_max: float,
    steps: tuple = (41, 41),
    zero_pad_factor: int = DEFAULT_ZERO_PAD,
) -> FeasibleRegion:
    """Enclosure of the ``W_sigma(alpha, beta) = w_target`` contour.

    The grid spans ``[-alpha_max, alpha_max] x [-beta_max, beta_max]`` with
    ``steps`` points per axis (odd). The returned region flags every grid
    point whose occupied bandwidth is at most ``w_target``; its ``boundary``
    holds the contour points and ``axis_extremum`` the bisected ``alpha`` on
    ``beta = 0``.

    Raises
    ------
    ValueError
        If the enclosure touches the grid edge, i.e. the grid is too small.
    """
    if w_target <= 0:
        raise ValueError(f"w_target must be > 0, got {w_target!r}")
    alphas = _symmetric_axis(alpha_max, steps[0])
    betas = _symmetric_axis(beta_max, steps[1])
    surface = bandwidth_surface(alphas, betas, duration, sigma, zero_pad_factor)
    inside = surface <= w_target
    if inside[0, :].any() or inside[:, 0].any():
        raise ValueError(
            "bandwidth contour reaches the grid boundary; enlarge alpha_max/beta_max"
        )
    ia = np.nonzero(inside[:, betas.size // 2])[0]
    extremum = None
    if ia.size:
        i_last = ia.max()
        extremum = axis_extremum(
            w_target, sigma, duration, alphas[i_last], alphas[i_last + 1],
            zero_pad_factor=zero_pad_factor,
        )
    resolution = (float(alphas[1] - alphas[0]), float(betas[1] - betas[0]))
    logger.debug("contour: %d of %d grid points inside", inside.sum(), inside.size)
    return FeasibleRegion(alphas, betas, inside, "S2-enclosure", resolution, axis_extremum=extremum)
