import math

import numpy as np
import pytest

from chirpsync.montecarlo import awgn_channel
from chirpsync.sync import (
    ALTERNATE,
    COMPOSITE,
    DetectionError,
    PairedPeaks,
    SearchConfig,
    detection_report,
    estimate_frequency_error,
    paired_detect,
    refine_timing,
    separation_window,
    synchronize,
    timing_by_shift,
)
from chirpsync.units import rate_from_khz_per_us
from chirpsync.waveform import ChirpParams, ComplexSignal, synthesize_composite, synthesize_prototype

FS = 1.6e6
SAMPLE = 1 / FS
ALPHA = rate_from_khz_per_us(0.481)
T_S = 390e-6
START = 300e-6  # burst start in the capture


def capture(df, delay=START, snr_db=math.inf, seed=0, sub=None):
    sub = sub or ChirpParams(ALPHA, 0.0, T_S)
    burst = synthesize_composite(sub, FS)
    return awgn_channel(
        burst, snr_db, delta_f=df, delay=delay, seed=seed,
        capture_duration=delay + 2 * burst.duration, filtered=False,
    )


def peaks_with_separation(d):
    return PairedPeaks(0.0, d, (1.0, 1.0), 1.0, (0.0, 0.0))


class TestEstimateFrequencyError:
    def test_examples(self):
        est = estimate_frequency_error(peaks_with_separation(390e-6), ALPHA, 780e-6)
        assert est.delta_f_hat == pytest.approx(0.0, abs=1e-9)
        est = estimate_frequency_error(peaks_with_separation(473.16e-6), ALPHA, 780e-6)
        assert est.delta_f_hat == pytest.approx(20e3, abs=5)
        est = estimate_frequency_error(peaks_with_separation(348.42e-6), ALPHA, 780e-6)
        assert est.delta_f_hat == pytest.approx(-10e3, abs=5)

    def test_collinear(self):
        ds = [350e-6, 390e-6, 455e-6]
        dfs = [estimate_frequency_error(peaks_with_separation(d), ALPHA, 780e-6).delta_f_hat for d in ds]
        slope1 = (dfs[1] - dfs[0]) / (ds[1] - ds[0])
        slope2 = (dfs[2] - dfs[1]) / (ds[2] - ds[1])
        assert slope1 == pytest.approx(ALPHA / 2, rel=1e-9)
        assert slope2 == pytest.approx(ALPHA / 2, rel=1e-9)

    def test_alternate_mode(self):
        est = estimate_frequency_error(peaks_with_separation(1e-3 + 41.58e-6), ALPHA, 1e-3, ALTERNATE)
        assert est.delta_f_hat == pytest.approx(10e3, abs=5)
        assert est.nominal_separation == 1e-3

    def test_bad_arguments(self):
        pk = peaks_with_separation(390e-6)
        with pytest.raises(ValueError, match="mode"):
            estimate_frequency_error(pk, ALPHA, 780e-6, "sideways")
        with pytest.raises(ValueError, match="alpha_dot"):
            estimate_frequency_error(pk, 0.0, 780e-6)
        with pytest.raises(ValueError, match="period"):
            estimate_frequency_error(pk, ALPHA, 0.0)


class TestPairedDetect:
    def test_no_offset(self):
        pk = paired_detect(capture(0.0), ChirpParams(ALPHA, 0.0, T_S))
        assert abs(pk.d_hat - T_S) <= SAMPLE
        assert abs(pk.t1 - START) <= SAMPLE
        assert pk.joint_metric == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("df,expected_us", [(20e3, 473.16), (-20e3, 306.84)])
    def test_offset_separation(self, df, expected_us):
        pk = paired_detect(capture(df), ChirpParams(ALPHA, 0.0, T_S))
        assert abs(pk.d_hat * 1e6 - expected_us) <= SAMPLE * 1e6
        lo, hi = separation_window(T_S, ALPHA, 20e3)
        assert lo <= pk.d_hat <= hi

    @pytest.mark.parametrize("df", [-15e3, 7e3, 20e3])
    def test_opposite_shifts(self, df):
        pk = paired_detect(capture(df), ChirpParams(ALPHA, 0.0, T_S))
        up_shift = pk.t1 - START
        down_shift = pk.t2 - (START + T_S)
        assert up_shift == pytest.approx(-df / ALPHA, abs=SAMPLE)
        assert abs(up_shift + down_shift) <= SAMPLE

    def test_noise_only_not_detected(self):
        rng = np.random.default_rng(3)
        noise = ComplexSignal(0.05 * (rng.standard_normal(4000) + 1j * rng.standard_normal(4000)), FS)
        with pytest.raises(DetectionError, match="threshold"):
            paired_detect(noise, ChirpParams(ALPHA, 0.0, T_S))

    def test_zero_alpha_rejected(self):
        with pytest.raises(ValueError):
            paired_detect(capture(0.0, sub=ChirpParams(0.0, 0.0, T_S)), ChirpParams(0.0, 0.0, T_S))

    def test_nonzero_beta(self):
        sub = ChirpParams(ALPHA, 20e3, T_S)
        pk, est, timing = synchronize(capture(10e3, sub=sub), sub)
        assert est.delta_f_hat == pytest.approx(10e3, abs=300)
        assert timing == pytest.approx(START, abs=SAMPLE)


@pytest.mark.parametrize("df", np.arange(-20e3, 20e3 + 1, 5e3))
def test_round_trip(df):
    peaks, est, timing = synchronize(capture(df), ChirpParams(ALPHA, 0.0, T_S))
    assert abs(est.delta_f_hat - df) <= 300
    assert abs(timing - START) <= SAMPLE


class TestTiming:
    def test_raw_t1_is_shifted(self):
        peaks, est, timing = synchronize(capture(20e3), ChirpParams(ALPHA, 0.0, T_S))
        assert (peaks.t1 - START) * 1e6 == pytest.approx(-41.58, abs=0.625)
        assert timing == pytest.approx(START, abs=SAMPLE)

    def test_forms_agree(self):
        peaks, est, timing = synchronize(capture(-12e3), ChirpParams(ALPHA, 0.0, T_S))
        assert refine_timing(peaks, est) == pytest.approx(timing_by_shift(peaks, est), abs=1e-12)

    def test_report(self):
        peaks, est, timing = synchronize(capture(5e3), ChirpParams(ALPHA, 0.0, T_S))
        rep = detection_report(peaks, est, timing)
        for key in ("detected", "t1_s", "t2_s", "d_hat_s", "delta_f_hat_hz", "corrected_timing_s", "joint_metric"):
            assert key in rep
        assert rep["d_hat_s"] == peaks.t2 - peaks.t1
        assert detection_report(None) == {"detected": False}


def test_alternate_mode_round_trip():
    sub = ChirpParams(ALPHA, 0.0, T_S)
    period = 1.2e-3
    up = synthesize_prototype(sub, FS).samples
    gap = int(round(period * FS)) - up.size
    start_n = 400
    samples = np.concatenate([np.zeros(start_n), up, np.zeros(gap), np.conj(up), np.zeros(300)])
    df = -12e3
    t = np.arange(samples.size) / FS
    rx = ComplexSignal(samples * np.exp(2j * np.pi * df * t), FS)
    peaks, est, timing = synchronize(rx, sub, SearchConfig(separation=period))
    assert est.mode == ALTERNATE
    assert abs(est.delta_f_hat - df) <= 300
    assert timing == pytest.approx(start_n / FS, abs=SAMPLE)


def test_detection_at_low_snr():
    pk, est, timing = synchronize(capture(15e3, snr_db=-5.0, seed=11), ChirpParams(ALPHA, 0.0, T_S))
    assert abs(est.delta_f_hat - 15e3) < 1e3
    assert abs(timing - START) < 2e-6


def test_estimate_mode_constants():
    assert COMPOSITE == "composite" and ALTERNATE == "alternate"
