import math

import numpy as np
import pytest

from chirpsync.correlate import (
    CorrelationResult,
    DetectionLoss,
    FrequencyOffsetScenario,
    cross_correlate,
    cross_correlate_pair,
    detection_loss,
    find_peak,
    parabolic_vertex,
    predicted_shift,
)
from chirpsync.units import rate_from_khz_per_us
from chirpsync.waveform import ChirpParams, ComplexSignal, synthesize_prototype

FS = 1.6e6
SAMPLE = 1 / FS


def direct_correlation(r: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Brute-force sum over every lag with any overlap, normalised by template energy."""
    n, L = x.size, r.size
    out = np.empty(L + n - 1, dtype=complex)
    for k, m in enumerate(range(-(n - 1), L)):
        lo, hi = max(0, m), min(L, m + n)
        out[k] = np.vdot(x[lo - m : hi - m], r[lo:hi])
    return out / np.vdot(x, x).real


def shifted(template: ComplexSignal, df: float) -> ComplexSignal:
    return template.with_samples(template.samples * np.exp(2j * np.pi * df * template.times))


class TestCrossCorrelate:
    def test_matched_peak_is_one_at_zero_lag(self, prototype):
        x = synthesize_prototype(prototype, FS)
        corr = cross_correlate(x, x)
        k = int(np.argmax(corr.magnitudes))
        assert corr.lags[k] == 0.0
        assert corr.magnitudes[k] == pytest.approx(1.0, abs=1e-12)
        peak = find_peak(corr)
        assert abs(peak.time) <= 1 / (8 * FS)
        assert peak.magnitude <= 1.0

    def test_zeros(self, half_burst):
        x = synthesize_prototype(half_burst, FS)
        corr = cross_correlate(x.with_samples(np.zeros(x.n_samples)), x)
        assert np.all(corr.magnitudes == 0)

    def test_shifted_chirp(self, half_burst):
        x = synthesize_prototype(half_burst, FS)
        corr = cross_correlate(shifted(x, 20e3), x)
        peak = find_peak(corr)
        assert peak.time * 1e6 == pytest.approx(-41.58, abs=0.625)
        assert peak.magnitude == pytest.approx(1 - 41.58 / 390, abs=0.01)
        oracle = direct_correlation(shifted(x, 20e3).samples, x.samples)
        assert np.max(np.abs(corr.values - oracle)) <= 1e-9 * np.abs(oracle).max()

    def test_lag_axis_tracks_time_origins(self, rng):
        x = ComplexSignal(rng.standard_normal(64) + 1j * rng.standard_normal(64), FS, t0=-20e-6)
        r = ComplexSignal(np.concatenate([np.zeros(100), x.samples, np.zeros(50)]), FS, t0=1e-3)
        peak = find_peak(cross_correlate(r, x))
        # template start lines up with capture sample 100
        assert peak.time == pytest.approx(1e-3 + 100 / FS - x.t0, abs=1e-12)

    def test_pair_matches_separate(self, half_burst, rng):
        x = synthesize_prototype(half_burst, FS)
        r = ComplexSignal(rng.standard_normal(3000) + 1j * rng.standard_normal(3000), FS)
        up, down = cross_correlate_pair(r, x)
        assert np.allclose(up.values, cross_correlate(r, x).values, atol=1e-12)
        assert np.allclose(down.values, cross_correlate(r, x.with_samples(np.conj(x.samples))).values, atol=1e-12)

    def test_rate_mismatch(self, half_burst):
        x = synthesize_prototype(half_burst, FS)
        with pytest.raises(ValueError, match="sample rate mismatch"):
            cross_correlate(ComplexSignal(np.ones(2000), 2e6), x)

    def test_template_longer_than_capture(self, half_burst):
        x = synthesize_prototype(half_burst, FS)
        with pytest.raises(ValueError, match="longer"):
            cross_correlate(ComplexSignal(np.ones(10), FS), x)

    def test_zero_template(self):
        with pytest.raises(ValueError, match="zero energy"):
            cross_correlate(ComplexSignal(np.ones(10), FS), ComplexSignal(np.zeros(4), FS))


class TestFindPeak:
    def corr(self, mags):
        mags = np.asarray(mags, dtype=float)
        return CorrelationResult(np.arange(mags.size) / FS, mags.astype(complex), 1.0, FS)

    def test_symmetric_parabola(self):
        assert parabolic_vertex(0.5, 1.0, 0.5) == (0.0, 1.0)
        peak = find_peak(self.corr([0.1, 0.5, 1.0, 0.5, 0.1]))
        assert peak.time == pytest.approx(2 / FS)

    def test_offset_parabola(self):
        delta, height = parabolic_vertex(0.4, 1.0, 0.6)
        assert delta == pytest.approx(0.1)
        assert height == pytest.approx(1.0 + 0.25 * 0.2 * 0.1)
        peak = find_peak(self.corr([0.0, 0.4, 1.0, 0.6, 0.0]))
        assert peak.time == pytest.approx(2.1 / FS)

    def test_edge_peak_not_interpolated(self):
        peak = find_peak(self.corr([1.0, 0.5, 0.2]))
        assert peak.time == 0.0 and peak.magnitude == 1.0

    def test_window(self):
        c = self.corr([0.0, 0.9, 0.0, 0.3, 0.5, 0.3, 0.0])
        peak = find_peak(c, (2.5 / FS, 6 / FS))
        assert peak.sample_index == 4

    def test_empty_and_reversed_window(self):
        c = self.corr([0.0, 1.0, 0.0])
        with pytest.raises(ValueError, match="no lags"):
            find_peak(c, (10.0, 11.0))
        with pytest.raises(ValueError, match="reversed"):
            find_peak(c, (2 / FS, 0.0))

    def test_height_clamped_to_bound(self):
        c = CorrelationResult(np.arange(3) / FS, np.array([0.9, 1.0, 0.9], dtype=complex), 1.0, FS,
                              bound=np.ones(3))
        assert find_peak(c).magnitude == 1.0


@pytest.mark.parametrize("a_khz_us", [0.251, -0.251, 0.481, -0.481])
@pytest.mark.parametrize("df", [-20e3, -10e3, -5e3, 5e3, 10e3, 20e3])
def test_shift_and_loss_laws(a_khz_us, df):
    t_us = 780.0 if abs(a_khz_us) < 0.3 else 390.0
    p = ChirpParams.from_display(a_khz_us, 0.0, t_us)
    x = synthesize_prototype(p, FS)
    peak = find_peak(cross_correlate(shifted(x, df), x))
    tau = predicted_shift(p.alpha, df)
    assert abs(peak.time - tau) <= SAMPLE
    assert peak.magnitude == pytest.approx(1 - abs(tau) / p.duration, abs=0.01)
    loss_db = detection_loss(p.alpha, df, p.duration).db
    assert 20 * math.log10(peak.magnitude) == pytest.approx(loss_db, abs=0.1)


class TestOffsetModel:
    def test_predicted_shift(self):
        a1, a2 = rate_from_khz_per_us(0.251), rate_from_khz_per_us(0.481)
        assert predicted_shift(a1, 20e3) * 1e6 == pytest.approx(-79.68, abs=0.005)
        assert predicted_shift(a2, -20e3) * 1e6 == pytest.approx(41.58, abs=0.005)
        assert predicted_shift(a1, 0.0) == 0.0
        with pytest.raises(ValueError, match="alpha = 0"):
            predicted_shift(0.0, 1e3)

    def test_loss_examples(self):
        a = rate_from_khz_per_us(0.251)
        loss = detection_loss(a, 20e3, 780e-6)
        assert loss.linear == pytest.approx((1 - 79.681 / 780) ** 2, rel=1e-4)
        assert loss.linear == pytest.approx(0.806, abs=0.001)
        assert loss.db == pytest.approx(-0.94, abs=0.005)
        assert detection_loss(a, 0.0, 780e-6) == DetectionLoss(1.0, 0.0, True)
        mu = 20e3 / 780e-6
        edge = detection_loss(mu, 20e3, 780e-6)
        assert edge.linear == 0.0 and edge.db == -math.inf and not edge.feasible
        assert detection_loss(rate_from_khz_per_us(0.0256), 20e3, 780e-6).linear == 0.0

    def test_asymptote(self):
        T, df = 780e-6, 20e3
        mu = df / T
        vals = [detection_loss(k * mu, df, T).linear for k in (10, 100, 1000)]
        # at 10*mu the loss is exactly (1 - 1/10)^2 = 0.81, so that bound is met with equality
        for k, v in zip((10, 100, 1000), vals):
            assert v == pytest.approx((1 - 1 / k) ** 2, abs=1e-12)
        assert vals[0] >= 0.81 - 1e-12 and vals[1] > 0.98 and vals[2] > 0.998
        grid = np.linspace(1.01, 50, 200) * mu
        losses = [detection_loss(a, df, T).linear for a in grid]
        assert all(b >= a for a, b in zip(losses, losses[1:]))

    def test_bad_duration(self):
        with pytest.raises(ValueError):
            detection_loss(1e8, 1e3, 0.0)

    def test_scenario(self):
        s = FrequencyOffsetScenario.build(20e3, rate_from_khz_per_us(0.481), 390e-6)
        assert s.tau_hat * 1e6 == pytest.approx(-41.58, abs=0.005)
        assert s.loss_linear == pytest.approx((1 - 41.58 / 390) ** 2, rel=1e-4)
