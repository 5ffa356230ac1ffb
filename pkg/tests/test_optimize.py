import numpy as np
import pytest

from chirpsync.optimize import (
    ConstraintSet,
    InfeasibleError,
    evaluate,
    optimize_alpha,
    region_from_grid,
    feasibility_grid,
    s1_feasible,
    s2_feasible,
    s3_feasible,
)
from chirpsync.spectral import occupied_bandwidth
from chirpsync.units import rate_from_khz_per_us
from chirpsync.waveform import ChirpParams

NBIOT = ConstraintSet()
SMALL = dict(alpha_steps=21, beta_steps=5)


def khz_us(a, b=0.0, t=780.0):
    return ChirpParams.from_display(a, b, t)


class TestS1:
    def test_thresholds(self):
        assert rate_from_khz_per_us(0.0256) == pytest.approx(NBIOT.s1_threshold, rel=2e-3)
        assert s1_feasible(rate_from_khz_per_us(0.03), NBIOT)
        assert not s1_feasible(NBIOT.s1_threshold, NBIOT)  # strict
        assert not s1_feasible(rate_from_khz_per_us(0.0256), NBIOT)
        short = ConstraintSet(duration=390e-6)
        assert s1_feasible(rate_from_khz_per_us(0.06), short)
        assert short.s1_threshold == pytest.approx(rate_from_khz_per_us(0.0512), rel=2e-3)
        assert s1_feasible(-rate_from_khz_per_us(0.06), short)


class TestS2S3:
    def test_s2_paper_optimum(self):
        assert s2_feasible(khz_us(0.251), NBIOT)

    def test_s2_examples(self):
        assert s2_feasible(khz_us(0.0), NBIOT)
        assert not s2_feasible(khz_us(0.30), NBIOT)

    def test_s3_examples(self):
        assert s3_feasible(khz_us(0.251), NBIOT)
        assert s3_feasible(khz_us(0.0), NBIOT)
        assert not s3_feasible(khz_us(2.0), NBIOT)

    def test_evaluate_consistent(self):
        ev = evaluate(khz_us(0.2), NBIOT)
        assert ev.feasible
        assert ev.occupied_bandwidth == occupied_bandwidth(khz_us(0.2), 0.01)


class TestConstraintSet:
    @pytest.mark.parametrize(
        "kwargs", [dict(sigma=0.0), dict(duration=-1.0), dict(beta_sign=0), dict(alpha_steps=1)]
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            ConstraintSet(**kwargs)

    def test_bounds(self):
        lo, hi = NBIOT.alpha_bounds
        assert lo == NBIOT.s1_threshold
        assert hi == pytest.approx(3 * 200e3 / 780e-6)
        assert NBIOT.beta_bounds == (0.0, 400e3)
        assert ConstraintSet(beta_sign=-1).beta_bounds == (-400e3, 0.0)


@pytest.fixture(scope="module")
def small_result():
    return optimize_alpha(ConstraintSet(**SMALL), return_grid=True)


class TestOptimizer:
    def test_matches_bandwidth_crossing(self, small_result):
        # oracle: the mask never binds below 0.7 kHz/us, so the optimum is the
        # beta = 0 occupied-bandwidth crossing, bisected independently here
        best, _ = small_result
        lo, hi = rate_from_khz_per_us(0.2), rate_from_khz_per_us(0.3)
        while hi - lo > 1e5:
            mid = 0.5 * (lo + hi)
            if occupied_bandwidth(ChirpParams(mid, 0.0, 780e-6), 0.01, zero_pad_factor=128) <= 200e3:
                lo = mid
            else:
                hi = mid
        assert best.alpha_hat == pytest.approx(lo, abs=2 * best.tolerance)
        assert best.beta_hat == 0.0
        assert best.binding_constraint == "S2"

    def test_local_optimality_certificate(self, small_result):
        best, _ = small_result
        cs = ConstraintSet(**SMALL)
        pad = 2 * cs.zero_pad_factor
        assert evaluate(ChirpParams(best.alpha_hat, best.beta_hat, cs.duration), cs, pad).feasible
        above = ChirpParams(best.alpha_hat + 2 * best.tolerance, best.beta_hat, cs.duration)
        assert not evaluate(above, cs, pad).feasible

    def test_partner_equivalent(self, small_result):
        best, _ = small_result
        cs = ConstraintSet(**SMALL)
        up, down = best.pair
        a, b = evaluate(up, cs), evaluate(down, cs)
        assert b.feasible
        assert abs(a.occupied_bandwidth - b.occupied_bandwidth) <= 1e-9 * a.occupied_bandwidth
        assert a.mask_margin_db == pytest.approx(b.mask_margin_db, abs=1e-9)

    def test_beta_reflection_invariance(self, small_result):
        best, _ = small_result
        flipped = optimize_alpha(ConstraintSet(beta_sign=-1, **SMALL))
        assert flipped.alpha_hat == best.alpha_hat
        assert flipped.beta_hat == -best.beta_hat

    def test_region_symmetric(self, small_result):
        _, region = small_result
        assert region.kind == "intersection"
        pts = {(round(a), round(b)) for a, b in region.points}
        assert pts == {(round(-a), round(-b)) for a, b in region.points}

    def test_report(self, small_result):
        d = small_result[0].to_dict()
        for key in ("alpha_hat_khz_per_us", "beta_hat_khz", "binding_constraint", "tolerance", "grid_spec"):
            assert key in d
        assert d["tolerance"] == pytest.approx(1e-3)
        assert d["grid_spec"]["alpha_khz_per_us"][2] == 21

    def test_infeasible_when_s1_too_strict(self):
        # |df_max|/T = 0.256 kHz/us already violates the 200 kHz bandwidth
        with pytest.raises(InfeasibleError, match="S1"):
            optimize_alpha(ConstraintSet(delta_f_max=200e3, **SMALL))

    def test_infeasible_when_threshold_above_ceiling(self):
        with pytest.raises(InfeasibleError, match="exceeds the search ceiling"):
            optimize_alpha(ConstraintSet(delta_f_max=1e6, **SMALL))

    def test_search_bound_label(self):
        # ceiling well inside the feasible set: the top grid point wins
        cs = ConstraintSet(alpha_upper=rate_from_khz_per_us(0.1), alpha_steps=5, beta_steps=2)
        best = optimize_alpha(cs)
        assert best.binding_constraint == "search-bound"
        assert best.alpha_hat == pytest.approx(rate_from_khz_per_us(0.1))


def test_grid_shape():
    cs = ConstraintSet(alpha_steps=4, beta_steps=3, zero_pad_factor=8)
    alphas, betas, evals = feasibility_grid(cs)
    assert len(evals) == 4 and len(evals[0]) == 3
    region = region_from_grid(alphas, betas, evals)
    assert region.inside.shape == (8, 5)
    assert np.array_equal(region.inside, region.inside[::-1, ::-1])
