"""Maximise ``|alpha|`` subject to the frequency-error, bandwidth and mask constraints.

S1 keeps the frequency-induced peak shift inside the waveform
(``|alpha| > df_max/T``), S2 caps the occupied bandwidth and S3 keeps the
spectrum under the emission mask. The search is a coarse ``(alpha, beta)``
feasibility grid followed by bisection on ``alpha`` along each beta slice.
Only ``alpha > 0, beta >= 0`` is searched; the constraint sets are unchanged
by either sign flip, so the optimum is reported as the pair ``<+-alpha, beta>``.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .spectral import (
    DEFAULT_ZERO_PAD,
    NBIOT_MASK,
    FeasibleRegion,
    SpectralMask,
    mask_check_spectrum,
    occupied_bandwidth_from_spectrum,
    power_spectrum,
)
from .units import rate_to_khz_per_us, hz_to_khz
from .waveform import ChirpParams

logger = logging.getLogger(__name__)

ALPHA_TOLERANCE = 1e6  # 1e-3 kHz/us


class InfeasibleError(ValueError):
    """The constraint sets do not intersect inside the search bounds."""


@dataclass(frozen=True)
class ConstraintSet:
    """Inputs to the constrained search, all in SI units."""

    delta_f_max: float = 20e3
    duration: float = 780e-6
    w_max: float = 200e3
    sigma: float = 0.01
    mask: SpectralMask = NBIOT_MASK
    alpha_steps: int = 61
    beta_steps: int = 21
    alpha_upper: Optional[float] = None
    beta_upper: Optional[float] = None
    beta_sign: int = 1
    zero_pad_factor: int = DEFAULT_ZERO_PAD
    tolerance: float = ALPHA_TOLERANCE

    def __post_init__(self):
        for name in ("delta_f_max", "duration", "w_max", "sigma", "tolerance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.beta_sign not in (1, -1):
            raise ValueError("beta_sign must be +1 or -1")
        if self.alpha_steps < 2 or self.beta_steps < 1:
            raise ValueError("grid needs at least 2 alpha steps and 1 beta step")

    @property
    def s1_threshold(self) -> float:
        return abs(self.delta_f_max) / self.duration

    @property
    def alpha_bounds(self) -> tuple:
        hi = self.alpha_upper if self.alpha_upper is not None else 3.0 * self.w_max / self.duration
        return self.s1_threshold, hi

    @property
    def beta_bounds(self) -> tuple:
        hi = self.beta_upper if self.beta_upper is not None else 2.0 * self.w_max
        return (0.0, hi) if self.beta_sign > 0 else (-hi, 0.0)

    def grid_spec(self) -> dict:
        a_lo, a_hi = self.alpha_bounds
        b_lo, b_hi = self.beta_bounds
        return {
            "alpha_khz_per_us": [rate_to_khz_per_us(a_lo), rate_to_khz_per_us(a_hi), self.alpha_steps],
            "beta_khz": [hz_to_khz(b_lo), hz_to_khz(b_hi), self.beta_steps],
            "zero_pad_factor": self.zero_pad_factor,
        }


@dataclass(frozen=True)
class Evaluation:
    s1: bool
    s2: bool
    s3: bool
    occupied_bandwidth: float
    mask_margin_db: float

    @property
    def feasible(self) -> bool:
        return self.s1 and self.s2 and self.s3


@dataclass(frozen=True)
class OptimalPair:
    alpha_hat: float
    beta_hat: float
    duration: float
    binding_constraint: str
    occupied_bandwidth: float
    mask_margin_db: float
    tolerance: float
    grid_spec: dict = field(default_factory=dict)

    @property
    def pair(self) -> tuple:
        return (
            ChirpParams(self.alpha_hat, self.beta_hat, self.duration),
            ChirpParams(-self.alpha_hat, self.beta_hat, self.duration),
        )

    def to_dict(self) -> dict:
        return {
            "alpha_hat_khz_per_us": rate_to_khz_per_us(self.alpha_hat),
            "beta_hat_khz": hz_to_khz(self.beta_hat),
            "binding_constraint": self.binding_constraint,
            "occupied_bandwidth_khz": hz_to_khz(self.occupied_bandwidth),
            "mask_margin_db": self.mask_margin_db,
            "tolerance": rate_to_khz_per_us(self.tolerance),
            "grid_spec": self.grid_spec,
        }


def s1_feasible(alpha: float, cs: ConstraintSet) -> bool:
    return abs(alpha) > cs.s1_threshold


def evaluate(params: ChirpParams, cs: ConstraintSet, zero_pad_factor: Optional[int] = None) -> Evaluation:
    """All three constraints from one spectrum estimate."""
    spec = power_spectrum(params, None, zero_pad_factor or cs.zero_pad_factor)
    obw = occupied_bandwidth_from_spectrum(spec, cs.sigma)
    mask = mask_check_spectrum(spec, cs.mask)
    return Evaluation(
        s1_feasible(params.alpha, cs), obw <= cs.w_max, mask.passed, obw, mask.worst_margin_db
    )


def s2_feasible(params: ChirpParams, cs: ConstraintSet) -> bool:
    return evaluate(params, cs).s2


def s3_feasible(params: ChirpParams, cs: ConstraintSet) -> bool:
    return evaluate(params, cs).s3


def feasibility_grid(cs: ConstraintSet):
    """Evaluate S1, S2, S3 on the coarse search grid.

    Returns ``(alphas, betas, evaluations)`` with ``evaluations[i][j]`` for
    ``alphas[i]`` and ``betas[j]``.
    """
    a_lo, a_hi = cs.alpha_bounds
    if a_hi <= a_lo:
        raise InfeasibleError(
            f"S1 threshold {rate_to_khz_per_us(a_lo):.4f} kHz/us exceeds the search ceiling "
            f"{rate_to_khz_per_us(a_hi):.4f} kHz/us"
        )
    alphas = np.linspace(a_lo, a_hi, cs.alpha_steps)
    betas = np.linspace(*cs.beta_bounds, cs.beta_steps)
    if cs.beta_sign < 0:
        betas = betas[::-1]  # order slices by |beta|
    evals = [[evaluate(ChirpParams(a, b, cs.duration), cs) for b in betas] for a in alphas]
    return alphas, betas, evals


def region_from_grid(alphas, betas, evals, kind: str = "intersection") -> FeasibleRegion:
    """Mirror a one-quadrant grid into a symmetric ``FeasibleRegion``."""
    flags = np.array([[e.feasible for e in row] for row in evals])
    a = np.abs(alphas)
    b = np.abs(betas)
    order_b = np.argsort(b)
    b, flags = b[order_b], flags[:, order_b]
    full_a = np.concatenate([-a[::-1], a])
    full_b = np.concatenate([-b[::-1][:-1], b]) if b[0] == 0 else np.concatenate([-b[::-1], b])
    fa = np.concatenate([flags[::-1], flags], axis=0)
    fb = np.concatenate([fa[:, ::-1][:, :-1], fa], axis=1) if b[0] == 0 else np.concatenate([fa[:, ::-1], fa], axis=1)
    res = (float(a[1] - a[0]) if a.size > 1 else 0.0, float(b[1] - b[0]) if b.size > 1 else 0.0)
    return FeasibleRegion(full_a, full_b, fb, kind, res)


def _binding(ev: Evaluation) -> str:
    failed = [name for name, ok in (("S2", ev.s2), ("S3", ev.s3)) if not ok]
    return "+".join(failed) if failed else "none"


def _refine_slice(lo: float, hi: float, beta: float, cs: ConstraintSet):
    """Bisect between feasible ``lo`` and infeasible ``hi`` at doubled zero padding."""
    pad = 2 * cs.zero_pad_factor
    ev_lo = evaluate(ChirpParams(lo, beta, cs.duration), cs, pad)
    ev_hi = evaluate(ChirpParams(hi, beta, cs.duration), cs, pad)
    if not ev_lo.feasible:
        return None
    if ev_hi.feasible:
        # the coarse grid rejected hi but the finer spectrum accepts it
        return hi, hi, ev_hi, ev_hi
    while hi - lo > cs.tolerance:
        mid = 0.5 * (lo + hi)
        ev = evaluate(ChirpParams(mid, beta, cs.duration), cs, pad)
        if ev.feasible:
            lo, ev_lo = mid, ev
        else:
            hi, ev_hi = mid, ev
    return lo, hi, ev_lo, ev_hi


def optimize_alpha(cs: ConstraintSet, return_grid: bool = False):
    """Largest ``|alpha|`` in S1 and S2 and S3.

    Ties between beta slices (within the bisection tolerance) go to the
    smaller ``|beta|``. The binding constraint is whichever of S2/S3 fails
    just above the optimum.

    Raises
    ------
    InfeasibleError
        If no grid point satisfies all three constraints.
    """
    alphas, betas, evals = feasibility_grid(cs)
    candidates = []
    for j, beta in enumerate(betas):
        feas = [evals[i][j].feasible for i in range(alphas.size)]
        if not any(feas):
            continue
        i = max(k for k, ok in enumerate(feas) if ok)
        if i == alphas.size - 1:
            ev = evals[i][j]
            candidates.append((alphas[i], j, beta, "search-bound", ev))
            continue
        refined = _refine_slice(alphas[i], alphas[i + 1], beta, cs)
        if refined is None:
            # grid point fails at the finer padding; fall back to the previous one
            continue
        lo, hi, ev_lo, ev_hi = refined
        candidates.append((lo, j, beta, _binding(ev_hi), ev_lo))
    if not candidates:
        raise InfeasibleError(
            "no (alpha, beta) satisfies S1, S2 and S3: S1 needs |alpha| > "
            f"{rate_to_khz_per_us(cs.s1_threshold):.4f} kHz/us but every such grid point violates "
            "the bandwidth or mask constraint"
        )
    best_alpha = max(c[0] for c in candidates)
    # candidates are ordered by |beta|; take the first within tolerance of the best
    alpha, _, beta, binding, ev = next(c for c in candidates if c[0] >= best_alpha - cs.tolerance)
    result = OptimalPair(
        alpha_hat=float(alpha),
        beta_hat=float(beta),
        duration=cs.duration,
        binding_constraint=binding,
        occupied_bandwidth=ev.occupied_bandwidth,
        mask_margin_db=ev.mask_margin_db,
        tolerance=cs.tolerance,
        grid_spec=cs.grid_spec(),
    )
    logger.info(
        "optimum alpha = +-%.4f kHz/us, beta = %.3f kHz, binding %s",
        rate_to_khz_per_us(alpha), hz_to_khz(beta), binding,
    )
    if return_grid:
        return result, region_from_grid(alphas, betas, evals)
    return result
