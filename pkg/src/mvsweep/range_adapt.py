"""Adaptive all-pixel depth range from a coarse stage's depth and spread.

The coarse stage's extreme depth values bound the scene only approximately;
shifting each boundary by a calibrated multiple of the per-pixel standard
deviation at the extreme's position recovers a tighter, better-centered range:

    d_min = L(x_min) + alpha * sigma(x_min)
    d_max = L(x_max) + beta  * sigma(x_max)

Overlap against a ground-truth range is scored by two interval ratios: the
covered fraction of the true range and the useful fraction of the candidate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost_volume import DepthMap
from .errors import DegenerateRange, EmptyDepthMap, InsufficientData

DEPTH_FLOOR = 1e-6


@dataclass(frozen=True)
class DepthRange:
    d_min: float
    d_max: float

    def __post_init__(self):
        if not (0 < self.d_min < self.d_max):
            raise ValueError(f"need 0 < d_min < d_max, got [{self.d_min}, {self.d_max}]")

    @property
    def length(self) -> float:
        return self.d_max - self.d_min


@dataclass(frozen=True)
class RangeScalars:
    """Dimensionless boundary multipliers on sigma (alpha low, beta high)."""

    alpha: float = -1.0
    beta: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and np.isfinite(self.beta)):
            raise ValueError("scalars must be finite")


@dataclass(frozen=True)
class OverlapReport:
    """Range-overlap ratios: aog vs the true range, aos vs the candidate."""

    aog: float
    aos: float

    @property
    def f_score(self) -> float:
        if self.aog <= 0 or self.aos <= 0:
            return 0.0
        return 2.0 * self.aog * self.aos / (self.aog + self.aos)


def range_extremes(
    depth: DepthMap, robust_quantile: float = 0.0
) -> tuple[tuple[int, int], tuple[int, int], float, float]:
    """Positions and values of the min/max valid depths.

    Ties break to the first occurrence in row-major order. A positive
    `robust_quantile` q discards pixels outside the [q, 1-q] value quantiles
    before picking extremes (off by default). Returns
    (pos_min, pos_max, value_min, value_max) with positions as (row, col).
    """
    if not depth.valid.any():
        raise EmptyDepthMap("no valid pixels")
    mask = depth.valid
    if robust_quantile > 0:
        vals = depth.values[mask]
        lo_q, hi_q = np.quantile(vals, [robust_quantile, 1.0 - robust_quantile])
        trimmed = mask & (depth.values >= lo_q) & (depth.values <= hi_q)
        if trimmed.any():
            mask = trimmed
    lo = np.where(mask, depth.values, np.inf)
    hi = np.where(mask, depth.values, -np.inf)
    imin = int(np.argmin(lo))
    imax = int(np.argmax(hi))
    h, w = depth.shape
    pos_min = (imin // w, imin % w)
    pos_max = (imax // w, imax % w)
    return pos_min, pos_max, float(depth.values[pos_min]), float(depth.values[pos_max])


def adjust_range(
    depth: DepthMap,
    sigma: np.ndarray,
    scalars: RangeScalars,
    robust_quantile: float = 0.0,
) -> DepthRange:
    """Shift the extreme depths by alpha/beta times the local sigma.

    The lower bound is floored at DEPTH_FLOOR; a nonpositive-length result
    raises DegenerateRange.
    """
    pos_min, pos_max, val_min, val_max = range_extremes(depth, robust_quantile)
    d_min = max(val_min + scalars.alpha * float(sigma[pos_min]), DEPTH_FLOOR)
    d_max = val_max + scalars.beta * float(sigma[pos_max])
    if d_min >= d_max:
        raise DegenerateRange(f"[{d_min}, {d_max}] after adjustment")
    return DepthRange(d_min, d_max)


def calibrate_scalars(
    scenes: list[tuple[DepthMap, np.ndarray, DepthRange]],
) -> RangeScalars:
    """Least-squares fit of the boundary multipliers on calibration scenes.

    Each scene supplies a coarse depth map, its sigma map and the true range.
    The two 1-D problems decouple:
        alpha = sum s_i (gt_min_i - L_min_i) / sum s_i^2   (s_i = sigma at x_min)
    and symmetrically for beta. Raises InsufficientData when sigma vanishes
    at every extreme.
    """
    if not scenes:
        raise InsufficientData("no calibration scenes")
    num_a = den_a = num_b = den_b = 0.0
    for depth, sigma, gt in scenes:
        pos_min, pos_max, val_min, val_max = range_extremes(depth)
        s_min = float(sigma[pos_min])
        s_max = float(sigma[pos_max])
        num_a += s_min * (gt.d_min - val_min)
        den_a += s_min * s_min
        num_b += s_max * (gt.d_max - val_max)
        den_b += s_max * s_max
    if den_a == 0.0 or den_b == 0.0:
        raise InsufficientData("sigma is zero at every scene extreme")
    return RangeScalars(alpha=num_a / den_a, beta=num_b / den_b)


def overlap_metrics(gt: DepthRange, candidate: DepthRange) -> OverlapReport:
    """Interval-overlap ratios of a candidate range against the true one."""
    inter = min(gt.d_max, candidate.d_max) - max(gt.d_min, candidate.d_min)
    inter = max(inter, 0.0)
    return OverlapReport(aog=inter / gt.length, aos=inter / candidate.length)
