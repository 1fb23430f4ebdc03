"""Per-pixel depth ranges and variable-interval plane placement.

The finer stages replace the shared depth range with a per-pixel one,
centered on the previous stage's depth and one standard deviation wide on
each side. That range is first cut into equal steps; each plane is then
shifted by a fraction of the step given by a softmax over the planes'
standardized distances to the previous depth, which packs planes more
densely where the previous stage was confident. A `linear` mode drops the
standardization (softmax of raw distances) and exists only for comparison
runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost_volume import DepthMap, HypothesisPlanes
from .errors import InvalidCount, ShapeMismatch
from .range_adapt import DepthRange

OFFSET_MODES = ("zscore", "linear")


@dataclass(frozen=True)
class PixelRangeMap:
    """Per-pixel depth interval [d_min(x), d_max(x)], both H x W."""

    d_min: np.ndarray
    d_max: np.ndarray

    def __post_init__(self):
        if self.d_min.shape != self.d_max.shape:
            raise ShapeMismatch("d_min and d_max shapes differ")
        if not np.all(self.d_min > 0):
            raise ValueError("per-pixel d_min must be positive")
        if not np.all(self.d_max > self.d_min):
            raise ValueError("per-pixel range must have positive length")


def sigma_floor(stage_interval: float | np.ndarray) -> float:
    """Smallest usable sigma, relative to the mean partition step."""
    return max(1e-6, 1e-3 * float(np.mean(stage_interval)))


def pixelwise_range(
    depth: DepthMap,
    sigma: np.ndarray,
    bounds: DepthRange,
    floor: float | None = None,
) -> PixelRangeMap:
    """Per-pixel range depth +/- sigma, clamped into the stage bounds.

    Sigma is floored at `floor` (default: the package floor for a unit
    interval) so confident pixels still get a nondegenerate range; after
    clamping, ranges collapsed onto a bound are re-opened to 2*floor width.
    """
    if depth.shape != sigma.shape:
        raise ShapeMismatch(f"depth {depth.shape} vs sigma {sigma.shape}")
    if floor is None:
        floor = sigma_floor(1.0)
    s = np.maximum(sigma, floor)
    lo = np.clip(depth.values - s, bounds.d_min, bounds.d_max)
    hi = np.clip(depth.values + s, bounds.d_min, bounds.d_max)
    collapsed = hi - lo < 2 * floor
    if np.any(collapsed):
        center = np.clip(depth.values, bounds.d_min + floor, bounds.d_max - floor)
        lo = np.where(collapsed, center - floor, lo)
        hi = np.where(collapsed, center + floor, hi)
    return PixelRangeMap(d_min=lo, d_max=hi)


def equal_partition(bounds: DepthRange | PixelRangeMap, num_planes: int) -> HypothesisPlanes:
    """Cut a range into `num_planes` planes with a fixed step.

    The step is (d_max - d_min) / num_planes and plane j sits at
    d_min + j * step, so the top plane stays one step below d_max.
    """
    if num_planes < 2:
        raise InvalidCount(f"need at least 2 planes, got {num_planes}")
    j = np.arange(num_planes, dtype=np.float64)
    if isinstance(bounds, DepthRange):
        step = (bounds.d_max - bounds.d_min) / num_planes
        return HypothesisPlanes(values=bounds.d_min + j * step, interval=step)
    step = (bounds.d_max - bounds.d_min) / num_planes
    values = bounds.d_min[None, :, :] + j[:, None, None] * step[None, :, :]
    return HypothesisPlanes(values=values, interval=step)


def offsets(
    planes: HypothesisPlanes,
    prev_depth: DepthMap,
    sigma: np.ndarray,
    mode: str = "zscore",
    floor: float | None = None,
) -> np.ndarray:
    """Per-plane step weights: softmax over planes of the distance to the
    previous depth, standardized by sigma in `zscore` mode and raw in
    `linear` mode.

    Returns (D, H, W) values in (0, 1) summing to 1 at each pixel.
    """
    if mode not in OFFSET_MODES:
        raise ValueError(f"mode must be one of {OFFSET_MODES}, got {mode!r}")
    h, w = prev_depth.shape
    if sigma.shape != (h, w):
        raise ShapeMismatch(f"sigma {sigma.shape} vs depth {(h, w)}")
    grid = planes.grid(h, w)
    z = grid - prev_depth.values[None, :, :]
    if mode == "zscore":
        if floor is None:
            floor = sigma_floor(planes.interval)
        z = z / np.maximum(sigma, floor)[None, :, :]
    z = z - z.max(axis=0, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=0, keepdims=True)


def adjust_planes(planes: HypothesisPlanes, offset_volume: np.ndarray) -> HypothesisPlanes:
    """Shift every plane by its offset fraction of the partition step.

    Consecutive offsets differ by less than 1, so strict plane ordering is
    preserved and every shifted plane stays within one step of the original
    range.
    """
    d = planes.count
    if offset_volume.shape[0] != d:
        raise ShapeMismatch(f"offsets have {offset_volume.shape[0]} planes, expected {d}")
    if planes.mode == "per_pixel":
        if offset_volume.shape != planes.values.shape:
            raise ShapeMismatch(
                f"offsets {offset_volume.shape} vs planes {planes.values.shape}"
            )
        step = np.asarray(planes.interval)
        if step.ndim == 2:
            step = step[None, :, :]
        values = planes.values + step * offset_volume
    else:
        if offset_volume.ndim == 1:
            values = planes.values + planes.interval * offset_volume
        else:
            values = planes.values[:, None, None] + planes.interval * offset_volume
    return HypothesisPlanes(values=values, interval=planes.interval)
