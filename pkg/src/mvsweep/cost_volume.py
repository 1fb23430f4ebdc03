"""Plane-sweep cost volumes: warp, aggregate, regularize, regress.

A matching stage warps each source view's features onto the depth hypothesis
planes of the reference view, aggregates the warped volumes with the
reference features into a variance cost (lower = better), box-filters each
depth slice, converts to a per-pixel probability distribution over planes by
a softmax on the negated cost, and regresses depth as the probability-
weighted mean plane (soft argmax) together with its standard deviation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    NonPositiveDepth,
    NonPositiveTemperature,
    NoSourceViews,
    ResolutionMismatch,
    ShapeMismatch,
)
from .features import FeatureMap
from .geometry import CameraView, homography_parts, sample_bilinear

# cost assigned to cells observed by fewer than two views, in normalized
# feature units; excluded from filtering averages
SENTINEL_COST = 1e6


@dataclass(frozen=True)
class HypothesisPlanes:
    """Ordered depth hypothesis values, global (D,) or per-pixel (D, H, W).

    `interval` is the partition step: a scalar for global planes, an H x W
    map for per-pixel planes.
    """

    values: np.ndarray
    interval: np.ndarray | float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        if vals.ndim not in (1, 3):
            raise ValueError(f"plane values must be (D,) or (D,H,W), got {vals.shape}")
        if not np.all(vals > 0):
            raise NonPositiveDepth("plane depths must be positive")
        if vals.shape[0] > 1 and not np.all(np.diff(vals, axis=0) > 0):
            raise ValueError("plane depths must be strictly increasing")
        if not np.all(np.asarray(self.interval) > 0):
            raise ValueError("interval must be positive")

    @property
    def mode(self) -> str:
        return "global" if self.values.ndim == 1 else "per_pixel"

    @property
    def count(self) -> int:
        return self.values.shape[0]

    def grid(self, height: int, width: int) -> np.ndarray:
        """Plane values broadcast to (D, height, width)."""
        if self.mode == "global":
            return np.broadcast_to(self.values[:, None, None], (self.count, height, width))
        if self.values.shape[1:] != (height, width):
            raise ShapeMismatch(
                f"per-pixel planes are {self.values.shape[1:]}, grid is {(height, width)}"
            )
        return self.values


@dataclass(frozen=True)
class CostVolume:
    """D x H x W matching costs plus the number of views seen per cell."""

    costs: np.ndarray
    valid_count: np.ndarray

    def __post_init__(self):
        if self.costs.shape != self.valid_count.shape:
            raise ValueError("costs and valid_count shapes differ")


@dataclass(frozen=True)
class DepthMap:
    """H x W depth values in scene units with a per-pixel validity mask."""

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        mask = np.asarray(self.valid, dtype=bool)
        if vals.shape != mask.shape or vals.ndim != 2:
            raise ValueError(f"bad depth map shapes {vals.shape} / {mask.shape}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "valid", mask)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def build_feature_volume(
    src: FeatureMap,
    ref_view: CameraView,
    src_view: CameraView,
    planes: HypothesisPlanes,
) -> tuple[np.ndarray, np.ndarray]:
    """Warp source features onto every hypothesis plane of the reference view.

    Returns (volume, valid) with volume (D, H, W, C) and valid (D, H, W).
    Intrinsics must already be scaled to the feature resolution; per-pixel
    planes must match it (ResolutionMismatch otherwise). Invalid samples are
    zero. Uses the depth-parameterized homography H(d) = A + B/d, evaluated
    per pixel when the planes are per-pixel.
    """
    h, w = src.height, src.width
    if planes.mode == "per_pixel" and planes.values.shape[1:] != (h, w):
        raise ResolutionMismatch(
            f"planes {planes.values.shape[1:]} vs features {(h, w)}"
        )
    a, b = homography_parts(ref_view, src_view)
    us, vs = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    ones = np.ones_like(us)
    pix = np.stack([us, vs, ones])  # (3, H, W)
    ax = np.tensordot(a, pix, axes=1)  # (3, H, W)
    bx = np.tensordot(b, pix, axes=1)

    depth_grid = planes.grid(h, w)
    volume = np.empty((planes.count, h, w, src.channels), dtype=np.float64)
    valid = np.empty((planes.count, h, w), dtype=bool)
    for j in range(planes.count):
        p = ax + bx / depth_grid[j]
        denom = p[2]
        with np.errstate(divide="ignore", invalid="ignore"):
            xs = p[0] / denom
            ys = p[1] / denom
        bad = ~np.isfinite(xs) | ~np.isfinite(ys) | (denom <= 0)
        xs = np.where(bad, -1.0, xs)
        ys = np.where(bad, -1.0, ys)
        volume[j], valid[j] = sample_bilinear(src.data, xs, ys)
    return volume, valid


def aggregate_variance(
    ref_feature: FeatureMap,
    volumes: list[tuple[np.ndarray, np.ndarray]],
) -> CostVolume:
    """Variance matching cost over the view set {reference, valid sources}.

    cost(j, x) = mean over channels of the population variance of the feature
    values across the views that observe cell (j, x). Cells seen by fewer
    than two views get SENTINEL_COST. Sum-based accumulation keeps the result
    independent of source ordering.
    """
    if not volumes:
        raise NoSourceViews("need at least one source feature volume")
    ref = ref_feature.data
    d = volumes[0][0].shape[0]
    h, w, c = ref.shape
    for vol, mask in volumes:
        if vol.shape != (d, h, w, c) or mask.shape != (d, h, w):
            raise ShapeMismatch(f"volume {vol.shape} does not match reference {(d, h, w, c)}")

    s = np.broadcast_to(ref, (d, h, w, c)).copy()
    s2 = np.broadcast_to(ref * ref, (d, h, w, c)).copy()
    n = np.ones((d, h, w), dtype=np.int32)
    for vol, mask in volumes:
        m = mask[..., None]
        s += vol * m
        s2 += vol * vol * m
        n += mask
    nf = n[..., None].astype(np.float64)
    mean = s / nf
    var = np.maximum(s2 / nf - mean * mean, 0.0)
    costs = var.mean(axis=3)
    costs[n < 2] = SENTINEL_COST
    return CostVolume(costs=costs, valid_count=n)


def _box_sum(a: np.ndarray, radius: int) -> np.ndarray:
    h, w = a.shape
    p = np.pad(a, radius)
    out = np.zeros_like(a)
    for dy in range(2 * radius + 1):
        for dx in range(2 * radius + 1):
            out += p[dy : dy + h, dx : dx + w]
    return out


def regularize(volume: CostVolume, radius: int = 2, passes: int = 2) -> CostVolume:
    """Box-filter each depth slice spatially, `passes` times.

    Sentinel cells are excluded from every average (the filter normalizes by
    the count of contributing in-bounds, non-sentinel neighbors) and are
    restored as sentinel afterwards.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0 or passes == 0:
        return volume
    costs = volume.costs.copy()
    ok = volume.valid_count >= 2
    for _ in range(passes):
        for j in range(costs.shape[0]):
            m = ok[j].astype(np.float64)
            num = _box_sum(costs[j] * m, radius)
            den = _box_sum(m, radius)
            with np.errstate(invalid="ignore"):
                filt = num / den
            costs[j] = np.where(ok[j], filt, SENTINEL_COST)
    costs[~ok] = SENTINEL_COST
    return CostVolume(costs=costs, valid_count=volume.valid_count)


def to_probability(volume: CostVolume, temperature: float = 1.0) -> np.ndarray:
    """Per-pixel softmax of -cost/temperature along the plane axis.

    Max-subtraction keeps the exponentials stable; sentinel costs end up with
    essentially zero probability. Returns (D, H, W) summing to 1 over planes.
    """
    if temperature <= 0:
        raise NonPositiveTemperature(f"temperature = {temperature}")
    logits = -volume.costs / temperature
    logits = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=0, keepdims=True)


def regress_depth(
    prob: np.ndarray, planes: HypothesisPlanes, valid: np.ndarray | None = None
) -> DepthMap:
    """Soft argmax: probability-weighted mean of the hypothesis planes."""
    d, h, w = prob.shape
    grid = planes.grid(h, w)
    if grid.shape != prob.shape:
        raise ShapeMismatch(f"probability {prob.shape} vs planes {grid.shape}")
    values = np.einsum("dhw,dhw->hw", prob, grid)
    if valid is None:
        valid = np.ones((h, w), dtype=bool)
    return DepthMap(values=values, valid=valid)


def sigma_map(prob: np.ndarray, planes: HypothesisPlanes, depth: DepthMap) -> np.ndarray:
    """Per-pixel standard deviation of the plane distribution around the depth.

    sigma(x) = sqrt(sum_j P_j(x) * (d_j(x) - L(x))^2).
    """
    d, h, w = prob.shape
    grid = planes.grid(h, w)
    if grid.shape != prob.shape or depth.shape != (h, w):
        raise ShapeMismatch("probability, planes and depth shapes disagree")
    dev = grid - depth.values[None, :, :]
    return np.sqrt(np.einsum("dhw,dhw->hw", prob, dev * dev))


def confidence_map(prob: np.ndarray) -> np.ndarray:
    """Probability mass in the 4-plane window around the most likely plane.

    The window is clipped at the volume ends (whole volume when D < 4), so a
    one-hot distribution scores 1 and a uniform one scores 4/D.
    """
    d = prob.shape[0]
    if d <= 4:
        return prob.sum(axis=0)
    peak = prob.argmax(axis=0)
    start = np.clip(peak - 1, 0, d - 4)
    csum = np.concatenate([np.zeros((1,) + prob.shape[1:]), np.cumsum(prob, axis=0)], axis=0)
    hi = np.take_along_axis(csum, (start + 4)[None], axis=0)[0]
    lo = np.take_along_axis(csum, start[None], axis=0)[0]
    return hi - lo
