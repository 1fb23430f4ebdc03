"""Cross-view consistency filtering and depth-map fusion into a point cloud.

A reference pixel survives filtering when enough source views agree with it:
its 3D point, looked up in a source depth map and projected back, must land
within a pixel tolerance of where it started and at a consistent depth.
Surviving pixels from all views are unprojected and optionally merged when
closer than a merge radius.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost_volume import DepthMap
from .errors import InsufficientViews
from .geometry import CameraView

MERGE_NEIGHBOR_CELLS = [
    (dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)
]


@dataclass(frozen=True)
class ConsistencyThresholds:
    max_reproj_err: float = 1.0
    max_rel_depth_diff: float = 0.01
    min_consistent_views: int = 2
    min_confidence: float = 0.3

    def __post_init__(self):
        if self.max_reproj_err <= 0 or self.max_rel_depth_diff <= 0:
            raise ValueError("thresholds must be positive")
        if self.min_consistent_views < 1:
            raise ValueError("min_consistent_views must be >= 1")


@dataclass(frozen=True)
class PointCloud:
    """Fused 3D points with color and originating view id."""

    xyz: np.ndarray
    colors: np.ndarray
    view_ids: np.ndarray

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        colors = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
        ids = np.asarray(self.view_ids, dtype=np.int32).reshape(-1)
        if not (len(xyz) == len(colors) == len(ids)):
            raise ValueError("points, colors and view ids must have equal length")
        if not np.all(np.isfinite(xyz)):
            raise ValueError("point coordinates must be finite")
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "colors", colors)
        object.__setattr__(self, "view_ids", ids)

    def __len__(self) -> int:
        return len(self.xyz)


def _unproject_grid(view: CameraView, depth: np.ndarray) -> np.ndarray:
    """World points for every pixel of a depth map, shape (H, W, 3)."""
    h, w = depth.shape
    k = view.intrinsics
    us, vs = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    cam = np.stack(
        [(us - k.cx) / k.fx * depth, (vs - k.cy) / k.fy * depth, depth], axis=-1
    )
    r, t = view.extrinsics.rotation, view.extrinsics.translation
    return (cam - t) @ r  # (cam - t) @ R == R^T @ (cam - t)


def _project_points(view: CameraView, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project (..., 3) world points; returns (u, v, z) with z the camera depth."""
    r, t = view.extrinsics.rotation, view.extrinsics.translation
    cam = pts @ r.T + t
    z = cam[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = view.intrinsics.fx * cam[..., 0] / z + view.intrinsics.cx
        v = view.intrinsics.fy * cam[..., 1] / z + view.intrinsics.cy
    return u, v, z


def geometric_consistency(
    depths: list[DepthMap],
    confidences: list[np.ndarray],
    views: list[CameraView],
    thresholds: ConsistencyThresholds,
) -> list[np.ndarray]:
    """Per-view keep masks from cross-view agreement.

    A pixel is kept when its confidence passes and at least
    `min_consistent_views` source views round-trip consistently: project the
    pixel's point into the source, read the source depth at the nearest
    pixel, unproject it back to 3D and reproject into the reference; the
    reprojection must land within `max_reproj_err` pixels and the
    reprojected depth within `max_rel_depth_diff` of the reference depth.
    """
    n = len(views)
    if n < 2:
        raise InsufficientViews(f"need >= 2 views, got {n}")
    if not (len(depths) == len(confidences) == n):
        raise ValueError("depths, confidences and views must align")

    world = [_unproject_grid(views[i], depths[i].values) for i in range(n)]
    masks = []
    for r in range(n):
        h, w = depths[r].shape
        us, vs = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
        d_ref = depths[r].values
        base = depths[r].valid & (confidences[r] >= thresholds.min_confidence) & (d_ref > 0)
        agree = np.zeros((h, w), dtype=np.int32)
        for s in range(n):
            if s == r:
                continue
            su, sv, sz = _project_points(views[s], world[r])
            sh, sw = depths[s].shape
            iu = np.rint(su).astype(np.intp)
            iv = np.rint(sv).astype(np.intp)
            inside = (sz > 0) & (iu >= 0) & (iu < sw) & (iv >= 0) & (iv < sh)
            iu = np.clip(iu, 0, sw - 1)
            iv = np.clip(iv, 0, sh - 1)
            d_src = depths[s].values[iv, iu]
            src_ok = inside & depths[s].valid[iv, iu] & (d_src > 0)

            # round-trip: unproject the matched source pixel, reproject to ref
            pts_src = _unproject_grid_at(views[s], iu, iv, d_src)
            ru, rv, rz = _project_points(views[r], pts_src)
            err = np.hypot(ru - us, rv - vs)
            with np.errstate(divide="ignore", invalid="ignore"):
                rel = np.abs(rz - d_ref) / d_ref
            ok = (
                src_ok
                & (rz > 0)
                & (err <= thresholds.max_reproj_err)
                & (rel <= thresholds.max_rel_depth_diff)
            )
            agree += ok
        masks.append(base & (agree >= thresholds.min_consistent_views))
    return masks


def _unproject_grid_at(
    view: CameraView, iu: np.ndarray, iv: np.ndarray, depth: np.ndarray
) -> np.ndarray:
    k = view.intrinsics
    cam = np.stack(
        [
            (iu.astype(np.float64) - k.cx) / k.fx * depth,
            (iv.astype(np.float64) - k.cy) / k.fy * depth,
            depth,
        ],
        axis=-1,
    )
    r, t = view.extrinsics.rotation, view.extrinsics.translation
    return (cam - t) @ r


def fuse(
    depths: list[DepthMap],
    masks: list[np.ndarray],
    images: list[np.ndarray],
    views: list[CameraView],
    merge_radius: float = 0.0,
) -> PointCloud:
    """Unproject every kept pixel and merge nearby multi-view duplicates.

    Points closer than `merge_radius` are averaged (position and color) via
    a spatial hash walked in a fixed view/pixel order, so the result is
    deterministic. A zero radius disables merging.
    """
    pts_list, col_list, id_list = [], [], []
    for i, (dm, mask, img, view) in enumerate(zip(depths, masks, images, views)):
        keep = mask & dm.valid & (dm.values > 0)
        if not keep.any():
            continue
        world = _unproject_grid(view, dm.values)
        ys, xs = np.nonzero(keep)
        pts_list.append(world[ys, xs])
        if img.ndim == 2:
            c = np.repeat(img[ys, xs][:, None], 3, axis=1)
        else:
            c = img[ys, xs]
        col_list.append(np.asarray(c, dtype=np.float64))
        vid = view.image_id if isinstance(view.image_id, int) else i
        id_list.append(np.full(len(ys), vid, dtype=np.int32))

    if not pts_list:
        return PointCloud(
            xyz=np.zeros((0, 3)), colors=np.zeros((0, 3), np.uint8), view_ids=np.zeros(0, np.int32)
        )
    pts = np.concatenate(pts_list)
    cols = np.concatenate(col_list)
    vids = np.concatenate(id_list)
    if merge_radius <= 0:
        return PointCloud(xyz=pts, colors=np.rint(cols).astype(np.uint8), view_ids=vids)

    inv = 1.0 / merge_radius
    cells = np.floor(pts * inv).astype(np.int64)
    grid: dict[tuple[int, int, int], list[int]] = {}
    seeds: list[np.ndarray] = []
    sums: list[np.ndarray] = []
    csums: list[np.ndarray] = []
    counts: list[int] = []
    owner_view: list[int] = []
    r2 = merge_radius * merge_radius
    for i in range(len(pts)):
        p = pts[i]
        cx, cy, cz = cells[i]
        target = -1
        for dx, dy, dz in MERGE_NEIGHBOR_CELLS:
            for j in grid.get((cx + dx, cy + dy, cz + dz), ()):
                d = seeds[j] - p
                if d @ d < r2:
                    target = j
                    break
            if target >= 0:
                break
        if target < 0:
            target = len(seeds)
            seeds.append(p)
            sums.append(p.copy())
            csums.append(cols[i].copy())
            counts.append(1)
            owner_view.append(int(vids[i]))
            grid.setdefault((cx, cy, cz), []).append(target)
        else:
            sums[target] += p
            csums[target] += cols[i]
            counts[target] += 1

    n = len(seeds)
    cnt = np.asarray(counts, dtype=np.float64)[:, None]
    xyz = np.asarray(sums) / cnt
    colors = np.rint(np.asarray(csums) / cnt).astype(np.uint8)
    return PointCloud(xyz=xyz, colors=colors, view_ids=np.asarray(owner_view, dtype=np.int32))
