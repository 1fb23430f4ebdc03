"""Pinhole cameras, plane-induced homographies, and image warping.

Conventions (fixed so tests can be bit-exact):
  - pixel centers sit at integer coordinates, x right, y down, row-major
    storage;
  - extrinsics map world to camera: X_cam = R @ X_world + t;
  - homographies map reference pixels to source pixels in homogeneous
    coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveDepth, PointBehindCamera, SingularIntrinsics

ORTHONORMAL_TOL = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got ({self.fx}, {self.fy})")
        if not (np.isfinite(self.cx) and np.isfinite(self.cy)):
            raise ValueError("principal point must be finite")

    @property
    def matrix(self) -> np.ndarray:
        """3x3 calibration matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def scaled(self, factor: float) -> "CameraIntrinsics":
        """Intrinsics of the same camera after resampling the image by `factor`.

        Uses the pixel-centers-at-integers convention: a 2x box downsample
        (factor 0.5) maps original coordinate u to (u - 0.5) / 2, so the
        principal point shifts as well as scales.
        """
        return CameraIntrinsics(
            fx=self.fx * factor,
            fy=self.fy * factor,
            cx=(self.cx + 0.5) * factor - 0.5,
            cy=(self.cy + 0.5) * factor - 0.5,
        )


@dataclass(frozen=True)
class CameraExtrinsics:
    """World-to-camera rigid transform: X_cam = rotation @ X_world + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        tr = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > ORTHONORMAL_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > ORTHONORMAL_TOL:
            raise ValueError("rotation must have determinant +1")

    @property
    def matrix(self) -> np.ndarray:
        """4x4 homogeneous world-to-camera matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates (-R^T t)."""
        return -self.rotation.T @ self.translation


@dataclass(frozen=True)
class CameraView:
    """A camera with an optional scene-unit depth-range hint."""

    intrinsics: CameraIntrinsics
    extrinsics: CameraExtrinsics
    depth_hint: tuple[float, float] | None = None
    image_id: int | str = 0

    def __post_init__(self):
        if self.depth_hint is not None:
            lo, hi = self.depth_hint
            if not (0 < lo < hi):
                raise ValueError(f"depth hint must satisfy 0 < min < max, got {self.depth_hint}")

    def scaled(self, factor: float) -> "CameraView":
        """Same pose, intrinsics rescaled for a resampled image."""
        return CameraView(
            intrinsics=self.intrinsics.scaled(factor),
            extrinsics=self.extrinsics,
            depth_hint=self.depth_hint,
            image_id=self.image_id,
        )


IDENTITY_EXTRINSICS = CameraExtrinsics(np.eye(3), np.zeros(3))


def project(view: CameraView, point: np.ndarray) -> tuple[float, float, float]:
    """Project a world point; returns (u, v, camera-frame depth).

    Raises PointBehindCamera when the point has nonpositive camera-frame z.
    """
    p = np.asarray(point, dtype=np.float64).reshape(3)
    cam = view.extrinsics.rotation @ p + view.extrinsics.translation
    z = cam[2]
    if z <= 0:
        raise PointBehindCamera(f"camera-frame z = {z}")
    k = view.intrinsics
    return (k.fx * cam[0] / z + k.cx, k.fy * cam[1] / z + k.cy, z)


def unproject(view: CameraView, u: float, v: float, depth: float) -> np.ndarray:
    """Inverse of `project`: pixel plus camera-frame depth back to a world point."""
    if depth <= 0:
        raise NonPositiveDepth(f"depth = {depth}")
    k = view.intrinsics
    cam = np.array([(u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth])
    return view.extrinsics.rotation.T @ (cam - view.extrinsics.translation)


def _intrinsics_inverse(k: CameraIntrinsics) -> np.ndarray:
    if k.fx == 0 or k.fy == 0:
        raise SingularIntrinsics("zero focal length")
    return np.array(
        [[1.0 / k.fx, 0.0, -k.cx / k.fx], [0.0, 1.0 / k.fy, -k.cy / k.fy], [0.0, 0.0, 1.0]]
    )


def homography_parts(ref: CameraView, src: CameraView) -> tuple[np.ndarray, np.ndarray]:
    """Depth-parameterized homography split: H(d) = A + B / d.

    A carries the rotational part, B the plane term for the fronto-parallel
    plane (normal (0,0,1) in the reference camera frame). Evaluating A + B/d
    for any d > 0 gives the reference-to-source pixel homography at depth d.
    """
    r_rel = src.extrinsics.rotation @ ref.extrinsics.rotation.T
    t_rel = src.extrinsics.translation - r_rel @ ref.extrinsics.translation
    k_src = src.intrinsics.matrix
    k_ref_inv = _intrinsics_inverse(ref.intrinsics)
    n = np.array([[0.0, 0.0, 1.0]])
    a = k_src @ r_rel @ k_ref_inv
    b = k_src @ (t_rel[:, None] @ n) @ k_ref_inv
    return a, b


def plane_homography(ref: CameraView, src: CameraView, d: float) -> np.ndarray:
    """Reference-to-source homography induced by the fronto-parallel plane at depth d."""
    if d <= 0:
        raise NonPositiveDepth(f"plane depth = {d}")
    a, b = homography_parts(ref, src)
    h = a + b / d
    if abs(np.linalg.det(h)) < 1e-15:
        raise SingularIntrinsics("degenerate homography")
    return h


def sample_bilinear(
    image: np.ndarray, xs: np.ndarray, ys: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Bilinearly sample `image` (H x W or H x W x C) at float coordinates.

    Returns (values, valid) where valid marks samples inside
    [0, W-1] x [0, H-1]; out-of-bounds samples are zero, not clamped.
    """
    squeeze = image.ndim == 2
    img = image[:, :, None] if squeeze else image
    h, w = img.shape[:2]
    valid = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)

    xc = np.clip(xs, 0.0, w - 1.0)
    yc = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xc).astype(np.intp)
    y0 = np.floor(yc).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = (xc - x0)[..., None]
    wy = (yc - y0)[..., None]

    top = img[y0, x0] * (1.0 - wx) + img[y0, x1] * wx
    bot = img[y1, x0] * (1.0 - wx) + img[y1, x1] * wx
    out = top * (1.0 - wy) + bot * wy
    out[~valid] = 0.0
    if squeeze:
        out = out[..., 0]
    return out, valid


def warp_map(src_image: np.ndarray, homography: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Warp a source image onto the reference grid through a 3x3 homography.

    For every reference pixel (u, v) the source is sampled bilinearly at
    H @ (u, v, 1). Returns (warped, valid_mask); samples falling outside the
    source image are masked invalid and zeroed.
    """
    if src_image.shape[0] < 2 or src_image.shape[1] < 2:
        raise ValueError("image must be at least 2x2")
    h, w = src_image.shape[:2]
    us, vs = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    denom = homography[2, 0] * us + homography[2, 1] * vs + homography[2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        xs = (homography[0, 0] * us + homography[0, 1] * vs + homography[0, 2]) / denom
        ys = (homography[1, 0] * us + homography[1, 1] * vs + homography[1, 2]) / denom
    bad = ~np.isfinite(xs) | ~np.isfinite(ys) | (denom <= 0)
    xs = np.where(bad, -1.0, xs)
    ys = np.where(bad, -1.0, ys)
    return sample_bilinear(src_image, xs, ys)
