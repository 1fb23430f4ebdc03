"""Classical multi-scale features: intensity, gradients, and census bits.

Stands in for a learned feature extractor. Each image yields a per-pixel
feature vector of [intensity, x-gradient, y-gradient] plus the census bits
of a square window, every channel normalized to zero mean and unit variance
over the image (constant channels stay all-zero). A four-level pyramid at
scales 1/8, 1/4, 1/2, 1 feeds the four matching stages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ImageTooSmall

MAX_CENSUS_BITS = 24
GRAY_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class FeatureMap:
    """Dense per-pixel features, H x W x C float64."""

    data: np.ndarray

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class FeaturePyramid:
    """Feature maps at scales 1/8, 1/4, 1/2, 1 of the (padded) input."""

    levels: tuple[FeatureMap, ...]

    def __post_init__(self):
        if len(self.levels) != 4:
            raise ValueError(f"pyramid must have 4 levels, got {len(self.levels)}")

    def __getitem__(self, k: int) -> FeatureMap:
        return self.levels[k]


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Collapse an H x W x 3 image to grayscale; pass H x W through unchanged."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        return img
    r, g, b = GRAY_WEIGHTS
    return r * img[:, :, 0] + g * img[:, :, 1] + b * img[:, :, 2]


def _census_offsets(window: int) -> list[tuple[int, int]]:
    half = window // 2
    offs = [
        (dy, dx)
        for dy in range(-half, half + 1)
        for dx in range(-half, half + 1)
        if not (dy == 0 and dx == 0)
    ]
    return offs[:MAX_CENSUS_BITS]


def _normalize_channels(feat: np.ndarray) -> np.ndarray:
    out = np.empty_like(feat)
    for c in range(feat.shape[2]):
        ch = feat[:, :, c]
        # exactly-rounded sums keep normalization invariant under pixel
        # permutation, which makes integer-shift equivariance bit-exact
        mean = math.fsum(ch.ravel()) / ch.size
        std = math.sqrt(math.fsum(((ch - mean) ** 2).ravel()) / ch.size)
        # zero-variance channels carry no signal; leave them at zero rather
        # than dividing by ~0
        out[:, :, c] = 0.0 if std < 1e-12 else (ch - mean) / std
    return out


def extract_features(image: np.ndarray, window: int = 5) -> FeatureMap:
    """Compute normalized intensity/gradient/census features for one image.

    `image` is H x W grayscale (color inputs are collapsed first). The census
    window must be odd; bits are 1 where the neighbor (edge-replicated at
    borders) exceeds the center pixel.
    """
    gray = to_grayscale(image)
    h, w = gray.shape
    if window % 2 != 1 or window < 3:
        raise ValueError(f"census window must be odd and >= 3, got {window}")
    if h < window or w < window:
        raise ImageTooSmall(f"image {h}x{w} smaller than census window {window}x{window}")

    gy, gx = np.gradient(gray)
    offsets = _census_offsets(window)
    half = window // 2
    padded = np.pad(gray, half, mode="edge")

    feat = np.empty((h, w, 3 + len(offsets)), dtype=np.float64)
    feat[:, :, 0] = gray
    feat[:, :, 1] = gx
    feat[:, :, 2] = gy
    for i, (dy, dx) in enumerate(offsets):
        shifted = padded[half + dy : half + dy + h, half + dx : half + dx + w]
        feat[:, :, 3 + i] = (shifted > gray).astype(np.float64)
    return FeatureMap(_normalize_channels(feat))


def downsample2x(image: np.ndarray) -> np.ndarray:
    """2x box-average downsample; requires even dimensions."""
    h, w = image.shape[:2]
    if h % 2 or w % 2:
        raise ValueError(f"dimensions must be even, got {h}x{w}")
    return 0.25 * (image[0::2, 0::2] + image[0::2, 1::2] + image[1::2, 0::2] + image[1::2, 1::2])


def pad_to_multiple(image: np.ndarray, multiple: int = 8) -> np.ndarray:
    """Edge-replicate pad on the bottom/right so dimensions divide `multiple`."""
    h, w = image.shape[:2]
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph == 0 and pw == 0:
        return image
    pad = ((0, ph), (0, pw)) + ((0, 0),) * (image.ndim - 2)
    return np.pad(image, pad, mode="edge")


def build_pyramid(image: np.ndarray, window: int = 5) -> FeaturePyramid:
    """Features at 1/8, 1/4, 1/2 and full resolution of the padded image."""
    gray = pad_to_multiple(to_grayscale(image), 8)
    scales = [gray]
    for _ in range(3):
        scales.append(downsample2x(scales[-1]))
    levels = tuple(extract_features(img, window) for img in reversed(scales))
    return FeaturePyramid(levels)
