"""Card image preprocessing: grayscale conversion and fixed-threshold binarization.

Pixel data is held in numpy arrays, 8-bit per channel, row-major. All
operations are pure; deeper bit depths are rejected rather than truncated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

DEFAULT_THRESHOLD = 127

# ITU-R BT.601 luma weights, the conventional choice for document imaging.
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class RasterImage:
    """A grayscale or RGB raster, ``pixels`` shaped (h, w) or (h, w, 3), uint8."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.dtype != np.uint8:
            raise DimensionError(f"expected uint8 pixel data, got {p.dtype}")
        if p.ndim == 2:
            pass
        elif p.ndim == 3 and p.shape[2] == 3:
            pass
        else:
            raise DimensionError(f"expected (h, w) or (h, w, 3) pixels, got shape {p.shape}")
        if p.shape[0] <= 0 or p.shape[1] <= 0:
            raise DimensionError(f"empty image: shape {p.shape}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else self.pixels.shape[2]


@dataclass(frozen=True)
class BinaryImage:
    """A {0,1}-valued raster, same dimensions as its source image."""

    bits: np.ndarray

    def __post_init__(self):
        b = self.bits
        if b.ndim != 2:
            raise DimensionError(f"expected (h, w) bit plane, got shape {b.shape}")
        if not np.isin(b, (0, 1)).all():
            raise DimensionError("binary image contains values outside {0, 1}")

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


def to_grayscale(img: RasterImage) -> RasterImage:
    """Collapse an RGB image to one luma channel.

    Each output pixel is round(0.299 R + 0.587 G + 0.114 B), clamped to [0, 255].
    """
    if img.channels != 3:
        raise DimensionError(f"to_grayscale needs a 3-channel image, got {img.channels}")
    luma = img.pixels.astype(np.float64) @ _LUMA_WEIGHTS
    gray = np.clip(np.round(luma), 0, 255).astype(np.uint8)
    return RasterImage(gray)


def binarize(img: RasterImage, threshold: int = DEFAULT_THRESHOLD) -> BinaryImage:
    """Map a grayscale image to {0,1}: pixel strictly above the threshold becomes 1."""
    if img.channels != 1:
        raise DimensionError(f"binarize needs a 1-channel image, got {img.channels}")
    if not 0 <= threshold <= 255:
        raise ValueError(f"threshold must be in [0, 255], got {threshold}")
    return BinaryImage((img.pixels > threshold).astype(np.uint8))


def render_binary(binary: BinaryImage) -> RasterImage:
    """Expand a binary image back to 8-bit pixels (1 -> 255, 0 -> 0) for the OCR engine."""
    return RasterImage((binary.bits * np.uint8(255)).astype(np.uint8))
