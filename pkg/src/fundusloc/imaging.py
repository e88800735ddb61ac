"""Deterministic pixel-level primitives for fundus image processing.

Everything here is a pure function over immutable values: grayscale
conversion, bilinear rescaling, global (between-class variance) and
bright-core thresholding, binary morphology, 8-connected components.
Heavy loops run on the kernel backend selected in ``fundusloc.kernels``.

Conventions fixed across the toolkit:

* foreground is strict: a pixel is foreground iff ``value > threshold``;
* morphology treats everything outside the image as background;
* connectivity is 8-connected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image

from . import kernels
from .errors import DegenerateHistogram, InvalidChannelCount

LUMINANCE_WEIGHTS = (299, 587, 114)  # BT.601, scaled by 1000


def _readonly(arr: np.ndarray) -> np.ndarray:
    view = arr.view()
    view.flags.writeable = False
    return view


@dataclass(frozen=True)
class RasterImage:
    """Decoded 8-bit image, 1 channel (``(h, w)`` array) or 3 channels
    (``(h, w, 3)`` array, RGB order). Pixel data is frozen on construction."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(self.pixels)
        if p.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {p.dtype}")
        if p.ndim == 3 and p.shape[2] == 1:
            p = p[:, :, 0]
        if not (p.ndim == 2 or (p.ndim == 3 and p.shape[2] == 3)):
            raise ValueError(f"expected (h, w) or (h, w, 3) pixels, got shape {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("image must have positive dimensions")
        object.__setattr__(self, "pixels", _readonly(p))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3


@dataclass(frozen=True)
class BinaryMask:
    """One boolean per pixel, frozen on construction."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.ascontiguousarray(self.bits)
        if b.dtype != np.bool_:
            raise ValueError(f"bits must be bool, got {b.dtype}")
        if b.ndim != 2:
            raise ValueError(f"expected (h, w) bits, got shape {b.shape}")
        object.__setattr__(self, "bits", _readonly(b))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def foreground_count(self) -> int:
        return int(np.count_nonzero(self.bits))


@dataclass(frozen=True)
class StructuringElement:
    """Disk or square neighborhood centered on its origin."""

    shape: str
    radius: int

    def __post_init__(self):
        if self.shape not in ("disk", "square"):
            raise ValueError(f"shape must be 'disk' or 'square', got {self.shape!r}")
        if self.radius < 1:
            raise ValueError(f"radius must be >= 1, got {self.radius}")

    def offsets(self) -> np.ndarray:
        """(k, 2) array of (dy, dx) offsets, origin included."""
        return _se_offsets(self.shape, self.radius)


@lru_cache(maxsize=64)
def _se_offsets(shape: str, radius: int) -> np.ndarray:
    rng = range(-radius, radius + 1)
    if shape == "disk":
        offs = [(dy, dx) for dy in rng for dx in rng if dy * dy + dx * dx <= radius * radius]
    else:
        offs = [(dy, dx) for dy in rng for dx in rng]
    return _readonly(np.array(offs, dtype=np.int64))


@dataclass(frozen=True)
class Component:
    """One 8-connected foreground blob.

    ``centroid`` is sub-pixel (x, y); ``bbox`` is (x, y, w, h) in integer
    pixels; ``mean_intensity`` averages a reference grayscale image over
    the blob's pixels.
    """

    area: int
    centroid: tuple[float, float]
    bbox: tuple[int, int, int, int]
    mean_intensity: float


# -- decode ------------------------------------------------------------------

def load_image(path: str | Path) -> RasterImage:
    """Decode a PNG or JPEG file. 16-bit sources are right-shifted to 8-bit;
    palette and alpha variants are converted to plain RGB."""
    with Image.open(path) as im:
        if im.format not in ("PNG", "JPEG"):
            raise ValueError(f"unsupported format {im.format!r} (only PNG and JPEG)")
        if im.mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(im, dtype=np.uint32)
            arr = (arr >> 8).astype(np.uint8)
            return RasterImage(arr)
        if im.mode == "L":
            return RasterImage(np.asarray(im, dtype=np.uint8))
        im = im.convert("RGB")
        return RasterImage(np.asarray(im, dtype=np.uint8))


def save_image(img: RasterImage, path: str | Path) -> None:
    Image.fromarray(np.asarray(img.pixels)).save(path)


# -- channel handling ---------------------------------------------------------

def to_grayscale(img: RasterImage, channel_mode: str = "luminance") -> RasterImage:
    """Collapse a 3-channel image to 1 channel.

    ``luminance`` applies fixed BT.601 weights 0.299/0.587/0.114 with
    exact integer rounding (half away from zero); ``red`` and ``green``
    copy that channel unchanged.
    """
    if channel_mode not in ("luminance", "red", "green"):
        raise ValueError(f"unknown channel_mode {channel_mode!r}")
    if img.channels != 3:
        raise InvalidChannelCount(
            f"channel_mode {channel_mode!r} needs a 3-channel image, got {img.channels}"
        )
    p = img.pixels
    if channel_mode == "red":
        return RasterImage(p[:, :, 0].copy())
    if channel_mode == "green":
        return RasterImage(p[:, :, 1].copy())
    wr, wg, wb = LUMINANCE_WEIGHTS
    acc = (p[:, :, 0].astype(np.uint32) * wr
           + p[:, :, 1].astype(np.uint32) * wg
           + p[:, :, 2].astype(np.uint32) * wb
           + 500)
    return RasterImage((acc // 1000).astype(np.uint8))


# -- rescaling ----------------------------------------------------------------

def resize(img: RasterImage, target_w: int, target_h: int) -> RasterImage:
    """Bilinear rescale with independent x/y stretch (no letterboxing).

    Sampling uses half-pixel-centered coordinates clamped at the borders;
    output is deterministic for identical input.
    """
    if target_w < 1 or target_h < 1:
        raise ValueError("target dimensions must be positive")
    if target_w == img.width and target_h == img.height:
        return img
    src = img.pixels
    if src.ndim == 2:
        src = src[:, :, None]
    out = kernels.resize_bilinear(np.ascontiguousarray(src), target_h, target_w)
    if img.channels == 1:
        out = out[:, :, 0]
    return RasterImage(out)


# -- thresholding --------------------------------------------------------------

def histogram(img: RasterImage) -> np.ndarray:
    """256-bin intensity histogram of a 1-channel image."""
    if img.channels != 1:
        raise InvalidChannelCount("histogram needs a 1-channel image")
    return np.bincount(img.pixels.ravel(), minlength=256).astype(np.int64)


def otsu_from_histogram(hist: np.ndarray) -> int:
    """Threshold maximizing between-class variance over a 256-bin histogram.

    Comparison is carried out in exact integer arithmetic, so the result
    equals the definitional exhaustive argmax on every input; ties break
    toward the smallest threshold. Foreground is ``value > t``.
    """
    hist = np.asarray(hist, dtype=np.int64)
    if hist.shape != (256,):
        raise ValueError(f"expected 256 bins, got shape {hist.shape}")
    if int(np.count_nonzero(hist)) < 2:
        raise DegenerateHistogram("histogram has fewer than two occupied bins")

    counts = [int(c) for c in hist]
    total = sum(counts)
    total_sum = sum(i * c for i, c in enumerate(counts))

    # Between-class variance at t is (s0*w1 - s1*w0)^2 / (w0*w1); compare
    # candidates by cross-multiplication to stay exact.
    best_t = 0
    best_num = -1
    best_den = 1
    w0 = 0
    s0 = 0
    for t in range(255):
        w0 += counts[t]
        s0 += t * counts[t]
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        s1 = total_sum - s0
        diff = s0 * w1 - s1 * w0
        num = diff * diff
        den = w0 * w1
        if num * best_den > best_num * den:
            best_t = t
            best_num = num
            best_den = den
    if best_num < 0:
        raise DegenerateHistogram("no threshold separates two non-empty classes")
    return best_t


def otsu_threshold(img: RasterImage) -> int:
    """Global threshold for a 1-channel image; see ``otsu_from_histogram``."""
    return otsu_from_histogram(histogram(img))


def binarize(img: RasterImage, t: float) -> BinaryMask:
    """Foreground mask by the strict convention ``value > t``."""
    if img.channels != 1:
        raise InvalidChannelCount("binarize needs a 1-channel image")
    return BinaryMask(img.pixels > t)


def top_percentile_mean_threshold(img: RasterImage, p: float = 0.01) -> float:
    """Mean of the ``ceil(p * N)`` brightest pixels.

    The returned value is a real intensity; callers binarize with
    ``value > floor(threshold)``. Invariant under pixel permutation.
    """
    if img.channels != 1:
        raise InvalidChannelCount("top_percentile_mean_threshold needs a 1-channel image")
    if not 0 < p <= 1:
        raise ValueError(f"p must be in (0, 1], got {p}")
    flat = img.pixels.ravel()
    n = flat.size
    k = math.ceil(p * n)
    top = np.partition(flat, n - k)[n - k:]
    top.sort()  # fixed summation order: mean independent of pixel layout
    return float(top.astype(np.float64).mean())


# -- morphology -----------------------------------------------------------------

def _check_se_fits(mask: BinaryMask, se: StructuringElement) -> None:
    if 2 * se.radius + 1 > min(mask.height, mask.width):
        raise ValueError(
            f"structuring element (radius {se.radius}) does not fit in "
            f"{mask.width}x{mask.height} mask"
        )


def erode(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Keep a pixel iff the element translated there lies entirely in the
    foreground; outside the image counts as background."""
    _check_se_fits(mask, se)
    return BinaryMask(kernels.erode(mask.bits, se.offsets()))


def dilate(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Set a pixel iff the element translated there meets the foreground;
    outside the image counts as background."""
    _check_se_fits(mask, se)
    return BinaryMask(kernels.dilate(mask.bits, se.offsets()))


# -- connected components ---------------------------------------------------------

def connected_components(mask: BinaryMask, reference: RasterImage) -> list[Component]:
    """8-connected foreground blobs, sorted by area descending.

    Ties are made total by preferring higher mean intensity, then the
    smaller (y, x) centroid. ``reference`` supplies the intensities and
    must match the mask dimensions.
    """
    if reference.channels != 1:
        raise InvalidChannelCount("reference must be a 1-channel image")
    if (reference.height, reference.width) != (mask.height, mask.width):
        raise ValueError("reference dimensions must match the mask")
    labels, count = kernels.label_components(mask.bits)
    if count == 0:
        return []
    area, sum_x, sum_y, sum_val, x0, y0, x1, y1 = kernels.component_stats(
        labels, count, reference.pixels
    )
    comps = []
    for lab in range(1, count + 1):
        a = int(area[lab])
        comps.append(Component(
            area=a,
            centroid=(sum_x[lab] / a, sum_y[lab] / a),
            bbox=(int(x0[lab]), int(y0[lab]),
                  int(x1[lab] - x0[lab] + 1), int(y1[lab] - y0[lab] + 1)),
            mean_intensity=sum_val[lab] / a,
        ))
    comps.sort(key=lambda c: (-c.area, -c.mean_intensity, c.centroid[1], c.centroid[0]))
    return comps
