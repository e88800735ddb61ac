"""Rule-based optic disc localization.

Pipeline: rescale to a fixed working frame, grayscale, estimate the
fundus (retina) geometry by global thresholding, crop the rim fringe,
binarize at the bright-core threshold, erode away impulse noise and
small reflections, dilate to merge the remaining spots, select the
dominant blob, derive a disc circle, expand it, and map the enclosing
box back to original image coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import imaging
from .errors import ConfigError, DegenerateHistogram, NoCandidateRegion, RetinaNotFound
from .geometry import BoundingBox, Circle, enclosing_box
from .imaging import RasterImage, StructuringElement

__all__ = [
    "Circle",
    "BoundingBox",
    "LocalizerConfig",
    "DiscLocalization",
    "PipelineTrace",
    "estimate_retina_geometry",
    "crop_fringe",
    "circle_to_bbox",
    "localize_disc",
]


@dataclass(frozen=True)
class LocalizerConfig:
    """Every empirical tunable of the pipeline.

    Defaults are calibrated on the synthetic corpus shipped with the
    toolkit; real datasets may need overrides via a config file.
    """

    working_size: int = 1500
    channel_mode: str = "luminance"
    fringe_margin: float = 0.95          # fraction of the retina radius retained
    top_percentile: float = 0.01
    erode_se: StructuringElement = field(default_factory=lambda: StructuringElement("disk", 5))
    dilate_se: StructuringElement = field(default_factory=lambda: StructuringElement("disk", 15))
    min_blob_area: int = 100             # pixels, at working scale
    radius_expansion: float = 1.3

    def __post_init__(self):
        if self.working_size <= 0:
            raise ConfigError(f"working_size must be > 0, got {self.working_size}")
        if self.channel_mode not in ("luminance", "red", "green"):
            raise ConfigError(f"unknown channel_mode {self.channel_mode!r}")
        if not 0 < self.fringe_margin < 1:
            raise ConfigError(f"fringe_margin must be in (0, 1), got {self.fringe_margin}")
        if not 0 < self.top_percentile <= 1:
            raise ConfigError(f"top_percentile must be in (0, 1], got {self.top_percentile}")
        if self.min_blob_area < 0:
            raise ConfigError(f"min_blob_area must be >= 0, got {self.min_blob_area}")
        if not self.radius_expansion > 1:
            raise ConfigError(f"radius_expansion must be > 1, got {self.radius_expansion}")

    @classmethod
    def from_file(cls, path: str | Path) -> "LocalizerConfig":
        """Parse a flat ``key = value`` config file.

        Values are numbers, mode tokens, or structuring elements written
        as ``disk:5`` / ``square:3``. Unknown keys are errors. Lines that
        are blank or start with ``#`` are ignored.
        """
        known = {f.name: f for f in fields(cls)}
        overrides: dict = {}
        text = Path(path).read_text()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                overrides[key] = _parse_config_value(key, value)
            except ConfigError:
                raise
            except Exception as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
        try:
            return cls(**overrides)
        except ConfigError as exc:
            raise ConfigError(f"{path}: {exc}") from exc


def _parse_config_value(key: str, value: str):
    if key in ("working_size", "min_blob_area"):
        return int(value)
    if key in ("fringe_margin", "top_percentile", "radius_expansion"):
        return float(value)
    if key == "channel_mode":
        return value
    if key in ("erode_se", "dilate_se"):
        shape, sep, radius = value.partition(":")
        if not sep:
            raise ConfigError(f"expected 'disk:R' or 'square:R', got {value!r}")
        return StructuringElement(shape.strip(), int(radius))
    raise ConfigError(f"unknown key {key!r}")


@dataclass(frozen=True)
class PipelineTrace:
    """Optional diagnostics collected during localization."""

    foreground_after_binarize: int
    foreground_after_erode: int
    foreground_after_dilate: int
    candidate_areas: tuple[int, ...]
    working_threshold: float


@dataclass(frozen=True)
class DiscLocalization:
    """Localization result in original-image coordinates.

    ``circle`` is the expanded disc circle; ``box`` is its enclosing
    axis-aligned box, clipped to the image; ``retina`` is the estimated
    fundus circle; ``working_scale`` holds the per-axis factors that map
    working-frame coordinates back to the original image.
    """

    circle: Circle
    box: BoundingBox
    retina: Circle
    working_scale: tuple[float, float]
    trace: PipelineTrace | None = None

    def to_dict(self, image_id: str | None = None) -> dict:
        d: dict = {}
        if image_id is not None:
            d["image_id"] = image_id
        d["box"] = self.box.to_dict()
        d["circle"] = self.circle.to_dict()
        d["retina"] = self.retina.to_dict()
        return d


def estimate_retina_geometry(gray: RasterImage) -> Circle:
    """Approximate the fundus as a circle.

    The image is binarized at the global between-class-variance threshold,
    the largest component is taken as the retina, and the circle is its
    centroid with radius ``sqrt(area / pi)``. The area-derived radius is
    insensitive to thin bright arcs attached at the rim.
    """
    t = imaging.otsu_threshold(gray)
    comps = imaging.connected_components(imaging.binarize(gray, t), gray)
    if not comps:
        raise RetinaNotFound("no foreground component above the global threshold")
    biggest = comps[0]
    if biggest.area < 0.01 * gray.width * gray.height:
        raise RetinaNotFound(
            f"largest component covers {biggest.area} px, below 1% of the image"
        )
    cx, cy = biggest.centroid
    return Circle(cx, cy, math.sqrt(biggest.area / math.pi))


def crop_fringe(gray: RasterImage, retina: Circle, margin: float) -> RasterImage:
    """Zero every pixel outside ``margin * retina.r`` of the retina center.

    A pixel exactly on the boundary (distance == radius) is retained.
    """
    if not 0 < margin < 1:
        raise ValueError(f"margin must be in (0, 1), got {margin}")
    if gray.channels != 1:
        raise ValueError("crop_fringe expects a 1-channel image")
    ys = np.arange(gray.height, dtype=np.float64)[:, None]
    xs = np.arange(gray.width, dtype=np.float64)[None, :]
    keep = (xs - retina.cx) ** 2 + (ys - retina.cy) ** 2 <= (margin * retina.r) ** 2
    out = np.where(keep, gray.pixels, np.uint8(0))
    return RasterImage(out.astype(np.uint8))


def circle_to_bbox(c: Circle, expansion: float, img_w: int, img_h: int) -> BoundingBox:
    """Axis-aligned square of side ``2 * expansion * r`` around the circle,
    rounded outward to integers and clipped to the image."""
    if expansion < 1:
        raise ValueError(f"expansion must be >= 1, got {expansion}")
    half = expansion * c.r
    return enclosing_box(c.cx - half, c.cy - half, c.cx + half, c.cy + half, img_w, img_h)


def localize_disc(img: RasterImage, cfg: LocalizerConfig | None = None,
                  *, want_trace: bool = False) -> DiscLocalization:
    """Run the full localization pipeline on a decoded image.

    Raises RetinaNotFound when no fundus region is detected and
    NoCandidateRegion when no blob survives the area filter.
    """
    if cfg is None:
        cfg = LocalizerConfig()
    orig_w, orig_h = img.width, img.height
    side = cfg.working_size

    working = imaging.resize(img, side, side)
    gray = working if working.channels == 1 else imaging.to_grayscale(working, cfg.channel_mode)

    try:
        retina = estimate_retina_geometry(gray)
    except DegenerateHistogram as exc:
        raise RetinaNotFound(f"image has no separable fundus region: {exc}") from exc
    cropped = crop_fringe(gray, retina, cfg.fringe_margin)

    threshold = imaging.top_percentile_mean_threshold(cropped, cfg.top_percentile)
    core = imaging.binarize(cropped, math.floor(threshold))
    eroded = imaging.erode(core, cfg.erode_se)
    merged = imaging.dilate(eroded, cfg.dilate_se)

    comps = imaging.connected_components(merged, cropped)
    candidates = [c for c in comps if c.area >= cfg.min_blob_area]
    if not candidates:
        raise NoCandidateRegion(
            f"no blob reaches {cfg.min_blob_area} px after morphology"
        )
    # connected_components already orders by (area desc, mean intensity
    # desc, topmost-leftmost centroid), so the winner is the head.
    disc = candidates[0]
    dcx, dcy = disc.centroid
    radius = math.sqrt(disc.area / math.pi) * cfg.radius_expansion

    sx = orig_w / side
    sy = orig_h / side
    box = enclosing_box((dcx - radius) * sx, (dcy - radius) * sy,
                        (dcx + radius) * sx, (dcy + radius) * sy,
                        orig_w, orig_h)
    mean_scale = (sx + sy) / 2.0
    circle = Circle(dcx * sx, dcy * sy, radius * mean_scale)
    retina_orig = Circle(retina.cx * sx, retina.cy * sy, retina.r * mean_scale)

    trace = None
    if want_trace:
        trace = PipelineTrace(
            foreground_after_binarize=core.foreground_count(),
            foreground_after_erode=eroded.foreground_count(),
            foreground_after_dilate=merged.foreground_count(),
            candidate_areas=tuple(c.area for c in candidates),
            working_threshold=threshold,
        )
    return DiscLocalization(circle=circle, box=box, retina=retina_orig,
                            working_scale=(sx, sy), trace=trace)
