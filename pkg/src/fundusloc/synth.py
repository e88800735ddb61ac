"""Procedural synthetic fundus images with exact ground truth.

Each scene is sampled in resolution-independent normalized coordinates
and rasterized at a requested pixel size, so the same scene can be
rendered at several resolutions for scale-consistency checks. Scenes
contain a dark circular fundus on a black background, one bright disc
with a radial falloff, dark vessel strokes radiating from the disc, and
two optional confounders: a bright fringe arc hugging the fundus rim and
small shiny reflection spots near the macula.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotation import DatasetManifest, ManifestImage, save_manifest
from .geometry import BoundingBox, enclosing_box
from .imaging import RasterImage, save_image

FUNDUS_RGB = (168.0, 84.0, 38.0)
DISC_RGB = (250.0, 224.0, 150.0)
VESSEL_RGB = (96.0, 34.0, 22.0)
FRINGE_RGB = (235.0, 225.0, 205.0)
SPOT_RGB = (252.0, 235.0, 190.0)

DISC_PLATEAU = 0.3  # fraction of the disc radius at full brightness


@dataclass(frozen=True)
class VesselSpec:
    # quadratic bezier control points in normalized coords
    p0: tuple[float, float]
    p1: tuple[float, float]
    p2: tuple[float, float]
    width: float          # normalized
    darkness: float       # 0..1 blend toward vessel color


@dataclass(frozen=True)
class SpotSpec:
    cx: float
    cy: float
    radius: float         # normalized


@dataclass(frozen=True)
class FringeSpec:
    inner: float          # fraction of retina radius
    outer: float
    angle_start: float    # radians
    angle_span: float


@dataclass(frozen=True)
class SceneSpec:
    """Complete recipe for one synthetic image, normalized to [0, 1]."""

    retina_cx: float
    retina_cy: float
    retina_r: float       # fraction of min(w, h)
    disc_cx: float
    disc_cy: float
    disc_r: float         # fraction of min(w, h)
    vignette: float
    vessels: tuple[VesselSpec, ...]
    fringe: FringeSpec | None
    spots: tuple[SpotSpec, ...]
    salt: tuple[tuple[float, float], ...]
    noise_seed: int
    label: str = "unlabeled"

    def gt_box(self, width: int, height: int) -> BoundingBox:
        """Tight bounding box of the rendered disc."""
        scale = min(width, height)
        cx = self.disc_cx * width
        cy = self.disc_cy * height
        r = self.disc_r * scale
        return enclosing_box(cx - r, cy - r, cx + r, cy + r, width, height)


def sample_scene(rng: np.random.Generator, fringe_rate: float = 0.3,
                 spot_rate: float = 0.4, label_glaucoma_rate: float = 0.26) -> SceneSpec:
    """Draw one randomized scene."""
    retina_r = rng.uniform(0.44, 0.48)
    retina_cx = 0.5 + rng.uniform(-0.01, 0.01)
    retina_cy = 0.5 + rng.uniform(-0.01, 0.01)

    disc_r = rng.uniform(0.042, 0.066)  # ~63..99 px at a 1500 px frame
    side = rng.choice((-1.0, 1.0))
    angle = rng.uniform(-0.6, 0.6)
    dist = rng.uniform(0.35, 0.55) * retina_r
    disc_cx = retina_cx + side * dist * math.cos(angle)
    disc_cy = retina_cy + dist * math.sin(angle)

    vessels = []
    n_vessels = int(rng.integers(4, 8))
    for _ in range(n_vessels):
        theta = rng.uniform(0.0, 2.0 * math.pi)
        reach = rng.uniform(0.75, 0.98) * retina_r
        end = (retina_cx + reach * math.cos(theta) * rng.uniform(0.6, 1.0),
               retina_cy + reach * math.sin(theta))
        bend = rng.uniform(-0.25, 0.25) * retina_r
        mid = ((disc_cx + end[0]) / 2 - bend * math.sin(theta),
               (disc_cy + end[1]) / 2 + bend * math.cos(theta))
        vessels.append(VesselSpec(
            p0=(disc_cx, disc_cy), p1=mid, p2=end,
            width=rng.uniform(0.006, 0.011),
            darkness=rng.uniform(0.55, 0.8),
        ))

    fringe = None
    if rng.random() < fringe_rate:
        fringe = FringeSpec(
            inner=rng.uniform(0.965, 0.975),
            outer=rng.uniform(0.985, 0.998),
            angle_start=rng.uniform(0.0, 2.0 * math.pi),
            angle_span=rng.uniform(0.5, 1.8),
        )

    spots: list[SpotSpec] = []
    if rng.random() < spot_rate:
        # macular side: opposite the disc relative to the retina center
        mx = retina_cx - side * 0.45 * retina_r
        my = retina_cy + rng.uniform(-0.08, 0.08) * retina_r
        for _ in range(int(rng.integers(2, 6))):
            spots.append(SpotSpec(
                cx=mx + rng.uniform(-0.12, 0.12) * retina_r,
                cy=my + rng.uniform(-0.12, 0.12) * retina_r,
                radius=rng.uniform(0.0035, 0.0062),  # ~5..9 px at 1500
            ))

    n_salt = int(rng.integers(120, 320))
    salt_x = rng.uniform(retina_cx - 0.5 * retina_r, retina_cx + 0.5 * retina_r, size=n_salt)
    salt_y = rng.uniform(retina_cy - 0.5 * retina_r, retina_cy + 0.5 * retina_r, size=n_salt)
    salt = tuple((float(x), float(y)) for x, y in zip(salt_x, salt_y))

    return SceneSpec(
        retina_cx=retina_cx, retina_cy=retina_cy, retina_r=retina_r,
        disc_cx=disc_cx, disc_cy=disc_cy, disc_r=disc_r,
        vignette=rng.uniform(0.15, 0.3),
        vessels=tuple(vessels),
        fringe=fringe,
        spots=tuple(spots),
        salt=salt,
        noise_seed=int(rng.integers(0, 2**31)),
        label="glaucoma" if rng.random() < label_glaucoma_rate else "healthy",
    )


def _blend(img: np.ndarray, weight: np.ndarray, rgb: tuple[float, float, float]) -> None:
    w3 = weight[:, :, None]
    img *= 1.0 - w3
    img += w3 * np.array(rgb, dtype=np.float64)


def render_scene(scene: SceneSpec, width: int, height: int) -> RasterImage:
    """Rasterize a scene at the given pixel size (RGB, uint8)."""
    scale = min(width, height)
    ys = np.arange(height, dtype=np.float64)[:, None]
    xs = np.arange(width, dtype=np.float64)[None, :]

    rcx, rcy = scene.retina_cx * width, scene.retina_cy * height
    rr = scene.retina_r * scale
    retina_d = np.sqrt((xs - rcx) ** 2 + (ys - rcy) ** 2)
    inside = retina_d <= rr

    img = np.zeros((height, width, 3), dtype=np.float64)
    img += 4.0  # faint sensor floor outside the fundus

    # smooth resolution-independent texture from a coarse grid
    noise_rng = np.random.default_rng(scene.noise_seed)
    coarse = noise_rng.normal(0.0, 1.0, size=(24, 24))
    gy = np.clip(ys / height * 23.0, 0, 22.999)
    gx = np.clip(xs / width * 23.0, 0, 22.999)
    y0 = gy.astype(np.int64)
    x0 = gx.astype(np.int64)
    fy, fx = gy - y0, gx - x0
    texture = ((1 - fy) * ((1 - fx) * coarse[y0, x0] + fx * coarse[y0, x0 + 1])
               + fy * ((1 - fx) * coarse[y0 + 1, x0] + fx * coarse[y0 + 1, x0 + 1]))

    vignette = 1.0 - scene.vignette * np.clip(retina_d / rr, 0.0, 1.0) ** 2
    fundus = (np.array(FUNDUS_RGB)[None, None, :]
              * (vignette * (1.0 + 0.05 * texture))[:, :, None])
    img = np.where(inside[:, :, None], fundus, img)

    # optic disc with a bright plateau and cosine falloff to the rim
    dcx, dcy = scene.disc_cx * width, scene.disc_cy * height
    dr = scene.disc_r * scale
    disc_d = np.sqrt((xs - dcx) ** 2 + (ys - dcy) ** 2)
    u = disc_d / dr
    fall = np.where(
        u <= DISC_PLATEAU, 1.0,
        np.where(u <= 1.0,
                 0.5 * (1.0 + np.cos(math.pi * (u - DISC_PLATEAU) / (1.0 - DISC_PLATEAU))),
                 0.0))
    _blend(img, np.where(inside, fall, 0.0), DISC_RGB)

    # vessels: stamp filled circles along each bezier
    vmask = np.zeros((height, width), dtype=np.float64)
    for v in scene.vessels:
        pts = _bezier_points(v, width, height, scale)
        half = max(1.0, v.width * scale / 2.0)
        for px, py in pts:
            x_lo, x_hi = int(px - half - 1), int(px + half + 2)
            y_lo, y_hi = int(py - half - 1), int(py + half + 2)
            if x_hi < 0 or y_hi < 0 or x_lo >= width or y_lo >= height:
                continue
            x_lo, y_lo = max(0, x_lo), max(0, y_lo)
            x_hi, y_hi = min(width, x_hi), min(height, y_hi)
            wy = ys[y_lo:y_hi, :] - py
            wx = xs[:, x_lo:x_hi] - px
            d2 = wx ** 2 + wy ** 2
            region = vmask[y_lo:y_hi, x_lo:x_hi]
            np.maximum(region, np.where(d2 <= half * half, v.darkness, 0.0), out=region)
    _blend(img, np.where(inside, vmask, 0.0), VESSEL_RGB)

    if scene.fringe is not None:
        f = scene.fringe
        ang = np.arctan2(ys - rcy, xs - rcx)
        rel = np.mod(ang - f.angle_start, 2.0 * math.pi)
        band = ((retina_d >= f.inner * rr) & (retina_d <= f.outer * rr)
                & (rel <= f.angle_span))
        _blend(img, np.where(band, 0.9, 0.0), FRINGE_RGB)

    for s in scene.spots:
        scx, scy = s.cx * width, s.cy * height
        sr = s.radius * scale
        d2 = (xs - scx) ** 2 + (ys - scy) ** 2
        w = np.clip(2.0 * (1.0 - d2 / (sr * sr)), 0.0, 1.0)
        _blend(img, np.where(inside, w, 0.0), SPOT_RGB)

    for sx_, sy_ in scene.salt:
        px, py = int(sx_ * width), int(sy_ * height)
        if 0 <= px < width and 0 <= py < height:
            img[py, px, :] = 252.0

    img += noise_rng.normal(0.0, 2.5, size=img.shape)
    return RasterImage(np.clip(img, 0.0, 255.0).astype(np.uint8))


def _bezier_points(v: VesselSpec, width: int, height: int, scale: float):
    n = max(24, int(3.0 * scale * 0.25))
    t = np.linspace(0.0, 1.0, n)
    bx = ((1 - t) ** 2 * v.p0[0] + 2 * (1 - t) * t * v.p1[0] + t ** 2 * v.p2[0]) * width
    by = ((1 - t) ** 2 * v.p0[1] + 2 * (1 - t) * t * v.p1[1] + t ** 2 * v.p2[1]) * height
    return list(zip(bx, by))


@dataclass
class CorpusResult:
    manifest: DatasetManifest
    gt: dict[str, BoundingBox]
    log_entries: list[dict] = field(default_factory=list)


def generate_corpus(n: int, seed: int, out_dir: str | Path,
                    fringe_rate: float = 0.3, spot_rate: float = 0.4,
                    sizes: tuple[int, ...] = (1200, 1500, 1800)) -> CorpusResult:
    """Write ``n`` PNG scenes plus manifest, ground truth, and a per-image
    provenance log; fully deterministic in ``seed``."""
    if n <= 0:
        raise ValueError(f"n must be > 0, got {n}")
    out = Path(out_dir)
    images_dir = out / "images"
    images_dir.mkdir(parents=True, exist_ok=True)

    entries: list[ManifestImage] = []
    gt: dict[str, BoundingBox] = {}
    log_entries: list[dict] = []
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        scene = sample_scene(rng, fringe_rate=fringe_rate, spot_rate=spot_rate)
        w = h = int(rng.choice(np.array(sizes)))
        image_id = f"synth_{i:04d}"
        rel_path = f"images/{image_id}.png"
        save_image(render_scene(scene, w, h), images_dir / f"{image_id}.png")
        box = scene.gt_box(w, h)
        entries.append(ManifestImage(image_id, rel_path, w, h, scene.label))
        gt[image_id] = box
        log_entries.append({
            "image_id": image_id,
            "width": w,
            "height": h,
            "label": scene.label,
            "disc": {"cx": scene.disc_cx * w, "cy": scene.disc_cy * h,
                     "r": scene.disc_r * min(w, h)},
            "retina": {"cx": scene.retina_cx * w, "cy": scene.retina_cy * h,
                       "r": scene.retina_r * min(w, h)},
            "box": box.to_dict(),
            "fringe": scene.fringe is not None,
            "spots": len(scene.spots),
            "vessels": len(scene.vessels),
        })

    manifest = DatasetManifest("synthetic", tuple(entries))
    save_manifest(manifest, out / "manifest.json")
    with open(out / "gt.jsonl", "w") as fh:
        for image_id, box in gt.items():
            fh.write(json.dumps({"image_id": image_id, "box": box.to_dict()},
                                separators=(",", ":")) + "\n")
    with open(out / "synth_log.jsonl", "w") as fh:
        for entry in log_entries:
            fh.write(json.dumps(entry, separators=(",", ":")) + "\n")
    return CorpusResult(manifest, gt, log_entries)
