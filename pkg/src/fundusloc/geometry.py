"""Circles and axis-aligned integer bounding boxes.

Coordinates use image convention: x grows rightward (columns), y grows
downward (rows), origin at the top-left pixel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidBox, OutOfBounds


@dataclass(frozen=True)
class Circle:
    """Sub-pixel circle; ``r`` must be positive."""

    cx: float
    cy: float
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"circle radius must be > 0, got {self.r}")

    def to_dict(self) -> dict:
        return {"cx": self.cx, "cy": self.cy, "r": self.r}

    @classmethod
    def from_dict(cls, d: dict) -> "Circle":
        return cls(float(d["cx"]), float(d["cy"]), float(d["r"]))


@dataclass(frozen=True)
class BoundingBox:
    """Integer pixel box: top-left corner ``(x, y)``, extent ``(w, h)``.

    The box covers columns ``[x, x + w)`` and rows ``[y, y + h)``.
    """

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise InvalidBox(f"box must have positive area, got w={self.w} h={self.h}")

    @property
    def x1(self) -> int:
        """Exclusive right edge."""
        return self.x + self.w

    @property
    def y1(self) -> int:
        """Exclusive bottom edge."""
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}

    @classmethod
    def from_dict(cls, d: dict) -> "BoundingBox":
        return cls(int(d["x"]), int(d["y"]), int(d["w"]), int(d["h"]))


def enclosing_box(left: float, top: float, right: float, bottom: float,
                  img_w: int, img_h: int) -> BoundingBox:
    """Round real-valued bounds outward to integers and clip to the image.

    Raises OutOfBounds when nothing of the region remains inside the image.
    """
    x0 = max(0, math.floor(left))
    y0 = max(0, math.floor(top))
    x1 = min(img_w, math.ceil(right))
    y1 = min(img_h, math.ceil(bottom))
    if x1 <= x0 or y1 <= y0:
        raise OutOfBounds(
            f"region ({left:.1f},{top:.1f})-({right:.1f},{bottom:.1f}) lies outside {img_w}x{img_h} image"
        )
    return BoundingBox(x0, y0, x1 - x0, y1 - y0)
