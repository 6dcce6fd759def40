"""Bounding boxes, keypoints, and overlap arithmetic.

Box edges are inclusive: a keypoint lying exactly on a border counts as
covered.  Overlap ratios, by contrast, are computed on the geometric
rectangle spanned by the corner coordinates, which is what the tracker's
matching needs for fractional (filtered) boxes.
"""

from __future__ import annotations

import dataclasses

from .errors import DataError

VALID_KINDS = ("direct", "indirect")


@dataclasses.dataclass(frozen=True)
class BBox:
    """Axis-aligned box. Corners may be fractional; min <= max per axis."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_min <= self.x_max and self.y_min <= self.y_max):
            raise DataError(f"degenerate box corners: {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0

    def contains(self, x: float, y: float) -> bool:
        """Inclusive-edge point coverage."""
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def pixel_bounds(self, width: int, height: int) -> tuple[int, int, int, int]:
        """Integer pixel window (x0, y0, x1, y1), inclusive, clipped to the image."""
        x0 = max(0, int(self.x_min))
        y0 = max(0, int(self.y_min))
        x1 = min(width - 1, int(self.x_max))
        y1 = min(height - 1, int(self.y_max))
        if x0 > x1 or y0 > y1:
            raise DataError(f"box {self} lies outside a {width}x{height} image")
        return x0, y0, x1, y1

    @staticmethod
    def from_center(cx: float, cy: float, w: float, h: float) -> "BBox":
        """Box with the given center and extents (tracker state round-trip)."""
        w = max(w, 0.0)
        h = max(h, 0.0)
        return BBox(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)


@dataclasses.dataclass(frozen=True)
class Keypoint:
    """Annotated intensity maximum of one light artifact."""

    x: float
    y: float
    vehicle_id: int = 0
    kind: str = "direct"

    def __post_init__(self) -> None:
        if self.kind not in VALID_KINDS:
            raise DataError(f"keypoint kind must be one of {VALID_KINDS}, got {self.kind!r}")


def iou(b1: BBox, b2: BBox) -> float:
    """Intersection over union of the geometric rectangles, in [0, 1].

    Zero-area boxes compare by equality (1.0 iff identical).
    """
    ix = min(b1.x_max, b2.x_max) - max(b1.x_min, b2.x_min)
    iy = min(b1.y_max, b2.y_max) - max(b1.y_min, b2.y_min)
    inter = max(0.0, ix) * max(0.0, iy)
    union = b1.area + b2.area - inter
    if union <= 0.0:
        return 1.0 if b1 == b2 else 0.0
    return inter / union


def enlarge(box: BBox, factor: float, width: int, height: int) -> BBox:
    """Scale a box about its center by ``factor`` >= 1, clipped to the image."""
    if factor < 1.0:
        raise DataError(f"enlargement factor must be >= 1, got {factor}")
    cx, cy = box.center
    half_w = box.width * factor / 2.0
    half_h = box.height * factor / 2.0
    return BBox(
        max(0.0, cx - half_w),
        max(0.0, cy - half_h),
        min(float(width - 1), cx + half_w),
        min(float(height - 1), cy + half_h),
    )


def inflate(box: BBox, frac: float) -> BBox:
    """Grow a box by ``frac`` of its side length on every side (no clipping)."""
    dx = box.width * frac
    dy = box.height * frac
    return BBox(box.x_min - dx, box.y_min - dy, box.x_max + dx, box.y_max + dy)
