"""Light-artifact proposal generation.

A frame goes through five stages: bilinear downscale, Gaussian blur, a
locally adaptive threshold, gap-tolerant blob grouping, and a contrast
filter.  Everything after the blur runs on the downscaled image; the final
boxes are scaled back to full-resolution pixel coordinates.
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

import cv2
import numpy as np

from .boxes import BBox
from .errors import DataError
from .image import GrayImage, window_mean

# Guards the Δ/(1−Δ) term: saturated pixels over dark neighborhoods push the
# denominator toward zero.
_DENOM_FLOOR = 1e-6

KAPPA_RANGE = (0.25, 0.75)
WINDOW_RANGE = (5, 25)
MAD_RANGE = (0.0, 0.1)
GAP_RANGE = (1, 9)


@dataclasses.dataclass(frozen=True)
class ProposerParams:
    """Tunable knobs of the proposal stage.

    kappa: threshold sensitivity; window: side of the local-mean window in
    pixels; mad_threshold: minimum mean absolute deviation a surviving box
    must show; gap: largest Chebyshev distance bridged when grouping mask
    pixels into blobs.
    """

    kappa: float = 0.4
    window: int = 19
    mad_threshold: float = 0.01
    gap: int = 4
    blur_kernel: int = 5
    blur_sigma: float = 1.0
    downscale: float = 0.5

    def __post_init__(self) -> None:
        if not KAPPA_RANGE[0] <= self.kappa <= KAPPA_RANGE[1]:
            raise DataError(f"kappa {self.kappa} outside {KAPPA_RANGE}")
        # The tuning search space covers every integer window in range, even
        # sizes included (asymmetric anchor, see window_mean).
        if not WINDOW_RANGE[0] <= self.window <= WINDOW_RANGE[1]:
            raise DataError(f"window {self.window} outside {WINDOW_RANGE}")
        if not MAD_RANGE[0] <= self.mad_threshold <= MAD_RANGE[1]:
            raise DataError(f"mad_threshold {self.mad_threshold} outside {MAD_RANGE}")
        if not GAP_RANGE[0] <= self.gap <= GAP_RANGE[1]:
            raise DataError(f"gap {self.gap} outside {GAP_RANGE}")
        if self.blur_kernel % 2 == 0 or self.blur_kernel < 1:
            raise DataError("blur_kernel must be odd and positive")
        if self.blur_sigma <= 0:
            raise DataError("blur_sigma must be positive")
        if not 0.0 < self.downscale <= 1.0:
            raise DataError("downscale must be in (0, 1]")

    def to_file(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(dataclasses.asdict(self), indent=2) + "\n")

    @classmethod
    def from_file(cls, path: str | Path) -> "ProposerParams":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not valid JSON: {exc}") from None
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise DataError(f"{path}: unknown parameter keys: {sorted(unknown)}")
        for key in ("window", "gap", "blur_kernel"):
            if key in raw:
                raw[key] = int(raw[key])
        return cls(**raw)


def preprocess(img: GrayImage, params: ProposerParams) -> GrayImage:
    """Downscale bilinearly, then blur.  Output intensities stay in [0, 1]."""
    data = img.data
    if params.downscale != 1.0:
        out_w = max(1, int(round(img.width * params.downscale)))
        out_h = max(1, int(round(img.height * params.downscale)))
        data = cv2.resize(data, (out_w, out_h), interpolation=cv2.INTER_LINEAR)
    if data.shape[0] < params.blur_kernel or data.shape[1] < params.blur_kernel:
        raise DataError(
            f"downscaled image {data.shape[1]}x{data.shape[0]} is smaller than "
            f"the {params.blur_kernel}x{params.blur_kernel} blur kernel"
        )
    data = cv2.GaussianBlur(data, (params.blur_kernel, params.blur_kernel), params.blur_sigma)
    return GrayImage(np.clip(data, 0.0, 1.0))


def dynamic_threshold(img: GrayImage, kappa: float, window: int) -> np.ndarray:
    """Per-pixel threshold T = mu * (1 + kappa * (1 - delta / (1 - delta))).

    mu is the window x window local mean (edges replicated) and
    delta = I - mu, so pixels already brighter than their neighborhood get a
    raised bar and dim surroundings lower it.
    """
    mu = window_mean(img, window)
    delta = img.data - mu
    denom = np.maximum(1.0 - delta, _DENOM_FLOOR)
    return mu * (1.0 + kappa * (1.0 - delta / denom))


def binarize(img: GrayImage, threshold: np.ndarray) -> np.ndarray:
    """Boolean mask, set strictly above the threshold map."""
    if threshold.shape != img.data.shape:
        raise DataError("threshold map shape does not match image")
    return img.data > threshold


def blob_pixel_groups(mask: np.ndarray, gap: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Group set pixels, bridging Chebyshev distances <= gap; one (ys, xs) per group.

    Exactness via a doubled grid: set pixels land on even coordinates, so
    every pairwise distance doubles and stays even.  Dilating by a square of
    radius gap then joins two pixels (8-connectivity) iff their doubled
    distance is <= 2*gap + 1, which for even numbers is exactly <= 2*gap.
    """
    if mask.ndim != 2:
        raise DataError("mask must be 2-D")
    if gap < 0:
        raise DataError("gap must be non-negative")
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return []
    h, w = mask.shape
    doubled = np.zeros((2 * h, 2 * w), dtype=np.uint8)
    doubled[2 * ys, 2 * xs] = 1
    if gap > 0:
        kernel = np.ones((2 * gap + 1, 2 * gap + 1), dtype=np.uint8)
        doubled = cv2.dilate(doubled, kernel)
    _, labels = cv2.connectedComponents(doubled, connectivity=8)
    ids = labels[2 * ys, 2 * xs]
    order = np.argsort(ids, kind="stable")
    ids, xs, ys = ids[order], xs[order], ys[order]
    starts = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1]])
    bounds = np.r_[starts, ids.size]
    return [(ys[lo:hi], xs[lo:hi]) for lo, hi in zip(bounds[:-1], bounds[1:])]


def blobs_to_boxes(mask: np.ndarray, gap: int) -> list[BBox]:
    """Tight boxes around each pixel group found by blob_pixel_groups."""
    boxes = [
        BBox(float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max()))
        for ys, xs in blob_pixel_groups(mask, gap)
    ]
    boxes.sort(key=lambda b: (b.y_min, b.x_min, b.y_max, b.x_max))
    return boxes


def box_mad(img: GrayImage, box: BBox) -> float:
    """Mean absolute deviation of the intensities inside the box."""
    x0, y0, x1, y1 = box.pixel_bounds(img.width, img.height)
    vals = img.data[y0 : y1 + 1, x0 : x1 + 1]
    return float(np.abs(vals - vals.mean()).mean())


def filter_boxes(img: GrayImage, boxes: list[BBox], mad_threshold: float) -> list[BBox]:
    """Keep boxes whose contained intensities deviate enough from their mean."""
    return [b for b in boxes if box_mad(img, b) >= mad_threshold]


def _upscale_box(box: BBox, sx: float, sy: float, width: int, height: int) -> BBox:
    # Treat pixel i as the interval [i, i+1) so scaled boxes round outward
    # and never shrink a detection.
    x_min = math.floor(box.x_min * sx)
    y_min = math.floor(box.y_min * sy)
    x_max = math.ceil((box.x_max + 1.0) * sx) - 1
    y_max = math.ceil((box.y_max + 1.0) * sy) - 1
    return BBox(
        float(max(0, x_min)),
        float(max(0, y_min)),
        float(min(width - 1, x_max)),
        float(min(height - 1, y_max)),
    )


def propose(img: GrayImage, params: ProposerParams | None = None) -> list[BBox]:
    """Full proposal stage; boxes come back in full-resolution coordinates."""
    params = params or ProposerParams()
    small = preprocess(img, params)
    threshold = dynamic_threshold(small, params.kappa, params.window)
    mask = binarize(small, threshold)
    boxes = blobs_to_boxes(mask, params.gap)
    boxes = filter_boxes(small, boxes, params.mad_threshold)
    if small.width == img.width and small.height == img.height:
        return boxes
    sx = img.width / small.width
    sy = img.height / small.height
    return [_upscale_box(b, sx, sy, img.width, img.height) for b in boxes]
