"""Grayscale image container, summed-area table, and PGM input/output.

Intensities are normalized to [0, 1] on load: 8-bit rasters divide by 255,
16-bit rasters by their stated maxval.  All pixel statistics in the
detection chain assume this bounded range.
"""

from __future__ import annotations

import dataclasses
import re
from pathlib import Path

import cv2
import numpy as np

from .errors import DataError


@dataclasses.dataclass(frozen=True)
class GrayImage:
    """Single-channel intensity raster with values in [0, 1].

    ``data`` is a read-only, C-contiguous float64 array of shape
    (height, width), row-major.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if arr.ndim != 2 or arr.size == 0:
            raise DataError(f"expected a non-empty 2-D array, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise DataError("image contains non-finite intensities")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise DataError("intensities must lie in [0, 1]; normalize on load")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @classmethod
    def from_uint8(cls, raw: np.ndarray) -> "GrayImage":
        return cls(np.asarray(raw, dtype=np.float64) / 255.0)

    @classmethod
    def from_uint16(cls, raw: np.ndarray, maxval: int = 65535) -> "GrayImage":
        return cls(np.asarray(raw, dtype=np.float64) / float(maxval))

    def to_uint8(self) -> np.ndarray:
        return np.rint(self.data * 255.0).astype(np.uint8)


def integral_image(img: GrayImage) -> np.ndarray:
    """Summed-area table S with S[y, x] = sum of img over [0..y, 0..x].

    Same shape as the image; window sums become four table lookups.
    """
    return np.cumsum(np.cumsum(img.data, axis=0), axis=1)


def window_sum(table: np.ndarray, y0: int, x0: int, y1: int, x1: int) -> float:
    """Sum over the inclusive pixel window [y0..y1, x0..x1] from a table."""
    total = table[y1, x1]
    if y0 > 0:
        total -= table[y0 - 1, x1]
    if x0 > 0:
        total -= table[y1, x0 - 1]
    if y0 > 0 and x0 > 0:
        total += table[y0 - 1, x0 - 1]
    return float(total)


def window_mean(img: GrayImage, w: int) -> np.ndarray:
    """Per-pixel mean over a w-by-w window, replicating edges at the borders.

    A window reaching past the frame edge is clamped by padding the image
    with its border values, so every mean is taken over exactly w*w samples.
    Even w uses the asymmetric anchor convention (one extra row/column
    below and right).  Computed with a summed-area table over the padding.
    """
    if w < 1:
        raise DataError(f"window size must be positive, got {w}")
    lo = (w - 1) // 2
    hi = w // 2
    padded = np.pad(img.data, ((lo, hi), (lo, hi)), mode="edge")
    table = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.float64)
    np.cumsum(np.cumsum(padded, axis=0), axis=1, out=table[1:, 1:])
    h, width = img.data.shape
    sums = (
        table[w : w + h, w : w + width]
        - table[0:h, w : w + width]
        - table[w : w + h, 0:width]
        + table[0:h, 0:width]
    )
    return sums / float(w * w)


_PGM_HEADER = re.compile(rb"^P5\s+(?:#.*\s+)*(\d+)\s+(?:#.*\s+)*(\d+)\s+(?:#.*\s+)*(\d+)\s")


def pgm_dimensions(path: str | Path) -> tuple[int, int]:
    """(width, height) from a PGM header without decoding the pixels."""
    with open(path, "rb") as fh:
        head = fh.read(256)
    m = _PGM_HEADER.match(head)
    if m is None:
        raise DataError(f"{path}: not a binary PGM (P5) file")
    return int(m.group(1)), int(m.group(2))


def load_pgm(path: str | Path) -> GrayImage:
    """Read a binary PGM (P5) file, 8-bit or 16-bit big-endian."""
    blob = Path(path).read_bytes()
    m = _PGM_HEADER.match(blob)
    if m is None:
        raise DataError(f"{path}: not a binary PGM (P5) file")
    width, height, maxval = (int(g) for g in m.groups())
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise DataError(f"{path}: invalid PGM dimensions or maxval")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    if len(blob) - m.end() < width * height * dtype.itemsize:
        raise DataError(f"{path}: truncated pixel data")
    pixels = np.frombuffer(blob, dtype=dtype, count=width * height, offset=m.end())
    return GrayImage(pixels.reshape(height, width).astype(np.float64) / maxval)


def load_image(path: str | Path) -> GrayImage:
    """Read any common raster as grayscale; PGM goes through the native reader."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return load_pgm(path)
    raw = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if raw is None:
        raise DataError(f"{path}: could not read image")
    return GrayImage.from_uint8(raw)


def save_pgm(path: str | Path, img: GrayImage, maxval: int = 255) -> None:
    """Write a binary PGM (P5) file; maxval > 255 selects 16-bit big-endian."""
    if not 0 < maxval < 65536:
        raise DataError(f"maxval out of range: {maxval}")
    raw = np.rint(img.data * maxval)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    header = f"P5\n{img.width} {img.height}\n{maxval}\n".encode()
    Path(path).write_bytes(header + raw.astype(dtype).tobytes())


def save_depth_pgm(path: str | Path, depth_m: np.ndarray) -> None:
    """Write a depth raster as 16-bit PGM, value = centimeters, 0 = no return."""
    cm = np.rint(np.asarray(depth_m, dtype=np.float64) * 100.0)
    if cm.min() < 0 or cm.max() > 65535:
        raise DataError("depth out of the representable 0..655.35 m range")
    h, w = cm.shape
    header = f"P5\n{w} {h}\n65535\n".encode()
    Path(path).write_bytes(header + cm.astype(">u2").tobytes())


def load_depth_pgm(path: str | Path) -> np.ndarray:
    """Read a 16-bit depth PGM back to meters (0 stays 0 = no return)."""
    blob = Path(path).read_bytes()
    m = _PGM_HEADER.match(blob)
    if m is None:
        raise DataError(f"{path}: not a binary PGM (P5) file")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval != 65535:
        raise DataError(f"{path}: depth rasters must be 16-bit PGM")
    if len(blob) - m.end() < width * height * 2:
        raise DataError(f"{path}: truncated pixel data")
    pixels = np.frombuffer(blob, dtype=">u2", count=width * height, offset=m.end())
    return pixels.reshape(height, width).astype(np.float64) / 100.0
