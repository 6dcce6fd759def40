"""Binary scoring of proposal boxes: light artifact vs. clutter.

The scorer is pluggable: anything with ``classify(crop) -> score in [0, 1]``
works.  The built-in baseline is a deterministic logistic model over a few
hand features, trained with full-batch gradient descent; it stands in for
heavier learned classifiers without changing the two-stage architecture.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path
from typing import Protocol, Sequence

import cv2
import numpy as np

from .boxes import BBox, enlarge
from .errors import DataError
from .image import GrayImage

DEFAULT_THRESHOLD = 0.5
DEFAULT_ENLARGE = 1.5

_CROP_SIDE = 32
_MODEL_MAGIC = b"EARLYBEAM-MODEL v1\n"

FEATURE_NAMES = ("peak", "mad", "centroid_offset", "aspect", "ring_contrast")


@dataclasses.dataclass(frozen=True)
class ScoredBox:
    """A proposal with its artifact score; ``error`` is set when scoring failed."""

    box: BBox
    score: float
    label: bool
    error: str | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise DataError(f"score {self.score} outside [0, 1]")


class Scorer(Protocol):
    def classify(self, crop: GrayImage) -> float: ...


def extract_features(crop: GrayImage) -> np.ndarray:
    """Fixed-arity feature vector from a crop of any size.

    The crop is resampled to 32x32 first; aspect comes from the natural
    dimensions since resampling erases it.
    """
    small = cv2.resize(crop.data, (_CROP_SIDE, _CROP_SIDE), interpolation=cv2.INTER_LINEAR)
    peak = float(small.max())
    mad = float(np.abs(small - small.mean()).mean())
    mass = float(small.sum())
    if mass > 0:
        ys, xs = np.mgrid[0:_CROP_SIDE, 0:_CROP_SIDE]
        cy = float((ys * small).sum()) / mass
        cx = float((xs * small).sum()) / mass
        half_diag = (_CROP_SIDE - 1) / 2 * np.sqrt(2.0)
        offset = float(np.hypot(cx - (_CROP_SIDE - 1) / 2, cy - (_CROP_SIDE - 1) / 2)) / half_diag
    else:
        offset = 0.0
    aspect = crop.width / (crop.width + crop.height)
    # Inner region vs. the surrounding ring of the (already enlarged) crop:
    # artifacts concentrate light centrally.
    m = _CROP_SIDE // 6
    inner = small[m : _CROP_SIDE - m, m : _CROP_SIDE - m]
    ring_mask = np.ones_like(small, dtype=bool)
    ring_mask[m : _CROP_SIDE - m, m : _CROP_SIDE - m] = False
    ring = small[ring_mask]
    contrast = float(inner.mean() - ring.mean()) if ring.size else 0.0
    return np.array([peak, mad, offset, aspect, contrast])


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class LogisticArtifactClassifier:
    """Logistic regression over the hand features above.

    Deterministic: weights start from a seeded draw and full-batch gradient
    descent has no other randomness.
    """

    def __init__(self, weights=None, bias: float = 0.0, means=None, stds=None):
        n = len(FEATURE_NAMES)
        self.weights = np.zeros(n) if weights is None else np.asarray(weights, dtype=np.float64)
        if self.weights.shape != (n,):
            raise DataError(f"expected {n} weights, got {self.weights.shape}")
        self.bias = float(bias)
        self.means = np.zeros(n) if means is None else np.asarray(means, dtype=np.float64)
        self.stds = np.ones(n) if stds is None else np.asarray(stds, dtype=np.float64)
        if self.means.shape != (n,) or self.stds.shape != (n,):
            raise DataError("feature normalization vectors must match feature arity")

    def classify(self, crop: GrayImage) -> float:
        f = (extract_features(crop) - self.means) / self.stds
        return float(_sigmoid(np.array([f @ self.weights + self.bias]))[0])

    def train(
        self,
        crops: Sequence[GrayImage],
        labels: Sequence[int],
        seed: int = 0,
        lr: float = 0.5,
        epochs: int = 400,
        l2: float = 1e-4,
    ) -> None:
        if len(crops) != len(labels) or not crops:
            raise DataError("need equally many crops and labels, at least one each")
        y = np.asarray(labels, dtype=np.float64)
        if not ((y == 0) | (y == 1)).all():
            raise DataError("labels must be 0 or 1")
        if y.min() == y.max():
            raise DataError("training set must contain both classes")
        x = np.stack([extract_features(c) for c in crops])
        self.means = x.mean(axis=0)
        self.stds = np.where(x.std(axis=0) > 0, x.std(axis=0), 1.0)
        xn = (x - self.means) / self.stds
        rng = np.random.default_rng(seed)
        w = rng.normal(0.0, 0.01, size=xn.shape[1])
        b = 0.0
        for _ in range(epochs):
            p = _sigmoid(xn @ w + b)
            grad_w = xn.T @ (p - y) / len(y) + l2 * w
            grad_b = float((p - y).mean())
            w -= lr * grad_w
            b -= lr * grad_b
        self.weights = w
        self.bias = b

    def save(self, path: str | Path) -> None:
        """Model file: magic line, JSON metadata line, raw float64 payload.

        Payload order (little-endian float64): means, stds, weights, bias.
        """
        meta = {"kind": "logistic", "features": list(FEATURE_NAMES)}
        payload = np.concatenate([self.means, self.stds, self.weights, [self.bias]])
        with open(path, "wb") as fh:
            fh.write(_MODEL_MAGIC)
            fh.write(json.dumps(meta).encode() + b"\n")
            fh.write(payload.astype("<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "LogisticArtifactClassifier":
        blob = Path(path).read_bytes()
        if not blob.startswith(_MODEL_MAGIC):
            raise DataError(f"{path}: not a recognized model file")
        rest = blob[len(_MODEL_MAGIC) :]
        nl = rest.find(b"\n")
        if nl < 0:
            raise DataError(f"{path}: truncated model file")
        try:
            meta = json.loads(rest[:nl])
        except json.JSONDecodeError:
            raise DataError(f"{path}: malformed model metadata") from None
        if meta.get("kind") != "logistic" or tuple(meta.get("features", ())) != FEATURE_NAMES:
            raise DataError(f"{path}: incompatible model kind or feature set")
        n = len(FEATURE_NAMES)
        expected = (3 * n + 1) * struct.calcsize("<d")
        body = rest[nl + 1 :]
        if len(body) != expected:
            raise DataError(f"{path}: expected {expected} payload bytes, got {len(body)}")
        vals = np.frombuffer(body, dtype="<f8")
        return cls(weights=vals[2 * n : 3 * n], bias=vals[3 * n], means=vals[:n], stds=vals[n : 2 * n])


class PeakBrightnessScorer:
    """Trivial pluggable scorer: the crop's peak intensity.

    Useful as a no-training default; proposals are bright by construction,
    so nighttime artifacts pass a 0.5 bar while dim clutter does not.
    """

    def classify(self, crop: GrayImage) -> float:
        return float(crop.data.max())


class SaturatedOnlyScorer:
    """Ablation scorer that accepts only near-saturated (direct) light.

    Headlamps themselves saturate the sensor; reflections and glares stay
    well below.  Restricting the classifier this way turns the pipeline
    into a direct-sight-only detector, the reference point for measuring
    how much earlier indirect artifacts flag an oncoming vehicle.
    """

    def __init__(self, saturation: float = 0.9):
        self.saturation = saturation

    def classify(self, crop: GrayImage) -> float:
        return 1.0 if float(crop.data.max()) >= self.saturation else 0.0


def classify_proposals(
    img: GrayImage,
    boxes: Sequence[BBox],
    model: Scorer,
    threshold: float = DEFAULT_THRESHOLD,
    enlarge_factor: float = DEFAULT_ENLARGE,
) -> list[ScoredBox]:
    """Score each proposal over an enlarged context crop, preserving order.

    A failing model marks only its own box (score 0, error message); the
    remaining boxes still get scored.
    """
    out = []
    for box in boxes:
        try:
            region = enlarge(box, enlarge_factor, img.width, img.height)
            x0, y0, x1, y1 = region.pixel_bounds(img.width, img.height)
            crop = GrayImage(np.ascontiguousarray(img.data[y0 : y1 + 1, x0 : x1 + 1]))
            score = float(model.classify(crop))
            if not 0.0 <= score <= 1.0 or not np.isfinite(score):
                raise DataError(f"scorer returned {score}, outside [0, 1]")
            out.append(ScoredBox(box, score, score >= threshold))
        except Exception as exc:  # noqa: BLE001 - one bad box must not kill the frame
            out.append(ScoredBox(box, 0.0, False, error=str(exc)))
    return out
