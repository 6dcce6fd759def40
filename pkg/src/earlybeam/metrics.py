"""Keypoint-based detection metrics, distance errors, and time benefit.

Ground truth is a set of keypoints (one per light artifact); predictions
are boxes.  A keypoint is detected when at least one box covers it (edges
inclusive); a box is a false positive when it covers no keypoint.  The
quality scores penalize boxes that lump several keypoints together (q_k)
and keypoints claimed by several boxes (q_b); their product q rewards
crisp one-to-one detections.
"""

from __future__ import annotations

import dataclasses
from typing import Iterable, Sequence

import numpy as np

from .boxes import BBox, Keypoint
from .errors import DataError

DEFAULT_FPS = 18.0


@dataclasses.dataclass
class EventCounts:
    """Detection events accumulated over one or more frames.

    keypoints_per_box holds n_K for every true-positive box;
    boxes_per_keypoint holds n_B for every covered keypoint.
    """

    tp_keypoints: int = 0
    fn_keypoints: int = 0
    fp_boxes: int = 0
    keypoints_per_box: list[int] = dataclasses.field(default_factory=list)
    boxes_per_keypoint: list[int] = dataclasses.field(default_factory=list)

    def __add__(self, other: "EventCounts") -> "EventCounts":
        return EventCounts(
            self.tp_keypoints + other.tp_keypoints,
            self.fn_keypoints + other.fn_keypoints,
            self.fp_boxes + other.fp_boxes,
            self.keypoints_per_box + other.keypoints_per_box,
            self.boxes_per_keypoint + other.boxes_per_keypoint,
        )

    @classmethod
    def combine(cls, counts: Iterable["EventCounts"]) -> "EventCounts":
        total = cls()
        for c in counts:
            total = total + c
        return total


def score_frame(boxes: Sequence[BBox], keypoints: Sequence[Keypoint]) -> EventCounts:
    """Count detection events for one frame (coverage edges inclusive)."""
    covered = np.zeros((len(boxes), len(keypoints)), dtype=bool)
    for bi, box in enumerate(boxes):
        for ki, kp in enumerate(keypoints):
            covered[bi, ki] = box.contains(kp.x, kp.y)
    counts = EventCounts()
    per_box = covered.sum(axis=1) if len(keypoints) else np.zeros(len(boxes), dtype=int)
    per_kp = covered.sum(axis=0) if len(boxes) else np.zeros(len(keypoints), dtype=int)
    for bi in range(len(boxes)):
        if per_box[bi] >= 1:
            counts.keypoints_per_box.append(int(per_box[bi]))
        else:
            counts.fp_boxes += 1
    for ki in range(len(keypoints)):
        if per_kp[ki] >= 1:
            counts.tp_keypoints += 1
            counts.boxes_per_keypoint.append(int(per_kp[ki]))
        else:
            counts.fn_keypoints += 1
    return counts


@dataclasses.dataclass(frozen=True)
class Quality:
    """Dataset-level scores; None marks metrics with an empty denominator."""

    precision: float | None
    recall: float | None
    f_score: float | None
    q_k: float | None
    q_b: float | None
    q: float | None


def quality(counts: EventCounts) -> Quality:
    """Reduce accumulated events to the dataset scores.

    q_k averages 1/n_K over true-positive boxes, q_b averages 1/n_B over
    covered keypoints, q is their product.  Precision counts detected
    keypoints against false-positive boxes, the two event kinds the frame
    scorer produces.
    """
    q_k = (
        float(np.mean([1.0 / n for n in counts.keypoints_per_box]))
        if counts.keypoints_per_box
        else None
    )
    q_b = (
        float(np.mean([1.0 / n for n in counts.boxes_per_keypoint]))
        if counts.boxes_per_keypoint
        else None
    )
    q = q_k * q_b if q_k is not None and q_b is not None else None
    denom_p = counts.tp_keypoints + counts.fp_boxes
    precision = counts.tp_keypoints / denom_p if denom_p else None
    denom_r = counts.tp_keypoints + counts.fn_keypoints
    recall = counts.tp_keypoints / denom_r if denom_r else None
    if precision is None or recall is None or precision + recall == 0:
        f_score = None
    else:
        f_score = 2.0 * precision * recall / (precision + recall)
    return Quality(precision, recall, f_score, q_k, q_b, q)


def format_quality(counts: EventCounts, scores: Quality) -> str:
    """Fixed-width text table of the accumulated counts and scores."""

    def fmt(v: float | None) -> str:
        return "   n/a" if v is None else f"{v:.4f}"

    return "\n".join(
        [
            f"{'tp keypoints':<14}{counts.tp_keypoints:>8}",
            f"{'fn keypoints':<14}{counts.fn_keypoints:>8}",
            f"{'fp boxes':<14}{counts.fp_boxes:>8}",
            f"{'precision':<14}{fmt(scores.precision):>8}",
            f"{'recall':<14}{fmt(scores.recall):>8}",
            f"{'f-score':<14}{fmt(scores.f_score):>8}",
            f"{'q_k':<14}{fmt(scores.q_k):>8}",
            f"{'q_b':<14}{fmt(scores.q_b):>8}",
            f"{'q':<14}{fmt(scores.q):>8}",
        ]
    )


def lidar_gt(depth_m: np.ndarray, box: BBox) -> float:
    """Median of the valid (> 0) depth returns inside the box, meters."""
    depth_m = np.asarray(depth_m, dtype=np.float64)
    if depth_m.ndim != 2:
        raise DataError("depth raster must be 2-D")
    x0, y0, x1, y1 = box.pixel_bounds(depth_m.shape[1], depth_m.shape[0])
    vals = depth_m[y0 : y1 + 1, x0 : x1 + 1]
    vals = vals[vals > 0]
    if vals.size == 0:
        raise DataError("no valid depth returns inside the box")
    return float(np.median(vals))


def relative_error(estimate: float, ground_truth: float) -> float:
    """(estimate - truth) / truth; negative means the estimate fell short."""
    if ground_truth <= 0:
        raise DataError("ground-truth distance must be positive")
    return (estimate - ground_truth) / ground_truth


@dataclasses.dataclass(frozen=True)
class SequenceTags:
    """Frame indices of the notable moments in one recorded sequence."""

    first_annotation: int | None = None
    human_reaction: int | None = None
    first_direct_sight: int | None = None
    production_detection: int | None = None

    def __post_init__(self) -> None:
        for name in ("first_annotation", "human_reaction", "first_direct_sight", "production_detection"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or v < 0):
                raise DataError(f"{name} must be a non-negative frame index")
        if (
            self.first_annotation is not None
            and self.first_direct_sight is not None
            and self.first_annotation > self.first_direct_sight
        ):
            raise DataError("light artifacts cannot be annotated after the vehicle is in direct sight")


def time_benefit(tags: SequenceTags, detection_frame: int | None, fps: float = DEFAULT_FPS) -> float | None:
    """Seconds from the first annotated artifact to the system's detection.

    None when the system never detected in this sequence; such sequences
    are excluded from averages but reported as misses.
    """
    if fps <= 0:
        raise DataError("frame rate must be positive")
    if tags.first_annotation is None:
        raise DataError("sequence has no first-annotation tag")
    if detection_frame is None:
        return None
    return (detection_frame - tags.first_annotation) / fps


@dataclasses.dataclass(frozen=True)
class BenefitStats:
    """Aggregate of per-sequence latencies for one system."""

    detected: int
    missed: int
    mean: float | None
    median: float | None
    quartile_low: float | None
    quartile_high: float | None


def aggregate_benefits(benefits: Sequence[float | None]) -> BenefitStats:
    vals = [b for b in benefits if b is not None]
    missed = len(benefits) - len(vals)
    if not vals:
        return BenefitStats(0, missed, None, None, None, None)
    arr = np.array(vals)
    return BenefitStats(
        len(vals),
        missed,
        float(arr.mean()),
        float(np.median(arr)),
        float(np.percentile(arr, 25)),
        float(np.percentile(arr, 75)),
    )
