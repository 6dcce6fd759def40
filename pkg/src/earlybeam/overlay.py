"""Burn detections, tracks, and ground truth into viewable images."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import cv2
import numpy as np

from .boxes import BBox, Keypoint
from .errors import DataError
from .image import GrayImage
from .tracker import TrackSnapshot

PROPOSAL_COLOR = (200, 200, 200)
TRACK_COLOR = (80, 200, 80)
PENDING_COLOR = (60, 140, 230)
KEYPOINT_COLOR = (60, 60, 255)


def _rect(canvas: np.ndarray, box: BBox, color, thickness: int = 1) -> None:
    cv2.rectangle(
        canvas,
        (int(round(box.x_min)), int(round(box.y_min))),
        (int(round(box.x_max)), int(round(box.y_max))),
        color,
        thickness,
    )


def overlay_frame(
    img: GrayImage,
    proposals: Sequence[BBox] = (),
    keypoints: Sequence[Keypoint] = (),
    snapshots: Sequence[TrackSnapshot] = (),
) -> np.ndarray:
    """Render an annotated BGR image.

    Proposals are thin gray, pending tracks orange, emitted tracks green
    with id and distance, keypoints red crosses.
    """
    canvas = cv2.cvtColor(img.to_uint8(), cv2.COLOR_GRAY2BGR)
    for box in proposals:
        _rect(canvas, box, PROPOSAL_COLOR, 1)
    for snap in snapshots:
        color = TRACK_COLOR if snap.emit else PENDING_COLOR
        _rect(canvas, snap.box, color, 2)
        label = f"#{snap.track_id}"
        if snap.distance is not None:
            label += f" {snap.distance:.0f}m"
        cv2.putText(
            canvas,
            label,
            (int(round(snap.box.x_min)), max(12, int(round(snap.box.y_min)) - 4)),
            cv2.FONT_HERSHEY_SIMPLEX,
            0.45,
            color,
            1,
            cv2.LINE_AA,
        )
    for kp in keypoints:
        cv2.drawMarker(
            canvas,
            (int(round(kp.x)), int(round(kp.y))),
            KEYPOINT_COLOR,
            cv2.MARKER_CROSS,
            9,
            1,
        )
    return canvas


def write_overlay(path: str | Path, canvas: np.ndarray) -> None:
    if not cv2.imwrite(str(path), canvas):
        raise DataError(f"could not write overlay image {path}")
