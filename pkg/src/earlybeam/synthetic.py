"""Synthetic night scenes with exact ground truth.

An oncoming vehicle approaches along x.  Its light shows up in two stages,
mirroring how a driver experiences it: first an indirect artifact (the wide,
dim pool its headlamps throw onto the road ahead of it), later the direct
headlamps themselves (narrow, saturated).  Blobs are additive Gaussians on
a dark noisy background; every keypoint sits at a blob's intensity maximum,
depth rasters carry the true range at the artifact, and sequence tags fall
out of the schedule.  Rendering is bit-deterministic given the seed.
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from .boxes import Keypoint
from .dataset import Dataset, load_dataset, save_annotations, save_tags, canonical_json
from .errors import DataError
from .geometry import CameraModel, RoadPath, default_camera, save_calibration, save_road_path
from .image import GrayImage, save_depth_pgm, save_pgm
from .metrics import DEFAULT_FPS, SequenceTags

HEADLAMP_HEIGHT_M = 0.7
HEADLAMP_SPACING_M = 1.6
HUMAN_REACTION_S = 0.8


@dataclasses.dataclass(frozen=True)
class SceneSpec:
    """Everything needed to render one approach sequence deterministically."""

    camera: CameraModel = dataclasses.field(default_factory=default_camera)
    frame_count: int = 30
    start_distance_m: float = 150.0
    approach_m_per_frame: float = 1.0
    lateral_offset_m: float = 3.5
    pool_lead_m: float = 20.0
    indirect_from_frame: int | None = 0
    direct_from_frame: int | None = 15
    indirect_peak: float = 0.35
    direct_peak: float = 0.95
    indirect_sigma_px: float = 12.0
    direct_sigma_px: float = 3.0
    background: float = 0.02
    noise_sigma: float = 0.01
    artifact_elevation_m: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.frame_count < 1:
            raise DataError("frame_count must be at least 1")
        if not 0.0 < self.indirect_peak <= 0.4:
            raise DataError("indirect artifacts must stay dim (peak in (0, 0.4])")
        if not 0.9 <= self.direct_peak <= 1.0:
            raise DataError("direct artifacts must be near-saturated (peak in [0.9, 1])")
        if self.indirect_sigma_px <= self.direct_sigma_px:
            raise DataError("indirect blobs must be wider than direct ones")
        if self.background < 0 or self.noise_sigma < 0:
            raise DataError("background and noise must be non-negative")


@dataclasses.dataclass(frozen=True)
class Artifact:
    """One light blob in a frame, with its true 3-D source point."""

    point: np.ndarray
    pixel: tuple[float, float]
    peak: float
    sigma_px: float
    kind: str
    vehicle_id: int


def artifacts_at(spec: SceneSpec, frame: int) -> list[Artifact]:
    """True artifact states for a frame; off-image or passed ones drop out."""
    cam = spec.camera
    dist = spec.start_distance_m - spec.approach_m_per_frame * frame
    out: list[Artifact] = []

    def try_add(point: np.ndarray, peak: float, sigma: float, kind: str) -> None:
        try:
            px, py = cam.project(point)
        except DataError:
            return
        if 0 <= px <= cam.width - 1 and 0 <= py <= cam.height - 1:
            out.append(Artifact(point, (px, py), peak, sigma, kind, 1))

    if spec.indirect_from_frame is not None and frame >= spec.indirect_from_frame:
        pool = np.array(
            [dist - spec.pool_lead_m, spec.lateral_offset_m * 0.6, spec.artifact_elevation_m]
        )
        if pool[0] > 0:
            try_add(pool, spec.indirect_peak, spec.indirect_sigma_px, "indirect")
    if spec.direct_from_frame is not None and frame >= spec.direct_from_frame and dist > 0:
        for side in (-0.5, 0.5):
            lamp = np.array(
                [
                    dist,
                    spec.lateral_offset_m + side * HEADLAMP_SPACING_M,
                    HEADLAMP_HEIGHT_M + spec.artifact_elevation_m,
                ]
            )
            try_add(lamp, spec.direct_peak, spec.direct_sigma_px, "direct")
    return out


@dataclasses.dataclass(frozen=True)
class RenderedFrame:
    image: GrayImage
    keypoints: tuple[Keypoint, ...]
    depth_m: np.ndarray
    artifacts: tuple[Artifact, ...]


def render_frame(spec: SceneSpec, frame: int) -> RenderedFrame:
    """Render one frame with its exact annotations and depth raster."""
    cam = spec.camera
    h, w = cam.height, cam.width
    rng = np.random.default_rng([spec.seed, frame])
    img = np.full((h, w), spec.background, dtype=np.float64)
    depth = np.zeros((h, w), dtype=np.float64)
    arts = artifacts_at(spec, frame)
    for art in arts:
        px, py = art.pixel
        reach = int(math.ceil(4.0 * art.sigma_px))
        x0, x1 = max(0, int(px) - reach), min(w - 1, int(px) + reach)
        y0, y1 = max(0, int(py) - reach), min(h - 1, int(py) + reach)
        ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
        blob = art.peak * np.exp(
            -((xs - px) ** 2 + (ys - py) ** 2) / (2.0 * art.sigma_px**2)
        )
        img[y0 : y1 + 1, x0 : x1 + 1] += blob
        # LiDAR-like returns over the blob core, carrying the true range.
        core = blob >= art.peak * 0.5
        rng_m = float(np.linalg.norm(art.point))
        patch = depth[y0 : y1 + 1, x0 : x1 + 1]
        patch[core] = rng_m
    if spec.noise_sigma > 0:
        img += rng.normal(0.0, spec.noise_sigma, size=img.shape)
    img = np.clip(img, 0.0, 1.0)
    kps = tuple(
        Keypoint(a.pixel[0], a.pixel[1], a.vehicle_id, a.kind) for a in arts
    )
    return RenderedFrame(GrayImage(img), kps, depth, tuple(arts))


def scene_tags(spec: SceneSpec) -> SequenceTags:
    """Tags implied by the schedule, clamped to frames that exist."""
    first_ann: int | None = None
    first_direct: int | None = None
    for frame in range(spec.frame_count):
        arts = artifacts_at(spec, frame)
        if first_ann is None and arts:
            first_ann = frame
        if first_direct is None and any(a.kind == "direct" for a in arts):
            first_direct = frame
        if first_ann is not None and first_direct is not None:
            break
    reaction = None
    detection = None
    if first_direct is not None:
        reaction = min(spec.frame_count - 1, first_direct + int(round(HUMAN_REACTION_S * DEFAULT_FPS)))
        detection = first_direct
    return SequenceTags(first_ann, reaction, first_direct, detection)


def synth_generate(
    spec: SceneSpec,
    out_root: str | Path,
    sequence_id: str = "synth_000",
    split: str = "train",
) -> Dataset:
    """Render a full sequence to disk and return the loaded dataset.

    Existing sequences at out_root are preserved; the new sequence is
    appended to the requested split.  The scene's camera calibration and
    the oncoming lane's polyline are written beside the sequences so the
    dataset is localizable as recorded.
    """
    out_root = Path(out_root)
    seq_dir = out_root / "sequences" / sequence_id
    for sub in ("frames", "annotations", "depth"):
        (seq_dir / sub).mkdir(parents=True, exist_ok=True)
    save_calibration(out_root / "calibration.txt", spec.camera)
    lane_x = np.arange(1.0, math.ceil(spec.start_distance_m) + 11.0)
    lane = np.column_stack([lane_x, np.full_like(lane_x, spec.lateral_offset_m), np.zeros_like(lane_x)])
    save_road_path(out_root / "road.txt", RoadPath(lane))
    for frame in range(spec.frame_count):
        rendered = render_frame(spec, frame)
        stem = f"{frame:06d}"
        save_pgm(seq_dir / "frames" / f"{stem}.pgm", rendered.image)
        if rendered.keypoints:
            save_annotations(seq_dir / "annotations" / f"{stem}.json", rendered.keypoints)
        if (rendered.depth_m > 0).any():
            save_depth_pgm(seq_dir / "depth" / f"{stem}.pgm", rendered.depth_m)
    save_tags(seq_dir / "tags.json", scene_tags(spec))

    manifest = out_root / "splits.json"
    if manifest.exists():
        splits = {k: list(v) for k, v in json.loads(manifest.read_text()).items()}
    else:
        splits = {"train": [], "val": [], "test": []}
    if split not in splits:
        raise DataError(f"split must be one of {sorted(splits)}")
    if sequence_id not in splits[split]:
        splits[split].append(sequence_id)
    manifest.write_text(canonical_json(splits))
    return load_dataset(out_root)
