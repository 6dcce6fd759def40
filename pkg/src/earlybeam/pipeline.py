"""End-to-end frame processing: propose, classify, localize, track.

A PipelineSession owns the tracker state and consumes frames strictly in
order, recording wall-clock time per stage.  One misbehaving frame marks
itself failed and the run continues; the tracker still advances so track
ages and miss streaks stay honest.

Results files are tab-separated with one record per live track per frame:

    frame  track_id  x_min  y_min  x_max  y_max  confidence  distance_m  emit

``distance_m`` is ``nan`` when no estimate exists yet; ``emit`` is 1 once
the track has passed the plausibility gate.  A ``#`` header line repeats
the column names.  Timings are reported separately since they are the one
non-deterministic output.
"""

from __future__ import annotations

import dataclasses
import json
import time
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .boxes import BBox
from .classifier import (
    DEFAULT_ENLARGE,
    DEFAULT_THRESHOLD,
    LogisticArtifactClassifier,
    PeakBrightnessScorer,
    Scorer,
    classify_proposals,
)
from .dataset import Dataset, SequenceRecord
from .errors import DataError, EarlybeamError
from .geometry import CameraModel, RoadPath, default_camera, load_calibration, load_road_path
from .image import GrayImage
from .localizer import HEURISTICS, METHODS, aggregate_box
from .metrics import (
    DEFAULT_FPS,
    BenefitStats,
    EventCounts,
    Quality,
    aggregate_benefits,
    quality,
    score_frame,
    time_benefit,
)
from .proposer import ProposerParams
from .proposer import propose as propose_boxes
from .tracker import Detection, Tracker, TrackSnapshot

STAGES = ("propose", "classify", "localize", "track")


@dataclasses.dataclass(frozen=True)
class PipelineConfig:
    """Everything the sequential node chain needs, in one place."""

    proposer: ProposerParams = dataclasses.field(default_factory=ProposerParams)
    camera: CameraModel = dataclasses.field(default_factory=default_camera)
    road: RoadPath | None = None
    model_path: str | None = None
    classifier_threshold: float = DEFAULT_THRESHOLD
    enlarge_factor: float = DEFAULT_ENLARGE
    method: str = "GP"
    heuristic: str = "max"
    subsample: int = 2
    alpha: float = 0.5
    beta: float = 0.1
    inflation: float = 0.1
    creation_confidence: float = 0.1
    output_confidence: float = 0.5
    min_hit_frames: int = 5
    max_miss_streak: int = 3
    fps: float = DEFAULT_FPS

    def __post_init__(self) -> None:
        if self.fps <= 0:
            raise DataError("frame rate must be positive")
        if self.method not in METHODS:
            raise DataError(f"method must be one of {METHODS}")
        if self.heuristic not in HEURISTICS:
            raise DataError(f"heuristic must be one of {HEURISTICS}")
        if self.method != "GP" and self.road is None:
            raise DataError(f"method {self.method} needs a road path")

    def build_scorer(self) -> Scorer:
        if self.model_path is None:
            return PeakBrightnessScorer()
        return LogisticArtifactClassifier.load(self.model_path)


def load_pipeline_config(path: str | Path | None = None, **overrides) -> PipelineConfig:
    """Assemble a config from an optional JSON file plus keyword overrides.

    File keys: params_file, calibration_file, road_file, model_file, and
    any scalar PipelineConfig field.  Overrides win over file values.
    """
    values: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise DataError(f"{path}: config must be a JSON object")
        base = Path(path).parent

        def resolve(p: str) -> Path:
            q = Path(p)
            return q if q.is_absolute() else base / q

        file_keys = {
            "params_file": lambda p: ("proposer", ProposerParams.from_file(resolve(p))),
            "calibration_file": lambda p: ("camera", load_calibration(resolve(p))),
            "road_file": lambda p: ("road", load_road_path(resolve(p))),
            "model_file": lambda p: ("model_path", str(resolve(p))),
        }
        for key, build in file_keys.items():
            if key in raw and raw[key] is not None:
                field, value = build(raw.pop(key))
                values[field] = value
            else:
                raw.pop(key, None)
        scalar_fields = {f.name for f in dataclasses.fields(PipelineConfig)}
        unknown = set(raw) - scalar_fields
        if unknown:
            raise DataError(f"{path}: unknown config keys: {sorted(unknown)}")
        values.update(raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**values)


@dataclasses.dataclass(frozen=True)
class FrameResult:
    """Everything one frame produced, plus per-stage seconds."""

    frame_index: int
    proposals: tuple[BBox, ...]
    detections: tuple[Detection, ...]
    snapshots: tuple[TrackSnapshot, ...]
    timings: dict[str, float]
    failed_stage: str | None = None
    error: str | None = None

    @property
    def outputs(self) -> tuple[TrackSnapshot, ...]:
        return tuple(s for s in self.snapshots if s.emit)


class PipelineSession:
    """Stateful processor; feed frames in order through process_frame."""

    def __init__(self, config: PipelineConfig, scorer: Scorer | None = None):
        self.config = config
        self.scorer = scorer if scorer is not None else config.build_scorer()
        self.tracker = Tracker(
            alpha=config.alpha,
            beta=config.beta,
            inflation=config.inflation,
            creation_confidence=config.creation_confidence,
            output_confidence=config.output_confidence,
            min_hit_frames=config.min_hit_frames,
            max_miss_streak=config.max_miss_streak,
        )
        self.frames_seen = 0

    def process_frame(self, img: GrayImage, frame_index: int | None = None) -> FrameResult:
        cfg = self.config
        index = self.frames_seen if frame_index is None else frame_index
        self.frames_seen += 1
        timings: dict[str, float] = {}
        proposals: tuple[BBox, ...] = ()
        detections: tuple[Detection, ...] = ()
        failed_stage = None
        error = None
        start_total = time.perf_counter()

        stage = "propose"
        try:
            t0 = time.perf_counter()
            proposals = tuple(propose_boxes(img, cfg.proposer))
            timings["propose"] = time.perf_counter() - t0

            stage = "classify"
            t0 = time.perf_counter()
            scored = classify_proposals(
                img, proposals, self.scorer, cfg.classifier_threshold, cfg.enlarge_factor
            )
            timings["classify"] = time.perf_counter() - t0

            stage = "localize"
            t0 = time.perf_counter()
            dets = []
            for sb in scored:
                distance = None
                # Junk below the track-creation bar is not worth localizing.
                if sb.error is None and sb.score > cfg.creation_confidence:
                    try:
                        est = aggregate_box(
                            sb.box, cfg.camera, cfg.method, cfg.heuristic, cfg.road, cfg.subsample
                        )
                        distance = est.distance
                    except EarlybeamError:
                        distance = None
                dets.append(Detection(sb.box, sb.score, distance))
            detections = tuple(dets)
            timings["localize"] = time.perf_counter() - t0
        except Exception as exc:  # noqa: BLE001 - a bad frame must not end the run
            failed_stage = stage
            error = str(exc)
            detections = ()

        t0 = time.perf_counter()
        snapshots = tuple(self.tracker.step(detections))
        timings["track"] = time.perf_counter() - t0
        timings.setdefault("propose", 0.0)
        timings.setdefault("classify", 0.0)
        timings.setdefault("localize", 0.0)
        timings["total"] = time.perf_counter() - start_total
        return FrameResult(index, proposals, detections, snapshots, timings, failed_stage, error)


@dataclasses.dataclass(frozen=True)
class SequenceResult:
    sequence_id: str
    frames: tuple[FrameResult, ...]


def run_sequence(seq: SequenceRecord, config: PipelineConfig, scorer: Scorer | None = None) -> SequenceResult:
    """Process one recorded sequence in frame order with a fresh session."""
    session = PipelineSession(config, scorer)
    results = [session.process_frame(frame.load_image(), frame.index) for frame in seq.frames]
    return SequenceResult(seq.sequence_id, tuple(results))


def run_pipeline(
    dataset: Dataset, config: PipelineConfig, split: str | None = None, scorer: Scorer | None = None
) -> list[SequenceResult]:
    """Run every sequence (optionally only one split's) through the pipeline."""
    if split is None:
        seqs = [dataset.sequences[sid] for sid in sorted(dataset.sequences)]
    else:
        seqs = dataset.split_sequences(split)
    return [run_sequence(seq, config, scorer) for seq in seqs]


EVAL_MODES = ("proposals", "detections", "tracks")


@dataclasses.dataclass(frozen=True)
class EvalReport:
    """Dataset-level metrics, plus detection latency when tracking ran."""

    mode: str
    split: str | None
    counts: EventCounts
    scores: Quality
    detection_frames: dict[str, int | None]
    benefit: BenefitStats | None


def first_emission_frame(result: SequenceResult) -> int | None:
    """Frame index of the sequence's first plausibility-gated track output."""
    for fr in result.frames:
        if any(s.emit for s in fr.snapshots):
            return fr.frame_index
    return None


def evaluate_dataset(
    dataset: Dataset,
    config: PipelineConfig,
    split: str | None = None,
    mode: str = "proposals",
    scorer: Scorer | None = None,
) -> EvalReport:
    """Score predicted boxes against keypoint annotations.

    mode picks what counts as a prediction: raw proposals, boxes the
    classifier labeled artifact, or plausibility-gated track outputs.  In
    tracks mode, sequences with a first-annotation tag also get a detection
    latency (seconds from that tag to the first emitted track).
    """
    if mode not in EVAL_MODES:
        raise DataError(f"mode must be one of {EVAL_MODES}")
    if split is None:
        seqs = [dataset.sequences[sid] for sid in sorted(dataset.sequences)]
    else:
        seqs = dataset.split_sequences(split)
    if not seqs:
        raise DataError("no sequences to evaluate")
    counts = EventCounts()
    detection_frames: dict[str, int | None] = {}
    benefits: list[float | None] = []
    the_scorer = scorer if scorer is not None else config.build_scorer()
    for seq in seqs:
        if mode == "tracks":
            result = run_sequence(seq, config, the_scorer)
            by_index = {fr.frame_index: fr for fr in result.frames}
            for frame in seq.frames:
                boxes = [s.box for s in by_index[frame.index].snapshots if s.emit]
                counts = counts + score_frame(boxes, frame.keypoints)
            detection_frames[seq.sequence_id] = first_emission_frame(result)
            if seq.tags.first_annotation is not None:
                benefits.append(
                    time_benefit(seq.tags, detection_frames[seq.sequence_id], config.fps)
                )
        else:
            for frame in seq.frames:
                img = frame.load_image()
                boxes = list(propose_boxes(img, config.proposer))
                if mode == "detections":
                    scored = classify_proposals(
                        img, boxes, the_scorer, config.classifier_threshold, config.enlarge_factor
                    )
                    boxes = [sb.box for sb in scored if sb.label]
                counts = counts + score_frame(boxes, frame.keypoints)
    benefit = aggregate_benefits(benefits) if benefits else None
    return EvalReport(mode, split, counts, quality(counts), detection_frames, benefit)


RESULT_COLUMNS = ("frame", "track_id", "x_min", "y_min", "x_max", "y_max", "confidence", "distance_m", "emit")


def write_results(path: str | Path, results: Sequence[SequenceResult]) -> None:
    """Write the per-track records documented in the module docstring."""
    lines = ["# " + "\t".join(RESULT_COLUMNS)]
    for seq_result in results:
        if len(results) > 1:
            lines.append(f"# sequence {seq_result.sequence_id}")
        for fr in seq_result.frames:
            for snap in fr.snapshots:
                b = snap.box
                dist = "nan" if snap.distance is None else repr(snap.distance)
                lines.append(
                    "\t".join(
                        [
                            str(fr.frame_index),
                            str(snap.track_id),
                            repr(b.x_min),
                            repr(b.y_min),
                            repr(b.x_max),
                            repr(b.y_max),
                            repr(snap.confidence),
                            dist,
                            "1" if snap.emit else "0",
                        ]
                    )
                )
    Path(path).write_text("\n".join(lines) + "\n")


@dataclasses.dataclass(frozen=True)
class LiveReplay:
    """Outcome of replaying a sequence against the frame clock."""

    processed: tuple[FrameResult, ...]
    dropped_frames: tuple[int, ...]


def replay_live(
    frames: Iterable[tuple[int, GrayImage]],
    config: PipelineConfig,
    duration_fn: Callable[[FrameResult], float] | None = None,
) -> LiveReplay:
    """Replay frames at the configured rate, dropping arrivals while busy.

    Frame i arrives at i / fps seconds.  If the session is still working
    when a frame arrives, that frame is dropped, mirroring a real-time
    node that always takes the newest image.  ``duration_fn`` overrides the
    measured processing time (simulated clock), keeping tests exact.
    """
    session = PipelineSession(config)
    interval = 1.0 / config.fps
    busy_until = 0.0
    processed: list[FrameResult] = []
    dropped: list[int] = []
    for i, (index, img) in enumerate(frames):
        arrival = i * interval
        if arrival < busy_until:
            dropped.append(index)
            continue
        result = session.process_frame(img, index)
        cost = result.timings["total"] if duration_fn is None else duration_fn(result)
        busy_until = arrival + cost
        processed.append(result)
    return LiveReplay(tuple(processed), tuple(dropped))
