"""Request and response bodies of the HTTP API.

File-path fields refer to the server's filesystem; with the default
in-process client the server and the caller share one machine, which keeps
megapixel frames out of the JSON bodies.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict

from ..boxes import BBox, Keypoint
from ..classifier import ScoredBox
from ..tracker import TrackSnapshot


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BoxModel(StrictModel):
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @classmethod
    def from_box(cls, box: BBox) -> "BoxModel":
        return cls(x_min=box.x_min, y_min=box.y_min, x_max=box.x_max, y_max=box.y_max)

    def to_box(self) -> BBox:
        return BBox(self.x_min, self.y_min, self.x_max, self.y_max)


class KeypointModel(StrictModel):
    x: float
    y: float
    vehicle_id: int = 0
    kind: str = "direct"

    @classmethod
    def from_keypoint(cls, kp: Keypoint) -> "KeypointModel":
        return cls(x=kp.x, y=kp.y, vehicle_id=kp.vehicle_id, kind=kp.kind)


class ProposerParamsModel(StrictModel):
    """Partial proposer parameters; unset fields keep their current value."""

    kappa: float | None = None
    window: int | None = None
    mad_threshold: float | None = None
    gap: int | None = None
    blur_kernel: int | None = None
    blur_sigma: float | None = None
    downscale: float | None = None


class ConfigModel(StrictModel):
    """Pipeline configuration by reference: files plus scalar overrides."""

    config_file: str | None = None
    params_file: str | None = None
    model_file: str | None = None
    calibration_file: str | None = None
    road_file: str | None = None
    params: ProposerParamsModel | None = None
    classifier_threshold: float | None = None
    enlarge_factor: float | None = None
    method: str | None = None
    heuristic: str | None = None
    subsample: int | None = None
    alpha: float | None = None
    beta: float | None = None
    inflation: float | None = None
    creation_confidence: float | None = None
    output_confidence: float | None = None
    min_hit_frames: int | None = None
    max_miss_streak: int | None = None
    fps: float | None = None


class HealthResponse(StrictModel):
    status: str
    version: str


class ProposeRequest(StrictModel):
    image_path: str
    params_file: str | None = None
    params: ProposerParamsModel | None = None


class ProposeResponse(StrictModel):
    boxes: list[BoxModel]
    image_width: int
    image_height: int


class ScoredBoxModel(StrictModel):
    box: BoxModel
    score: float
    label: bool
    error: str | None = None

    @classmethod
    def from_scored(cls, sb: ScoredBox) -> "ScoredBoxModel":
        return cls(box=BoxModel.from_box(sb.box), score=sb.score, label=sb.label, error=sb.error)


class DetectRequest(ProposeRequest):
    model_file: str | None = None
    threshold: float = 0.5
    enlarge_factor: float = 1.5


class DetectResponse(StrictModel):
    detections: list[ScoredBoxModel]


class LocalizeRequest(StrictModel):
    pixel: tuple[float, float] | None = None
    box: BoxModel | None = None
    calibration_file: str | None = None
    road_file: str | None = None
    method: str = "GP"
    heuristic: str = "max"
    subsample: int = 2


class LocalizeResponse(StrictModel):
    point: tuple[float, float, float]
    distance_m: float
    method: str


class RunRequest(StrictModel):
    dataset_root: str
    split: str | None = None
    config: ConfigModel = ConfigModel()
    results_path: str | None = None


class SequenceSummary(StrictModel):
    sequence_id: str
    frames: int
    failed_frames: int
    emitting_frames: int
    first_emission_frame: int | None


class RunResponse(StrictModel):
    sequences: list[SequenceSummary]
    results_path: str | None


class QualityModel(StrictModel):
    precision: float | None
    recall: float | None
    f_score: float | None
    q_k: float | None
    q_b: float | None
    q: float | None


class CountsModel(StrictModel):
    tp_keypoints: int
    fn_keypoints: int
    fp_boxes: int


class BenefitModel(StrictModel):
    detected: int
    missed: int
    mean_s: float | None
    median_s: float | None
    quartile_low_s: float | None
    quartile_high_s: float | None


class EvaluateRequest(StrictModel):
    dataset_root: str
    split: str | None = None
    mode: str = "proposals"
    config: ConfigModel = ConfigModel()
    metrics_path: str | None = None


class EvaluateResponse(StrictModel):
    mode: str
    split: str | None
    counts: CountsModel
    metrics: QualityModel
    benefit: BenefitModel | None
    detection_frames: dict[str, int | None]
    table: str


class TuneRequest(StrictModel):
    dataset_root: str
    budget: int = 50
    seed: int = 0
    sampler: str = "tpe"
    train_split: str = "train"
    val_split: str = "val"
    test_split: str | None = "test"
    params_file: str | None = None
    log_path: str | None = None
    best_path: str | None = None


class TuneResponse(StrictModel):
    best_params: dict
    best_index: int
    best_val_objective: float
    test_objective: float | None
    trials: int


class SynthRequest(StrictModel):
    out_root: str
    sequences: int = 1
    split: str = "train"
    seed: int = 0
    frame_count: int = 30
    image_width: int = 1280
    image_height: int = 960
    start_distance_m: float = 150.0
    approach_m_per_frame: float = 1.0
    indirect_from_frame: int | None = 0
    direct_from_frame: int | None = 15
    noise_sigma: float = 0.01


class SynthResponse(StrictModel):
    root: str
    sequence_ids: list[str]


class BenchRequest(StrictModel):
    dataset_root: str
    split: str | None = None
    config: ConfigModel = ConfigModel()


class StageStatsModel(StrictModel):
    stage: str
    count: int
    mean_ms: float
    std_ms: float
    p50_ms: float
    p90_ms: float
    p99_ms: float
    max_ms: float
    budget_ms: float
    under_budget: float


class BenchResponse(StrictModel):
    stages: dict[str, StageStatsModel]
    table: str


class OverlayRequest(StrictModel):
    dataset_root: str
    sequence_id: str
    out_dir: str
    mode: str = "tracks"
    config: ConfigModel = ConfigModel()


class OverlayResponse(StrictModel):
    out_dir: str
    written: int


class ConvertRequest(StrictModel):
    pvdn_root: str
    out_root: str
    illumination: str = "day"


class ConvertResponse(StrictModel):
    out_root: str
    sequences: int


class SessionCreateRequest(StrictModel):
    config: ConfigModel = ConfigModel()


class SessionCreateResponse(StrictModel):
    session_id: str


class TrackSnapshotModel(StrictModel):
    track_id: int
    box: BoxModel
    distance_m: float | None
    confidence: float
    emit: bool

    @classmethod
    def from_snapshot(cls, snap: TrackSnapshot) -> "TrackSnapshotModel":
        return cls(
            track_id=snap.track_id,
            box=BoxModel.from_box(snap.box),
            distance_m=snap.distance,
            confidence=snap.confidence,
            emit=snap.emit,
        )


class SessionFrameRequest(StrictModel):
    image_path: str
    frame_index: int | None = None


class SessionFrameResponse(StrictModel):
    frame_index: int
    proposals: list[BoxModel]
    tracks: list[TrackSnapshotModel]
    failed_stage: str | None
    error: str | None
    timings_ms: dict[str, float]


class SessionInfo(StrictModel):
    session_id: str
    frames_seen: int
    live_tracks: int
