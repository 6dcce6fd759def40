"""HTTP face of the detection chain.

create_app() builds a FastAPI application exposing each stage (propose,
detect, localize), whole-dataset operations (run, evaluate, tune, bench,
overlay, synth, convert), and stateful live sessions that consume frames
one at a time.  Request payloads reference files on the server's
filesystem, which keeps megapixel rasters out of the JSON bodies; the
bundled CLI runs this app in-process so those paths are local ones.

Input problems (bad values, unreadable files) map to 400, unknown
sessions to 404, anything unexpected to 500.
"""

from __future__ import annotations

import dataclasses
import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..bench import bench_report, format_report
from ..classifier import LogisticArtifactClassifier, PeakBrightnessScorer, classify_proposals
from ..dataset import convert_pvdn, load_dataset
from ..errors import DataError, EarlybeamError
from ..geometry import default_camera, load_calibration, load_road_path, scaled_camera
from ..image import load_image
from ..localizer import METHODS, aggregate_box, gp_intersect, psd2d_locate, psd3d_locate
from ..metrics import format_quality
from ..overlay import overlay_frame, write_overlay
from ..pipeline import (
    PipelineConfig,
    PipelineSession,
    evaluate_dataset,
    first_emission_frame,
    load_pipeline_config,
    run_pipeline,
    write_results,
)
from ..proposer import ProposerParams, propose
from ..synthetic import SceneSpec, synth_generate
from ..tuning import optimize
from . import schemas

_SCALAR_CONFIG_FIELDS = (
    "classifier_threshold",
    "enlarge_factor",
    "method",
    "heuristic",
    "subsample",
    "alpha",
    "beta",
    "inflation",
    "creation_confidence",
    "output_confidence",
    "min_hit_frames",
    "max_miss_streak",
    "fps",
)


def _request_params(
    params_file: str | None, patch: schemas.ProposerParamsModel | None
) -> ProposerParams:
    base = ProposerParams.from_file(params_file) if params_file else ProposerParams()
    if patch is not None:
        fields = patch.model_dump(exclude_none=True)
        if fields:
            base = dataclasses.replace(base, **fields)
    return base


def _build_config(cfg: schemas.ConfigModel) -> PipelineConfig:
    """Turn the request's file references and overrides into a PipelineConfig.

    Precedence, lowest first: defaults, config_file contents, per-request
    file references, per-request scalars, then the partial params patch.
    """
    overrides: dict = {}
    if cfg.params_file is not None:
        overrides["proposer"] = ProposerParams.from_file(cfg.params_file)
    if cfg.calibration_file is not None:
        overrides["camera"] = load_calibration(cfg.calibration_file)
    if cfg.road_file is not None:
        overrides["road"] = load_road_path(cfg.road_file)
    if cfg.model_file is not None:
        overrides["model_path"] = cfg.model_file
    for name in _SCALAR_CONFIG_FIELDS:
        value = getattr(cfg, name)
        if value is not None:
            overrides[name] = value
    config = load_pipeline_config(cfg.config_file, **overrides)
    if cfg.params is not None:
        patch = cfg.params.model_dump(exclude_none=True)
        if patch:
            config = dataclasses.replace(
                config, proposer=dataclasses.replace(config.proposer, **patch)
            )
    return config


def _dataset_config(cfg: schemas.ConfigModel, dataset_root: str) -> PipelineConfig:
    """Config for a dataset run.

    When the request names no config file, a ``calibration.txt`` or
    ``road.txt`` sitting at the dataset root fills the matching gap, so
    datasets that carry their own geometry localize correctly by default.
    """
    if cfg.config_file is None:
        updates: dict = {}
        calibration = Path(dataset_root) / "calibration.txt"
        if cfg.calibration_file is None and calibration.is_file():
            updates["calibration_file"] = str(calibration)
        road = Path(dataset_root) / "road.txt"
        if cfg.road_file is None and road.is_file():
            updates["road_file"] = str(road)
        if updates:
            cfg = cfg.model_copy(update=updates)
    return _build_config(cfg)


@dataclasses.dataclass
class _LiveSession:
    pipeline: PipelineSession
    lock: threading.Lock


def create_app() -> FastAPI:
    app = FastAPI(title="earlybeam", version=__version__)
    sessions: dict[str, _LiveSession] = {}

    @app.exception_handler(EarlybeamError)
    async def _bad_input(request: Request, exc: EarlybeamError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(FileNotFoundError)
    async def _missing_file(request: Request, exc: FileNotFoundError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(Exception)
    async def _crash(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(
            status_code=500, content={"detail": f"{type(exc).__name__}: {exc}"}
        )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/propose", response_model=schemas.ProposeResponse)
    def propose_boxes(req: schemas.ProposeRequest) -> schemas.ProposeResponse:
        img = load_image(req.image_path)
        params = _request_params(req.params_file, req.params)
        boxes = propose(img, params)
        return schemas.ProposeResponse(
            boxes=[schemas.BoxModel.from_box(b) for b in boxes],
            image_width=img.width,
            image_height=img.height,
        )

    @app.post("/detect", response_model=schemas.DetectResponse)
    def detect(req: schemas.DetectRequest) -> schemas.DetectResponse:
        img = load_image(req.image_path)
        params = _request_params(req.params_file, req.params)
        boxes = propose(img, params)
        if req.model_file is not None:
            scorer = LogisticArtifactClassifier.load(req.model_file)
        else:
            scorer = PeakBrightnessScorer()
        scored = classify_proposals(img, boxes, scorer, req.threshold, req.enlarge_factor)
        return schemas.DetectResponse(
            detections=[schemas.ScoredBoxModel.from_scored(sb) for sb in scored]
        )

    @app.post("/localize", response_model=schemas.LocalizeResponse)
    def localize(req: schemas.LocalizeRequest) -> schemas.LocalizeResponse:
        if req.method not in METHODS:
            raise DataError(f"method must be one of {METHODS}")
        cam = load_calibration(req.calibration_file) if req.calibration_file else default_camera()
        road = load_road_path(req.road_file) if req.road_file else None
        if req.method != "GP" and road is None:
            raise DataError(f"method {req.method} needs a road path")
        if (req.pixel is None) == (req.box is None):
            raise DataError("pass exactly one of pixel or box")
        if req.pixel is not None:
            ray = cam.pixel_to_ray(req.pixel[0], req.pixel[1])
            if req.method == "GP":
                est = gp_intersect(ray)
            elif req.method == "PSD-3D":
                est = psd3d_locate(ray, road)
            else:
                est = psd2d_locate(ray, road)
        else:
            est = aggregate_box(
                req.box.to_box(), cam, req.method, req.heuristic, road, req.subsample
            )
        p = est.point
        return schemas.LocalizeResponse(
            point=(float(p[0]), float(p[1]), float(p[2])),
            distance_m=est.distance,
            method=est.method,
        )

    @app.post("/pipeline/run", response_model=schemas.RunResponse)
    def run(req: schemas.RunRequest) -> schemas.RunResponse:
        dataset = load_dataset(req.dataset_root)
        config = _dataset_config(req.config, req.dataset_root)
        results = run_pipeline(dataset, config, req.split)
        if req.results_path is not None:
            write_results(req.results_path, results)
        summaries = [
            schemas.SequenceSummary(
                sequence_id=res.sequence_id,
                frames=len(res.frames),
                failed_frames=sum(1 for fr in res.frames if fr.failed_stage is not None),
                emitting_frames=sum(1 for fr in res.frames if fr.outputs),
                first_emission_frame=first_emission_frame(res),
            )
            for res in results
        ]
        return schemas.RunResponse(sequences=summaries, results_path=req.results_path)

    @app.post("/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate(req: schemas.EvaluateRequest) -> schemas.EvaluateResponse:
        dataset = load_dataset(req.dataset_root)
        config = _dataset_config(req.config, req.dataset_root)
        report = evaluate_dataset(dataset, config, req.split, req.mode)
        table = format_quality(report.counts, report.scores)
        benefit = None
        if report.benefit is not None:
            b = report.benefit
            benefit = schemas.BenefitModel(
                detected=b.detected,
                missed=b.missed,
                mean_s=b.mean,
                median_s=b.median,
                quartile_low_s=b.quartile_low,
                quartile_high_s=b.quartile_high,
            )
            mean = "n/a" if b.mean is None else f"{b.mean:.2f} s"
            table += f"\ntime benefit: detected {b.detected}, missed {b.missed}, mean {mean}"
        resp = schemas.EvaluateResponse(
            mode=report.mode,
            split=report.split,
            counts=schemas.CountsModel(
                tp_keypoints=report.counts.tp_keypoints,
                fn_keypoints=report.counts.fn_keypoints,
                fp_boxes=report.counts.fp_boxes,
            ),
            metrics=schemas.QualityModel(**dataclasses.asdict(report.scores)),
            benefit=benefit,
            detection_frames=report.detection_frames,
            table=table,
        )
        if req.metrics_path is not None:
            Path(req.metrics_path).write_text(resp.model_dump_json(indent=2) + "\n")
        return resp

    @app.post("/tune", response_model=schemas.TuneResponse)
    def tune(req: schemas.TuneRequest) -> schemas.TuneResponse:
        dataset = load_dataset(req.dataset_root)

        def annotated_frames(split: str) -> list:
            frames = []
            for seq in dataset.split_sequences(split):
                for frame in seq.frames:
                    if frame.keypoints:
                        frames.append((frame.load_image(), frame.keypoints))
            return frames

        train = annotated_frames(req.train_split)
        val = annotated_frames(req.val_split)
        test = annotated_frames(req.test_split) if req.test_split else []
        base = ProposerParams.from_file(req.params_file) if req.params_file else None
        result = optimize(
            train,
            val,
            req.budget,
            req.seed,
            test or None,
            base_params=base,
            sampler=req.sampler,
            log_path=req.log_path,
            best_path=req.best_path,
        )
        return schemas.TuneResponse(
            best_params=dataclasses.asdict(result.best_params),
            best_index=result.best_index,
            best_val_objective=result.best_val_objective,
            test_objective=result.test_objective,
            trials=len(result.trials),
        )

    @app.post("/synth", response_model=schemas.SynthResponse)
    def synth(req: schemas.SynthRequest) -> schemas.SynthResponse:
        if req.sequences < 1:
            raise DataError("need at least one sequence")
        cam = scaled_camera(req.image_width, req.image_height)
        ids = []
        for i in range(req.sequences):
            spec = SceneSpec(
                camera=cam,
                frame_count=req.frame_count,
                start_distance_m=req.start_distance_m,
                approach_m_per_frame=req.approach_m_per_frame,
                indirect_from_frame=req.indirect_from_frame,
                direct_from_frame=req.direct_from_frame,
                noise_sigma=req.noise_sigma,
                seed=req.seed + i,
            )
            sequence_id = f"synth_{req.seed + i:03d}"
            synth_generate(spec, req.out_root, sequence_id, req.split)
            ids.append(sequence_id)
        return schemas.SynthResponse(root=req.out_root, sequence_ids=ids)

    @app.post("/bench", response_model=schemas.BenchResponse)
    def bench(req: schemas.BenchRequest) -> schemas.BenchResponse:
        dataset = load_dataset(req.dataset_root)
        config = _dataset_config(req.config, req.dataset_root)
        results = run_pipeline(dataset, config, req.split)
        timings = [fr.timings for res in results for fr in res.frames]
        report = bench_report(timings, config.fps)
        return schemas.BenchResponse(
            stages={
                name: schemas.StageStatsModel(**dataclasses.asdict(st))
                for name, st in report.items()
            },
            table=format_report(report),
        )

    @app.post("/overlay", response_model=schemas.OverlayResponse)
    def overlay(req: schemas.OverlayRequest) -> schemas.OverlayResponse:
        if req.mode not in ("proposals", "tracks"):
            raise DataError("overlay mode must be proposals or tracks")
        dataset = load_dataset(req.dataset_root)
        if req.sequence_id not in dataset.sequences:
            raise DataError(f"unknown sequence {req.sequence_id}")
        seq = dataset.sequences[req.sequence_id]
        config = _dataset_config(req.config, req.dataset_root)
        out_dir = Path(req.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        session = PipelineSession(config) if req.mode == "tracks" else None
        written = 0
        for frame in seq.frames:
            img = frame.load_image()
            if session is None:
                canvas = overlay_frame(
                    img, proposals=propose(img, config.proposer), keypoints=frame.keypoints
                )
            else:
                result = session.process_frame(img, frame.index)
                canvas = overlay_frame(
                    img,
                    proposals=result.proposals,
                    keypoints=frame.keypoints,
                    snapshots=result.snapshots,
                )
            write_overlay(out_dir / f"{frame.index:06d}.png", canvas)
            written += 1
        return schemas.OverlayResponse(out_dir=str(out_dir), written=written)

    @app.post("/convert-pvdn", response_model=schemas.ConvertResponse)
    def convert(req: schemas.ConvertRequest) -> schemas.ConvertResponse:
        dataset = convert_pvdn(req.pvdn_root, req.out_root, req.illumination)
        return schemas.ConvertResponse(
            out_root=str(req.out_root), sequences=len(dataset.sequences)
        )

    def _session_or_404(session_id: str) -> _LiveSession:
        live = sessions.get(session_id)
        if live is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")
        return live

    @app.post(
        "/sessions", response_model=schemas.SessionCreateResponse, status_code=201
    )
    def create_session(req: schemas.SessionCreateRequest) -> schemas.SessionCreateResponse:
        config = _build_config(req.config)
        session_id = uuid.uuid4().hex[:12]
        sessions[session_id] = _LiveSession(PipelineSession(config), threading.Lock())
        return schemas.SessionCreateResponse(session_id=session_id)

    @app.post("/sessions/{session_id}/frames", response_model=schemas.SessionFrameResponse)
    def push_frame(
        session_id: str, req: schemas.SessionFrameRequest
    ) -> schemas.SessionFrameResponse:
        live = _session_or_404(session_id)
        img = load_image(req.image_path)
        # One frame at a time per session; the tracker is strictly sequential.
        with live.lock:
            result = live.pipeline.process_frame(img, req.frame_index)
        return schemas.SessionFrameResponse(
            frame_index=result.frame_index,
            proposals=[schemas.BoxModel.from_box(b) for b in result.proposals],
            tracks=[schemas.TrackSnapshotModel.from_snapshot(s) for s in result.snapshots],
            failed_stage=result.failed_stage,
            error=result.error,
            timings_ms={k: v * 1000.0 for k, v in result.timings.items()},
        )

    def _session_info(session_id: str, live: _LiveSession) -> schemas.SessionInfo:
        return schemas.SessionInfo(
            session_id=session_id,
            frames_seen=live.pipeline.frames_seen,
            live_tracks=len(live.pipeline.tracker.tracks),
        )

    @app.get("/sessions/{session_id}", response_model=schemas.SessionInfo)
    def session_info(session_id: str) -> schemas.SessionInfo:
        return _session_info(session_id, _session_or_404(session_id))

    @app.delete("/sessions/{session_id}", response_model=schemas.SessionInfo)
    def close_session(session_id: str) -> schemas.SessionInfo:
        info = _session_info(session_id, _session_or_404(session_id))
        del sessions[session_id]
        return info

    return app
