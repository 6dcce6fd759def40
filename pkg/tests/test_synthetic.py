"""Synthetic scene generator: schedule, rendering, ground truth, dataset output."""

import dataclasses
import json
import math

import numpy as np
import pytest

from earlybeam.errors import DataError
from earlybeam.geometry import scaled_camera
from earlybeam.localizer import gp_intersect
from earlybeam.proposer import ProposerParams, propose
from earlybeam.synthetic import (
    HEADLAMP_HEIGHT_M,
    HEADLAMP_SPACING_M,
    SceneSpec,
    artifacts_at,
    render_frame,
    scene_tags,
    synth_generate,
)


def test_scene_spec_validation(small_scene):
    for bad in (
        {"frame_count": 0},
        {"indirect_peak": 0.0},
        {"indirect_peak": 0.5},
        {"direct_peak": 0.5},
        {"indirect_sigma_px": 3.0, "direct_sigma_px": 3.0},
        {"background": -0.1},
        {"noise_sigma": -0.5},
    ):
        with pytest.raises(DataError):
            dataclasses.replace(small_scene, **bad)


def test_schedule_indirect_then_direct(small_scene):
    # Frames before direct_from_frame carry only the road pool.
    early = artifacts_at(small_scene, 0)
    assert [a.kind for a in early] == ["indirect"]
    pool = early[0]
    assert pool.point == pytest.approx(
        [60.0 - 20.0, 3.5 * 0.6, 0.0]
    )
    assert pool.peak == small_scene.indirect_peak
    assert pool.sigma_px == small_scene.indirect_sigma_px

    assert [a.kind for a in artifacts_at(small_scene, 4)] == ["indirect"]

    # From direct_from_frame on, the two headlamps join the pool.
    late = artifacts_at(small_scene, 5)
    assert sorted(a.kind for a in late) == ["direct", "direct", "indirect"]
    lamps = [a for a in late if a.kind == "direct"]
    laterals = sorted(a.point[1] for a in lamps)
    assert laterals == pytest.approx(
        [3.5 - HEADLAMP_SPACING_M / 2, 3.5 + HEADLAMP_SPACING_M / 2]
    )
    for lamp in lamps:
        assert lamp.point[0] == pytest.approx(60.0 - 5.0)
        assert lamp.point[2] == pytest.approx(HEADLAMP_HEIGHT_M)
        assert lamp.peak == small_scene.direct_peak
    assert all(a.vehicle_id == 1 for a in late)


def test_schedule_respects_start_frames(small_scene):
    delayed = dataclasses.replace(small_scene, indirect_from_frame=3)
    assert artifacts_at(delayed, 0) == []
    assert artifacts_at(delayed, 2) == []
    assert [a.kind for a in artifacts_at(delayed, 3)] == ["indirect"]

    never = dataclasses.replace(small_scene, indirect_from_frame=None)
    assert artifacts_at(never, 0) == []
    assert [a.kind for a in artifacts_at(never, 5)] == ["direct", "direct"]


def test_passed_vehicle_drops_out():
    spec = SceneSpec(
        camera=scaled_camera(320, 240),
        frame_count=4,
        start_distance_m=2.0,
        lateral_offset_m=0.0,
        indirect_from_frame=None,
        direct_from_frame=0,
        seed=1,
    )
    assert len(artifacts_at(spec, 0)) == 2
    # Distance hits zero at frame 2 and goes negative after: nothing remains.
    assert artifacts_at(spec, 2) == []
    assert artifacts_at(spec, 3) == []


def test_off_image_artifacts_drop_out():
    spec = SceneSpec(
        camera=scaled_camera(320, 240),
        frame_count=1,
        start_distance_m=40.0,
        lateral_offset_m=30.0,
        direct_from_frame=None,
        seed=1,
    )
    assert artifacts_at(spec, 0) == []


def test_render_is_bit_deterministic(small_scene):
    first = render_frame(small_scene, 3)
    again = render_frame(small_scene, 3)
    assert np.array_equal(first.image.data, again.image.data)
    assert np.array_equal(first.depth_m, again.depth_m)
    assert first.keypoints == again.keypoints

    other_frame = render_frame(small_scene, 4)
    assert not np.array_equal(first.image.data, other_frame.image.data)
    other_seed = render_frame(dataclasses.replace(small_scene, seed=99), 3)
    assert not np.array_equal(first.image.data, other_seed.image.data)


def test_keypoints_sit_on_blob_maxima(small_scene):
    rendered = render_frame(small_scene, 7)
    arts = rendered.artifacts
    assert len(rendered.keypoints) == len(arts) == 3
    for art, kp in zip(arts, rendered.keypoints):
        assert (kp.x, kp.y) == art.pixel
        assert kp.kind == art.kind
        assert kp.vehicle_id == art.vehicle_id
        px, py = int(round(kp.x)), int(round(kp.y))
        assert rendered.image.data[py, px] >= 0.9 * art.peak


def test_depth_core_carries_true_range(small_scene):
    rendered = render_frame(small_scene, 7)
    for art in rendered.artifacts:
        px, py = int(round(art.pixel[0])), int(round(art.pixel[1]))
        assert rendered.depth_m[py, px] == pytest.approx(
            float(np.linalg.norm(art.point))
        )
    assert rendered.depth_m[0, 0] == 0.0
    # Returns exist only over blob cores, never across the whole frame.
    assert 0 < (rendered.depth_m > 0).sum() < rendered.depth_m.size // 4


def test_proposals_cover_every_keypoint(small_scene):
    # Default params downscale by half, matching the wide dim pool to the
    # local-mean window; every scheduled keypoint must land inside a box.
    params = ProposerParams()
    for frame in (0, 5, 9):
        rendered = render_frame(small_scene, frame)
        boxes = propose(rendered.image, params)
        for kp in rendered.keypoints:
            assert any(b.contains(kp.x, kp.y) for b in boxes), (frame, kp)


def test_ground_plane_recovers_planted_pool_distance():
    spec = SceneSpec(
        camera=scaled_camera(640, 480),
        frame_count=1,
        start_distance_m=120.0,
        pool_lead_m=20.0,
        direct_from_frame=None,
        seed=3,
    )
    (pool,) = artifacts_at(spec, 0)
    assert pool.point[0] == pytest.approx(100.0)
    ray = spec.camera.pixel_to_ray(*pool.pixel)
    est = gp_intersect(ray)
    assert est.point == pytest.approx(pool.point, abs=1e-6)
    assert est.distance == pytest.approx(float(np.linalg.norm(pool.point)), abs=1e-6)


def test_scene_tags_follow_schedule(small_scene):
    tags = scene_tags(small_scene)
    assert tags.first_annotation == 0
    assert tags.first_direct_sight == 5
    assert tags.production_detection == 5
    # Reaction would land at frame 5 + round(0.8 * 18) = 19, past the clip end.
    assert tags.human_reaction == small_scene.frame_count - 1

    longer = dataclasses.replace(small_scene, frame_count=25)
    assert scene_tags(longer).human_reaction == 5 + 14

    no_direct = dataclasses.replace(small_scene, direct_from_frame=None)
    tags = scene_tags(no_direct)
    assert tags.first_annotation == 0
    assert tags.first_direct_sight is None
    assert tags.human_reaction is None
    assert tags.production_detection is None


def test_generate_writes_full_tree(tmp_path, small_scene):
    root = tmp_path / "ds"
    ds = synth_generate(small_scene, root, "seq_a", "train")

    assert (root / "calibration.txt").exists()
    assert (root / "road.txt").exists()
    splits = json.loads((root / "splits.json").read_text())
    assert splits == {"test": [], "train": ["seq_a"], "val": []}

    frame_dir = root / "sequences" / "seq_a" / "frames"
    names = sorted(p.name for p in frame_dir.glob("*.pgm"))
    assert names == [f"{i:06d}.pgm" for i in range(10)]

    (seq,) = ds.split_sequences("train")
    assert seq.sequence_id == "seq_a"
    assert len(seq.frames) == 10
    assert seq.tags == scene_tags(small_scene)

    rendered = render_frame(small_scene, 0)
    frame = seq.frames[0]
    assert [(k.x, k.y, k.kind, k.vehicle_id) for k in frame.keypoints] == [
        (k.x, k.y, k.kind, k.vehicle_id) for k in rendered.keypoints
    ]
    img = frame.load_image()
    assert np.abs(img.data - rendered.image.data).max() <= 0.5 / 255 + 1e-12
    depth = frame.load_depth()
    assert depth is not None
    assert np.abs(depth - rendered.depth_m).max() <= 0.005 + 1e-9


def test_generate_appends_to_existing_root(tmp_path, small_scene):
    root = tmp_path / "ds"
    synth_generate(small_scene, root, "seq_a", "train")
    val_scene = dataclasses.replace(small_scene, seed=12)
    ds = synth_generate(val_scene, root, "seq_b", "val")

    assert [s.sequence_id for s in ds.split_sequences("train")] == ["seq_a"]
    assert [s.sequence_id for s in ds.split_sequences("val")] == ["seq_b"]

    # Re-generating the same sequence must not duplicate the manifest entry.
    synth_generate(small_scene, root, "seq_a", "train")
    splits = json.loads((root / "splits.json").read_text())
    assert splits["train"] == ["seq_a"]

    with pytest.raises(DataError):
        synth_generate(small_scene, root, "seq_c", "dev")


def test_generate_skips_sidecars_for_empty_frames(tmp_path, small_scene):
    spec = dataclasses.replace(small_scene, indirect_from_frame=None)
    root = tmp_path / "ds"
    ds = synth_generate(spec, root, "seq_a", "train")
    seq_dir = root / "sequences" / "seq_a"
    for i in range(5):
        assert not (seq_dir / "annotations" / f"{i:06d}.json").exists()
        assert not (seq_dir / "depth" / f"{i:06d}.pgm").exists()
    for i in range(5, 10):
        assert (seq_dir / "annotations" / f"{i:06d}.json").exists()
        assert (seq_dir / "depth" / f"{i:06d}.pgm").exists()

    (seq,) = ds.split_sequences("train")
    assert seq.frames[0].keypoints == ()
    assert seq.frames[0].depth_path is None
    assert seq.tags.first_annotation == 5
