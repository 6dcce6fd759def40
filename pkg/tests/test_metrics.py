"""Keypoint-based quality scores, LiDAR ground truth, and detection-time benefit."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from earlybeam.boxes import BBox, Keypoint
from earlybeam.errors import DataError
from earlybeam.metrics import (
    BenefitStats,
    EventCounts,
    Quality,
    SequenceTags,
    aggregate_benefits,
    format_quality,
    lidar_gt,
    quality,
    relative_error,
    score_frame,
    time_benefit,
)

KP = lambda x, y: Keypoint(float(x), float(y))


def test_missed_keypoints_count_as_false_negatives():
    counts = score_frame([], [KP(5, 5), KP(50, 50)])
    assert (counts.tp_keypoints, counts.fn_keypoints, counts.fp_boxes) == (0, 2, 0)
    assert counts.keypoints_per_box == [] and counts.boxes_per_keypoint == []


def test_one_box_covering_two_keypoints_plus_empty_box():
    boxes = [BBox(0, 0, 100, 100), BBox(200, 200, 220, 220)]
    kps = [KP(10, 10), KP(90, 90)]
    counts = score_frame(boxes, kps)
    assert (counts.tp_keypoints, counts.fn_keypoints, counts.fp_boxes) == (2, 0, 1)
    assert counts.keypoints_per_box == [2]
    assert counts.boxes_per_keypoint == [1, 1]
    scores = quality(counts)
    assert scores.q_k == pytest.approx(0.5)
    assert scores.q_b == pytest.approx(1.0)
    assert scores.q == pytest.approx(0.5)
    assert scores.precision == pytest.approx(2 / 3)
    assert scores.recall == pytest.approx(1.0)
    assert scores.f_score == pytest.approx(0.8)


def test_one_box_per_keypoint_is_perfect():
    boxes = [BBox(0, 0, 20, 20), BBox(80, 80, 100, 100)]
    kps = [KP(10, 10), KP(90, 90)]
    scores = quality(score_frame(boxes, kps))
    assert scores.q_k == 1.0 and scores.q_b == 1.0 and scores.q == 1.0
    assert scores.precision == 1.0 and scores.recall == 1.0 and scores.f_score == 1.0


def test_nested_boxes_dilute_q_b():
    boxes = [BBox(0, 0, 40, 40), BBox(5, 5, 15, 15)]
    kps = [KP(10, 10)]
    counts = score_frame(boxes, kps)
    assert counts.boxes_per_keypoint == [2]
    assert counts.fp_boxes == 0
    scores = quality(counts)
    assert scores.q_b == pytest.approx(0.5)
    assert scores.q_k == pytest.approx(1.0)


def test_box_edges_include_keypoints():
    counts = score_frame([BBox(10, 10, 20, 20)], [KP(10, 20)])
    assert counts.tp_keypoints == 1


def test_empty_frame_yields_undefined_scores():
    scores = quality(score_frame([], []))
    assert scores == Quality(None, None, None, None, None, None)


def test_only_false_positives_define_precision_zero():
    scores = quality(score_frame([BBox(0, 0, 5, 5)], []))
    assert scores.precision == 0.0
    assert scores.recall is None and scores.q_k is None


def test_counts_accumulate_across_frames():
    a = score_frame([BBox(0, 0, 100, 100), BBox(200, 200, 220, 220)], [KP(10, 10), KP(90, 90)])
    b = score_frame([], [KP(5, 5)])
    total = a + b
    assert (total.tp_keypoints, total.fn_keypoints, total.fp_boxes) == (2, 1, 1)
    assert total.keypoints_per_box == [2]
    assert total.boxes_per_keypoint == [1, 1]


@given(
    seed=st.integers(0, 2**31),
    n_boxes=st.integers(0, 6),
    n_kps=st.integers(0, 6),
)
@settings(max_examples=100, deadline=None)
def test_quality_bounds_and_product_rule(seed, n_boxes, n_kps):
    rng = np.random.default_rng(seed)
    boxes = []
    for _ in range(n_boxes):
        x, y = rng.uniform(0, 80, 2)
        boxes.append(BBox(x, y, x + rng.uniform(1, 40), y + rng.uniform(1, 40)))
    kps = [KP(rng.uniform(0, 120), rng.uniform(0, 120)) for _ in range(n_kps)]
    scores = quality(score_frame(boxes, kps))
    for v in (scores.q_k, scores.q_b, scores.q, scores.precision, scores.recall):
        if v is not None:
            assert 0.0 <= v <= 1.0
    if scores.q_k is not None and scores.q_b is not None:
        assert scores.q == pytest.approx(scores.q_k * scores.q_b)
    else:
        assert scores.q is None


def test_lidar_median_ignores_dropouts():
    depth = np.zeros((10, 10))
    depth[2, 2], depth[2, 3], depth[3, 2] = 60.0, 80.0, 100.0
    assert lidar_gt(depth, BBox(0, 0, 9, 9)) == pytest.approx(80.0)
    with pytest.raises(DataError):
        lidar_gt(np.zeros((5, 5)), BBox(0, 0, 4, 4))


def test_relative_error_fixtures():
    assert relative_error(112.0, 100.0) == pytest.approx(0.12)
    assert relative_error(68.0, 100.0) == pytest.approx(-0.32)
    with pytest.raises(DataError):
        relative_error(50.0, 0.0)


def test_sequence_tags_ordering_enforced():
    SequenceTags(first_annotation=3, first_direct_sight=10)
    with pytest.raises(DataError):
        SequenceTags(first_annotation=10, first_direct_sight=3)
    with pytest.raises(DataError):
        SequenceTags(first_annotation=-1)


def test_time_benefit_fixture_27_frames():
    tags = SequenceTags(first_annotation=3)
    assert time_benefit(tags, 30) == pytest.approx(1.5)
    assert time_benefit(tags, 3) == 0.0
    # early detection counts negative (detector beat the annotation)
    assert time_benefit(tags, 1) == pytest.approx(-2 / 18)


def test_time_benefit_requires_annotated_sequence():
    with pytest.raises(DataError):
        time_benefit(SequenceTags(), 5)
    with pytest.raises(DataError):
        time_benefit(SequenceTags(first_annotation=0), 5, fps=0.0)
    assert time_benefit(SequenceTags(first_annotation=0), None) is None


def test_aggregate_benefits_quartiles():
    stats = aggregate_benefits([1.0, 2.0, 3.0, 4.0, None])
    assert stats.detected == 4 and stats.missed == 1
    assert stats.mean == pytest.approx(2.5)
    assert stats.median == pytest.approx(2.5)
    assert stats.quartile_low == pytest.approx(np.percentile([1, 2, 3, 4], 25))
    assert stats.quartile_high == pytest.approx(np.percentile([1, 2, 3, 4], 75))
    empty = aggregate_benefits([None, None])
    assert empty == BenefitStats(detected=0, missed=2, mean=None, median=None, quartile_low=None, quartile_high=None)


def test_format_quality_renders_all_rows():
    counts = score_frame([BBox(0, 0, 100, 100), BBox(200, 200, 220, 220)], [KP(10, 10), KP(90, 90)])
    text = format_quality(counts, quality(counts))
    for label in ("tp keypoints", "fn keypoints", "fp boxes", "precision", "recall", "f-score", "q_k", "q_b"):
        assert label in text
    assert "0.8000" in text
    undef = format_quality(EventCounts(), quality(EventCounts()))
    assert "n/a" in undef
