"""Artifact scoring: features, logistic model persistence, proposal labeling."""

import numpy as np
import pytest

from earlybeam.boxes import BBox
from earlybeam.classifier import (
    FEATURE_NAMES,
    LogisticArtifactClassifier,
    PeakBrightnessScorer,
    SaturatedOnlyScorer,
    classify_proposals,
    extract_features,
)
from earlybeam.errors import DataError
from earlybeam.image import GrayImage


def artifact_crop(rng, peak=0.9, sigma=4.0, side=24):
    yy, xx = np.mgrid[0:side, 0:side]
    c = (side - 1) / 2
    blob = peak * np.exp(-((yy - c) ** 2 + (xx - c) ** 2) / (2 * sigma**2))
    noise = rng.random((side, side)) * 0.03
    return GrayImage(np.clip(blob + noise, 0.0, 1.0))


def clutter_crop(rng, side=24):
    return GrayImage(rng.random((side, side)) * 0.25)


def training_set(seed=0, n=40):
    rng = np.random.default_rng(seed)
    crops = [artifact_crop(rng, peak=rng.uniform(0.5, 1.0)) for _ in range(n)]
    crops += [clutter_crop(rng) for _ in range(n)]
    labels = [1] * n + [0] * n
    return crops, labels


def test_feature_vector_shape_and_ranges():
    rng = np.random.default_rng(0)
    f = extract_features(artifact_crop(rng))
    assert f.shape == (len(FEATURE_NAMES),)
    peak, mad, offset, aspect, contrast = f
    assert 0.0 <= peak <= 1.0
    assert 0.0 <= offset <= 1.0
    assert aspect == pytest.approx(0.5)  # square crop
    assert contrast > 0  # centered blob outshines its ring


def test_features_separate_artifact_from_clutter():
    rng = np.random.default_rng(1)
    art = extract_features(artifact_crop(rng))
    clut = extract_features(clutter_crop(rng))
    assert art[0] > clut[0]  # brighter peak
    assert art[4] > clut[4]  # stronger center contrast


def test_train_learns_separable_classes():
    crops, labels = training_set(seed=2)
    model = LogisticArtifactClassifier()
    model.train(crops, labels, seed=0)
    eval_crops, eval_labels = training_set(seed=3)
    preds = [model.classify(c) >= 0.5 for c in eval_crops]
    accuracy = np.mean([p == bool(l) for p, l in zip(preds, eval_labels)])
    assert accuracy >= 0.95


def test_train_is_deterministic():
    crops, labels = training_set(seed=4, n=12)
    a = LogisticArtifactClassifier()
    b = LogisticArtifactClassifier()
    a.train(crops, labels, seed=7)
    b.train(crops, labels, seed=7)
    assert np.array_equal(a.weights, b.weights)
    assert a.bias == b.bias


def test_train_requires_both_classes():
    rng = np.random.default_rng(5)
    crops = [artifact_crop(rng) for _ in range(4)]
    model = LogisticArtifactClassifier()
    with pytest.raises(DataError):
        model.train(crops, [1, 1, 1, 1])
    with pytest.raises(DataError):
        model.train(crops, [1, 0, 2, 0])
    with pytest.raises(DataError):
        model.train([], [])


def test_save_load_round_trip_bit_exact(tmp_path):
    crops, labels = training_set(seed=6, n=16)
    model = LogisticArtifactClassifier()
    model.train(crops, labels)
    path = tmp_path / "model.bin"
    model.save(path)
    back = LogisticArtifactClassifier.load(path)
    assert np.array_equal(back.weights, model.weights)
    assert np.array_equal(back.means, model.means)
    assert np.array_equal(back.stds, model.stds)
    assert back.bias == model.bias
    rng = np.random.default_rng(8)
    probe = artifact_crop(rng)
    assert back.classify(probe) == model.classify(probe)


def test_load_rejects_foreign_or_truncated_files(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"something else entirely")
    with pytest.raises(DataError):
        LogisticArtifactClassifier.load(bad)
    trunc = tmp_path / "trunc.bin"
    model = LogisticArtifactClassifier()
    model.save(trunc)
    trunc.write_bytes(trunc.read_bytes()[:-8])
    with pytest.raises(DataError):
        LogisticArtifactClassifier.load(trunc)


def test_peak_scorer_and_saturated_ablation():
    rng = np.random.default_rng(9)
    bright = artifact_crop(rng, peak=0.95)
    dim = artifact_crop(rng, peak=0.4)
    assert PeakBrightnessScorer().classify(bright) == pytest.approx(float(bright.data.max()))
    abl = SaturatedOnlyScorer(saturation=0.9)
    assert abl.classify(bright) == 1.0
    assert abl.classify(dim) == 0.0


def test_classify_proposals_threshold_is_inclusive():
    img = GrayImage(np.full((20, 20), 0.6))
    boxes = [BBox(2, 2, 8, 8)]
    scored = classify_proposals(img, boxes, PeakBrightnessScorer(), threshold=0.6)
    assert scored[0].label is True and scored[0].score == pytest.approx(0.6)
    scored = classify_proposals(img, boxes, PeakBrightnessScorer(), threshold=0.61)
    assert scored[0].label is False


def test_classify_proposals_contains_per_box_failures():
    rng = np.random.default_rng(10)
    img = GrayImage(rng.random((30, 30)))

    class Flaky:
        def __init__(self):
            self.calls = 0

        def classify(self, crop):
            self.calls += 1
            if self.calls == 2:
                raise RuntimeError("boom")
            return 0.8

    boxes = [BBox(0, 0, 5, 5), BBox(10, 10, 15, 15), BBox(20, 20, 25, 25)]
    scored = classify_proposals(img, boxes, Flaky())
    assert [s.error is None for s in scored] == [True, False, True]
    assert scored[1].score == 0.0 and scored[1].label is False
    assert scored[0].score == pytest.approx(0.8)


def test_classify_proposals_rejects_out_of_range_scores():
    img = GrayImage(np.full((10, 10), 0.5))

    class Wild:
        def classify(self, crop):
            return 1.7

    (scored,) = classify_proposals(img, [BBox(1, 1, 4, 4)], Wild())
    assert scored.error is not None and "outside" in scored.error
    assert scored.score == 0.0


def test_classify_proposals_off_image_box_is_an_error():
    img = GrayImage(np.full((10, 10), 0.5))
    (scored,) = classify_proposals(img, [BBox(50, 50, 60, 60)], PeakBrightnessScorer())
    assert scored.error is not None
    assert scored.label is False
