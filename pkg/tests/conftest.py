"""Shared fixtures: small rendered datasets reused by harness-level tests."""

import dataclasses
from pathlib import Path

import pytest

from earlybeam.geometry import scaled_camera
from earlybeam.synthetic import SceneSpec, synth_generate


@pytest.fixture(scope="session")
def small_scene() -> SceneSpec:
    """A 320x240 ten-frame approach with direct lights from frame 5."""
    return SceneSpec(
        camera=scaled_camera(320, 240),
        frame_count=10,
        start_distance_m=60.0,
        direct_from_frame=5,
        seed=11,
    )


@pytest.fixture(scope="session")
def small_dataset_root(tmp_path_factory, small_scene) -> Path:
    """Dataset with one train and one val sequence from related scenes."""
    root = tmp_path_factory.mktemp("smallds")
    synth_generate(small_scene, root, "seq_train", "train")
    val_scene = dataclasses.replace(small_scene, seed=12, start_distance_m=55.0)
    synth_generate(val_scene, root, "seq_val", "val")
    return root
