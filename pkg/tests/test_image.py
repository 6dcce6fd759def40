"""Image container, windowed statistics, and PGM round-trips."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from earlybeam.errors import DataError
from earlybeam.image import (
    GrayImage,
    integral_image,
    load_depth_pgm,
    load_image,
    load_pgm,
    pgm_dimensions,
    save_depth_pgm,
    save_pgm,
    window_mean,
    window_sum,
)


def clamped_mean(data: np.ndarray, w: int, y: int, x: int) -> float:
    # independent reference: edge replication == index clamping
    lo, hi = (w - 1) // 2, w // 2
    ys = np.clip(np.arange(y - lo, y + hi + 1), 0, data.shape[0] - 1)
    xs = np.clip(np.arange(x - lo, x + hi + 1), 0, data.shape[1] - 1)
    return float(data[np.ix_(ys, xs)].mean())


def test_grayimage_rejects_out_of_range():
    with pytest.raises(DataError):
        GrayImage(np.array([[0.0, 1.2]]))
    with pytest.raises(DataError):
        GrayImage(np.array([[-0.1, 0.5]]))


def test_grayimage_rejects_non_finite_and_bad_rank():
    with pytest.raises(DataError):
        GrayImage(np.array([[np.nan, 0.5]]))
    with pytest.raises(DataError):
        GrayImage(np.zeros(4))
    with pytest.raises(DataError):
        GrayImage(np.zeros((0, 3)))


def test_grayimage_data_read_only():
    img = GrayImage(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        img.data[0, 0] = 1.0


def test_uint8_round_trip():
    raw = np.arange(256, dtype=np.uint8).reshape(16, 16)
    img = GrayImage.from_uint8(raw)
    assert img.data.min() == 0.0 and img.data.max() == 1.0
    assert np.array_equal(img.to_uint8(), raw)


def test_from_uint16_scales_by_maxval():
    raw = np.array([[0, 500, 1000]], dtype=np.uint16)
    img = GrayImage.from_uint16(raw, maxval=1000)
    assert np.allclose(img.data, [[0.0, 0.5, 1.0]])


def test_integral_and_window_sum_match_brute_force():
    rng = np.random.default_rng(0)
    data = rng.random((9, 13))
    sat = integral_image(GrayImage(data))
    for y0, x0, y1, x1 in [(0, 0, 0, 0), (0, 0, 8, 12), (2, 3, 5, 7), (4, 4, 4, 9)]:
        expect = data[y0 : y1 + 1, x0 : x1 + 1].sum()
        assert window_sum(sat, y0, x0, y1, x1) == pytest.approx(expect, abs=1e-9)


@pytest.mark.parametrize("w", [1, 2, 3, 4, 5, 8, 19])
def test_window_mean_matches_replicated_pad_reference(w):
    rng = np.random.default_rng(w)
    data = rng.random((17, 23))
    lo, hi = (w - 1) // 2, w // 2
    padded = np.pad(data, ((lo, hi), (lo, hi)), mode="edge")
    expect = np.empty_like(data)
    for y in range(data.shape[0]):
        for x in range(data.shape[1]):
            expect[y, x] = padded[y : y + w, x : x + w].mean()
    got = window_mean(GrayImage(data), w)
    assert np.allclose(got, expect, atol=1e-9)


@given(
    h=st.integers(2, 12),
    wd=st.integers(2, 12),
    w=st.integers(1, 15),
    seed=st.integers(0, 2**31),
)
@settings(max_examples=60, deadline=None)
def test_window_mean_pointwise_property(h, wd, w, seed):
    rng = np.random.default_rng(seed)
    data = rng.random((h, wd))
    got = window_mean(GrayImage(data), w)
    probe = rng.integers(0, [h, wd], size=(5, 2))
    for y, x in probe:
        assert got[y, x] == pytest.approx(clamped_mean(data, w, y, x), abs=1e-9)


def test_window_mean_constant_image_is_identity():
    img = GrayImage(np.full((10, 10), 0.37))
    assert np.allclose(window_mean(img, 7), 0.37)


def test_pgm_8bit_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    img = GrayImage(rng.integers(0, 256, (12, 17)).astype(np.float64) / 255.0)
    path = tmp_path / "a.pgm"
    save_pgm(path, img)
    back = load_pgm(path)
    assert np.array_equal(back.data, img.data)
    assert pgm_dimensions(path) == (17, 12)


def test_pgm_16bit_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    img = GrayImage(rng.integers(0, 65536, (6, 8)).astype(np.float64) / 65535.0)
    path = tmp_path / "b.pgm"
    save_pgm(path, img, maxval=65535)
    back = load_pgm(path)
    assert np.allclose(back.data, img.data, atol=1e-12)


def test_pgm_with_comment_header(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# a comment\n3 2\n255\n" + bytes(range(6)))
    img = load_pgm(path)
    assert img.data.shape == (2, 3)
    assert pgm_dimensions(path) == (3, 2)


def test_pgm_truncated_payload_raises(tmp_path):
    path = tmp_path / "d.pgm"
    path.write_bytes(b"P5\n3 2\n255\n\x00\x01")
    with pytest.raises(DataError):
        load_pgm(path)


def test_pgm_bad_magic_raises(tmp_path):
    path = tmp_path / "e.pgm"
    path.write_bytes(b"P6\n3 2\n255\n" + bytes(6))
    with pytest.raises(DataError):
        load_pgm(path)
    with pytest.raises(DataError):
        pgm_dimensions(path)


def test_depth_round_trip_centimeter_quantization(tmp_path):
    depth = np.array([[0.0, 1.25, 99.99], [300.0, 0.01, 655.35]])
    path = tmp_path / "depth.pgm"
    save_depth_pgm(path, depth)
    back = load_depth_pgm(path)
    assert np.allclose(back, depth, atol=5e-3)
    assert back[0, 0] == 0.0


def test_load_image_reads_pgm_and_png(tmp_path):
    import cv2

    rng = np.random.default_rng(3)
    raw = rng.integers(0, 256, (9, 11)).astype(np.uint8)
    pgm = tmp_path / "f.pgm"
    save_pgm(pgm, GrayImage.from_uint8(raw))
    png = tmp_path / "f.png"
    cv2.imwrite(str(png), raw)
    assert np.array_equal(load_image(pgm).data, raw / 255.0)
    assert np.array_equal(load_image(png).data, raw / 255.0)


def test_load_image_missing_or_garbage(tmp_path):
    with pytest.raises(DataError):
        load_image(tmp_path / "nope.png")
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"not an image")
    with pytest.raises(DataError):
        load_image(bad)
