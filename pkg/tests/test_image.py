"""Downsampling, upsampling, and pixel conversion helpers."""

import numpy as np
import pytest

from vtlab.image import (
    box_downsample,
    luminance,
    round_half_up_u8,
    upsample_bilinear_2x,
)


def test_downsample_uniform_stays_uniform():
    img = np.full((8, 8, 3), 77, dtype=np.uint8)
    out = box_downsample(img)
    assert out.shape == (4, 4, 3)
    assert (out == 77).all()


def test_downsample_rounds_half_up():
    img = np.zeros((2, 2, 3), dtype=np.uint8)
    img[0, 1] = 255
    img[1, 1] = 255
    out = box_downsample(img)
    assert (out == 128).all()  # mean 127.5 rounds up


def test_downsample_checkerboard():
    img = np.zeros((4, 4, 3), dtype=np.uint8)
    img[::2, 1::2] = 255
    img[1::2, ::2] = 255
    assert (box_downsample(img) == 128).all()


def test_downsample_rejects_odd_edge():
    with pytest.raises(ValueError):
        box_downsample(np.zeros((3, 3, 3), dtype=np.uint8))


def test_downsample_preserves_mean_within_rounding():
    rng = np.random.default_rng(11)
    for _ in range(20):
        img = rng.integers(0, 256, (16, 16, 3)).astype(np.uint8)
        out = box_downsample(img)
        for c in range(3):
            assert abs(out[..., c].mean() - img[..., c].mean()) <= 0.5


def test_round_half_up():
    x = np.array([0.4, 0.5, 1.49, 127.5, 254.5, 300.0, -3.0])
    assert round_half_up_u8(x).tolist() == [0, 1, 1, 128, 255, 255, 0]


def test_upsample_constant():
    img = np.full((4, 4, 3), 42.0)
    out = upsample_bilinear_2x(img)
    assert out.shape == (8, 8, 3)
    assert np.allclose(out, 42.0)


def test_upsample_is_mirror_symmetric():
    rng = np.random.default_rng(5)
    img = rng.uniform(0, 255, (6, 6))
    out = upsample_bilinear_2x(img)
    flipped = upsample_bilinear_2x(img[:, ::-1])
    assert np.allclose(out[:, ::-1], flipped)


def test_upsample_interpolates_between_texels():
    img = np.array([[0.0, 100.0]])
    out = upsample_bilinear_2x(img)
    # centers at input coords -0.25, 0.25, 0.75, 1.25 with edge clamp
    assert np.allclose(out[0], [0.0, 25.0, 75.0, 100.0])
    assert np.allclose(out[1], out[0])


def test_luminance_weights():
    img = np.zeros((1, 1, 3), dtype=np.uint8)
    img[..., 0] = 255
    assert np.allclose(luminance(img), 255 * 0.299)
    gray = np.full((2, 2), 9.0)
    assert np.array_equal(luminance(gray), gray)
