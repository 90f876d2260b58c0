"""PNG and PFM round trips."""

import numpy as np
import pytest

from dreampipe.imageio import (
    load_image,
    pfm_from_bytes,
    pfm_to_bytes,
    png_from_bytes,
    png_to_bytes,
    save_image,
)


def test_png_round_trip(rng):
    img = rng.integers(0, 256, size=(17, 23, 3), dtype=np.uint8)
    assert np.array_equal(png_from_bytes(png_to_bytes(img)), img)


def test_png_grayscale_and_alpha(rng):
    gray = rng.integers(0, 256, size=(9, 5), dtype=np.uint8)
    assert np.array_equal(png_from_bytes(png_to_bytes(gray)), gray)
    rgba = rng.integers(0, 256, size=(9, 5, 4), dtype=np.uint8)
    assert np.array_equal(png_from_bytes(png_to_bytes(rgba)), rgba)


def test_png_rejects_float():
    with pytest.raises(ValueError):
        png_to_bytes(np.zeros((4, 4), dtype=np.float32))


def test_pfm_round_trip(rng):
    img = rng.normal(size=(11, 7)).astype(np.float32)
    img[0, 0] = -1.0  # miss sentinel must survive
    out = pfm_from_bytes(pfm_to_bytes(img))
    assert out.dtype == np.float32
    assert np.array_equal(out, img)


def test_pfm_three_channel(rng):
    img = rng.normal(size=(6, 8, 3)).astype(np.float32)
    assert np.array_equal(pfm_from_bytes(pfm_to_bytes(img)), img)


def test_pfm_truncated_payload():
    data = pfm_to_bytes(np.ones((4, 4), dtype=np.float32))
    with pytest.raises(ValueError):
        pfm_from_bytes(data[:-8])


def test_save_load_dispatch(tmp_path, rng):
    color = rng.integers(0, 256, size=(5, 6, 3), dtype=np.uint8)
    dist = rng.normal(size=(5, 6)).astype(np.float32)
    save_image(tmp_path / "c.png", color)
    save_image(tmp_path / "d.pfm", dist)
    assert np.array_equal(load_image(tmp_path / "c.png"), color)
    assert np.array_equal(load_image(tmp_path / "d.pfm"), dist)
