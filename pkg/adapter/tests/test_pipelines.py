import numpy as np
import pytest
from helpers import checker_rgb, fast_config, gradient_rgb, radial_distance, wrap_difference

from stylizerd.errors import RequestError
from stylizerd.pipelines import DiffusionPipelines, _tile_spans


@pytest.fixture(scope="module")
def pipes():
    return DiffusionPipelines(fast_config())


def test_generate_shape_and_determinism(pipes):
    distance = radial_distance(32, 64)
    edge = checker_rgb(32, 64, cell=8)
    a = pipes.generate(distance, edge, {"seed": 11})
    b = pipes.generate(distance, edge, {"seed": 11})
    c = pipes.generate(distance, edge, {"seed": 12})
    assert a.shape == (32, 64, 3) and a.dtype == np.uint8
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_generate_sized_by_distance_not_edges(pipes):
    out = pipes.generate(radial_distance(24, 48), checker_rgb(32, 80), {"seed": 1})
    assert out.shape == (24, 48, 3)


def test_generate_padding_flag_lowers_seam(pipes):
    distance = radial_distance(32, 64)
    edge = checker_rgb(32, 64, cell=8)
    on = pipes.generate(distance, edge, {"seed": 5, "circular_padding_fraction": 0.6})
    off = pipes.generate(distance, edge, {"seed": 5, "circular_padding_fraction": 0.0})
    assert wrap_difference(on) < wrap_difference(off)


def test_generate_odd_sizes_handled(pipes):
    # sizes not divisible by the latent block exercise the pad/crop path
    out = pipes.generate(radial_distance(21, 43), checker_rgb(21, 43), {"seed": 2})
    assert out.shape == (21, 43, 3)


def test_generate_rejects_tiny_images(pipes):
    with pytest.raises(RequestError, match="at least"):
        pipes.generate(radial_distance(4, 4), checker_rgb(4, 4), {"seed": 1})


def test_bad_directive_value_rejected(pipes):
    with pytest.raises(RequestError, match="circular_padding_fraction"):
        pipes.generate(radial_distance(16, 16), checker_rgb(16, 16), {"seed": 1, "circular_padding_fraction": 2.0})


def test_align_shape_follows_tile_source(pipes):
    canny = checker_rgb(16, 32)
    tile = gradient_rgb(32, 64)
    out = pipes.align(canny, tile, {"seed": 4})
    assert out.shape == tile.shape
    np.testing.assert_array_equal(out, pipes.align(canny, tile, {"seed": 4}))


def test_align_strength_bounds(pipes):
    with pytest.raises(RequestError, match="denoise_strength"):
        pipes.align(checker_rgb(16, 16), gradient_rgb(16, 16), {"seed": 1, "denoise_strength": 1.5})


def test_inpaint_preserves_unmasked_pixels_exactly(pipes):
    img = gradient_rgb(32, 48)
    distance = radial_distance(32, 48)
    mask = np.zeros((32, 48), np.float32)
    mask[8:20, 10:30] = 1.0
    out = pipes.inpaint(img, distance, mask, {"seed": 9})
    assert out.shape == img.shape
    hole = mask >= 0.5
    np.testing.assert_array_equal(out[~hole], img[~hole])
    assert np.abs(out[hole].astype(int) - img[hole].astype(int)).mean() > 1.0


def test_inpaint_empty_mask_is_identity(pipes):
    img = gradient_rgb(16, 24)
    out = pipes.inpaint(img, radial_distance(16, 24), np.zeros((16, 24), np.float32), {"seed": 1})
    np.testing.assert_array_equal(out, img)


def test_inpaint_size_mismatch_rejected(pipes):
    with pytest.raises(RequestError, match="disagree"):
        pipes.inpaint(
            gradient_rgb(16, 24), radial_distance(16, 24), np.zeros((8, 8), np.float32), {"seed": 1}
        )


def test_upscale_exact_dimensions(pipes):
    img = gradient_rgb(32, 64)
    out = pipes.upscale(img, {"seed": 3, "upscale_factor": 3})
    assert out.shape == (96, 192, 3)
    np.testing.assert_array_equal(out, pipes.upscale(img, {"seed": 3, "upscale_factor": 3}))


def test_upscale_crosses_tile_boundaries(pipes):
    # output larger than tile_size in both axes forces the blend path
    img = gradient_rgb(40, 72)
    out = pipes.upscale(img, {"seed": 3, "upscale_factor": 3})
    assert out.shape == (120, 216, 3)
    # the upscale tracks the input: brighter on the right in channel 0
    assert out[:, -20:, 0].mean() > out[:, :20, 0].mean() + 50


def test_upscale_factor_validation(pipes):
    with pytest.raises(RequestError, match="upscale_factor"):
        pipes.upscale(gradient_rgb(16, 16), {"seed": 1, "upscale_factor": 0})
    with pytest.raises(RequestError, match="upscale_factor"):
        pipes.upscale(gradient_rgb(16, 16), {"seed": 1, "upscale_factor": 2.5})


def test_upscale_factor_one_keeps_size(pipes):
    img = gradient_rgb(24, 32)
    out = pipes.upscale(img, {"seed": 1, "upscale_factor": 1})
    assert out.shape == img.shape


def test_tile_spans_cover_without_gaps():
    for extent, tile, overlap in [(300, 96, 16), (96, 96, 16), (50, 96, 16), (97, 96, 16)]:
        spans = list(_tile_spans(extent, tile, overlap))
        covered = np.zeros(extent, bool)
        for _, start, length in spans:
            assert length <= tile
            covered[start : start + length] = True
        assert covered.all(), (extent, spans)
