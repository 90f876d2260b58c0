"""Shared fixtures-by-hand for the backend tests: small images with known
structure and a config scaled down for speed."""

import numpy as np

from stylizerd.config import BackendConfig


def fast_config(**overrides) -> BackendConfig:
    """Small net, few steps; behavior-identical code paths."""
    base = dict(steps=6, base_channels=16, tile_size=96, tile_overlap=16, queue_depth=1)
    base.update(overrides)
    return BackendConfig(**base).validate()


def wrap_difference(img) -> float:
    """Mean absolute difference between the first and last pixel columns."""
    a = np.asarray(img, dtype=np.float64)
    return float(np.abs(a[:, 0] - a[:, -1]).mean())


def radial_distance(h: int, w: int) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    return (1.0 + 3.0 * np.hypot(yy / h - 0.5, xx / w - 0.5)).astype(np.float32)


def checker_rgb(h: int, w: int, cell: int = 16) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    g = ((xx // cell + yy // cell) % 2 * 255).astype(np.uint8)
    return np.stack([g, 255 - g, np.full_like(g, 96)], axis=-1)


def gradient_rgb(h: int, w: int) -> np.ndarray:
    row = np.linspace(0, 255, w)
    img = np.stack(
        [
            np.tile(row, (h, 1)),
            np.tile(row[::-1], (h, 1)),
            np.tile(np.linspace(0, 255, h)[:, None], (1, w)),
        ],
        axis=-1,
    )
    return (img + 0.5).astype(np.uint8)
