"""Image sampling helpers shared by rendering, projection, and seam warps.

Coordinates are continuous pixel positions where integer values sit on pixel
centers: x=0 is the center of column 0. Panoramas wrap horizontally; UV
atlases clamp on both axes.
"""

import numpy as np


def _prep(image: np.ndarray) -> tuple[np.ndarray, bool]:
    squeeze = image.ndim == 2
    if squeeze:
        image = image[..., None]
    return image.astype(np.float64, copy=False), squeeze


def sample_nearest(image: np.ndarray, x: np.ndarray, y: np.ndarray, wrap_x: bool = False) -> np.ndarray:
    """Nearest-neighbor lookup at continuous pixel coords (x=col, y=row)."""
    img, squeeze = _prep(image)
    h, w = img.shape[:2]
    xi = np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)
    yi = np.floor(np.asarray(y, dtype=np.float64) + 0.5).astype(np.int64)
    xi = xi % w if wrap_x else np.clip(xi, 0, w - 1)
    yi = np.clip(yi, 0, h - 1)
    out = img[yi, xi]
    return out[..., 0] if squeeze else out


def sample_bilinear(image: np.ndarray, x: np.ndarray, y: np.ndarray, wrap_x: bool = False) -> np.ndarray:
    """Bilinear lookup at continuous pixel coords (x=col, y=row).

    Returns float64 with the input's channel count. Vertical access clamps;
    horizontal access wraps when ``wrap_x`` so column W-1 blends into column 0.
    """
    img, squeeze = _prep(image)
    h, w = img.shape[:2]
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if wrap_x:
        x = np.mod(x, w)
    else:
        x = np.clip(x, 0.0, w - 1.0)
    y = np.clip(y, 0.0, h - 1.0)

    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    if wrap_x:
        x0 = x0 % w
        x1 = (x0 + 1) % w
    else:
        x0 = np.clip(x0, 0, w - 1)
        x1 = np.minimum(x0 + 1, w - 1)
    y0 = np.clip(y0, 0, h - 1)
    y1 = np.minimum(y0 + 1, h - 1)

    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    return out[..., 0] if squeeze else out


def resize_bilinear(image: np.ndarray, height: int, width: int, wrap_x: bool = False) -> np.ndarray:
    """Resample to a new size with pixel-center alignment. Returns float64."""
    h, w = image.shape[:2]
    x = (np.arange(width) + 0.5) * (w / width) - 0.5
    y = (np.arange(height) + 0.5) * (h / height) - 0.5
    gx, gy = np.meshgrid(x, y)
    return sample_bilinear(image, gx, gy, wrap_x=wrap_x)
