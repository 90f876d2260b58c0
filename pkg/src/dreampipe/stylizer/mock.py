"""Deterministic stand-in stylizer.

Implements the four protocol operations with cheap image processing that has
the properties the pipeline relies on: seed determinism, wrap-continuous
generated panoramas (first and last columns byte-equal), inpainting that
leaves the image untouched when the mask is empty, and an exact integer
upscale factor. Output looks like procedural art, not like a diffusion
model, which is the point: every test against it is reproducible.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..poisson import poisson_blend
from .protocol import DEFAULT_DIRECTIVES, StylizeRequest, StylizeResponse

_PALETTES = np.array(
    [
        [[178, 132, 90], [92, 110, 74], [210, 196, 158], [60, 52, 48]],
        [[90, 118, 160], [188, 170, 140], [70, 70, 86], [214, 208, 190]],
        [[150, 90, 84], [198, 172, 120], [86, 96, 70], [232, 224, 204]],
    ],
    dtype=np.float64,
)


def _wave_field(height: int, width: int, rng: np.random.Generator, octaves: int = 4) -> np.ndarray:
    """Sum of integer-frequency sinusoids in [0, 1]; periodic in x by
    construction so the horizontal wrap carries no discontinuity."""
    x = np.arange(width) / width
    y = np.arange(height) / height
    gx, gy = np.meshgrid(x, y)
    out = np.zeros((height, width))
    for k in range(1, octaves + 1):
        fx = int(rng.integers(1, 4)) * k
        fy = int(rng.integers(1, 4)) * k
        px, py = rng.uniform(0, 2 * np.pi, size=2)
        out += np.sin(2 * np.pi * fx * gx + px) * np.cos(2 * np.pi * fy * gy + py) / k
    lo, hi = out.min(), out.max()
    return (out - lo) / (hi - lo) if hi > lo else np.zeros_like(out)


def _pin_wrap(img: np.ndarray) -> np.ndarray:
    img[:, -1] = img[:, 0]
    return img


def _gray(img: np.ndarray) -> np.ndarray:
    return np.asarray(img, dtype=np.float64) @ np.array([0.299, 0.587, 0.114])


def _edge_strength(img: np.ndarray) -> np.ndarray:
    g = _gray(img)
    gx = ndimage.sobel(g, axis=1, mode="nearest")
    gy = ndimage.sobel(g, axis=0, mode="nearest")
    mag = np.hypot(gx, gy)
    return np.clip(mag / 255.0, 0.0, 1.0)


class MockStylizer:
    """In-process backend; also usable directly through the convenience
    methods (generate/align/inpaint/upscale) without serialization."""

    def handle(self, request: StylizeRequest) -> StylizeResponse:
        d = request.directives
        seed = int(d["seed"])
        if request.kind == "generate":
            img = self.generate(request.slots["distance"], request.slots["edge-source"], seed)
        elif request.kind == "align":
            img = self.align(request.slots["canny-source"], request.slots["tile-source"], seed)
        elif request.kind == "inpaint":
            img = self.inpaint(
                request.slots["partial-image"],
                request.slots["distance"],
                request.slots["mask"],
                seed,
            )
        else:
            img = self.upscale(request.slots["image"], seed, int(d["upscale_factor"]))
        return StylizeResponse(image=img)

    def generate(self, distance: np.ndarray, edge_source: np.ndarray, seed: int) -> np.ndarray:
        h, w = distance.shape
        rng = np.random.default_rng(seed)
        palette = _PALETTES[int(rng.integers(0, len(_PALETTES)))]
        field = _wave_field(h, w, rng)
        shade = 1.0 / (1.0 + 0.15 * np.maximum(distance, 0.0))
        shade = 0.55 + 0.45 * shade
        edge = _edge_strength(edge_source)
        # piecewise palette lookup with linear mixing between entries
        t = field * (len(palette) - 1)
        i0 = np.clip(t.astype(np.int64), 0, len(palette) - 2)
        frac = (t - i0)[..., None]
        color = palette[i0] * (1.0 - frac) + palette[i0 + 1] * frac
        color *= shade[..., None]
        color *= 1.0 - 0.3 * edge[..., None]
        return _pin_wrap(np.clip(color + 0.5, 0, 255).astype(np.uint8))

    def align(self, canny_source: np.ndarray, tile_source: np.ndarray, seed: int) -> np.ndarray:
        del seed  # alignment is structure-driven, nothing stochastic here
        edge = _edge_strength(canny_source)
        if edge.shape != tile_source.shape[:2]:
            zoom = (
                tile_source.shape[0] / edge.shape[0],
                tile_source.shape[1] / edge.shape[1],
            )
            edge = ndimage.zoom(edge, zoom, order=1, grid_mode=False)
            edge = edge[: tile_source.shape[0], : tile_source.shape[1]]
        hard = (edge > 0.25).astype(np.float64)
        out = tile_source.astype(np.float64) * (1.0 - 0.5 * hard[..., None])
        return np.clip(out + 0.5, 0, 255).astype(np.uint8)

    def inpaint(
        self, image: np.ndarray, distance: np.ndarray, mask: np.ndarray, seed: int
    ) -> np.ndarray:
        del distance
        hole = np.asarray(mask, dtype=np.float64) >= 0.5
        if not hole.any():
            return image.copy()
        # zero guidance turns the blend into smooth interpolation of the rim
        smooth, _ = poisson_blend(
            image,
            np.zeros_like(image),
            hole.astype(np.float64),
            wrap_x=False,
            tol=1e-2,
            max_iters=2000,
            level_iters=80,
        )
        filled = smooth.astype(np.float64)
        rng = np.random.default_rng(seed)
        detail = (_wave_field(*mask.shape, rng) - 0.5) * 12.0
        filled = filled + detail[..., None]
        soft = np.clip(np.asarray(mask, dtype=np.float64), 0.0, 1.0)[..., None]
        out = image.astype(np.float64) * (1.0 - soft) + filled * soft
        return np.clip(out + 0.5, 0, 255).astype(np.uint8)

    def upscale(
        self,
        image: np.ndarray,
        seed: int,
        factor: int = int(DEFAULT_DIRECTIVES["upscale_factor"]),
    ) -> np.ndarray:
        if factor < 1:
            raise ValueError(f"upscale factor must be >= 1, got {factor}")
        big = ndimage.zoom(
            image.astype(np.float64), (factor, factor, 1), order=3, grid_mode=False
        )
        rng = np.random.default_rng(seed)
        detail = (_wave_field(big.shape[0], big.shape[1], rng, octaves=2) - 0.5) * 4.0
        big += detail[..., None]
        return _pin_wrap(np.clip(big + 0.5, 0, 255).astype(np.uint8))
