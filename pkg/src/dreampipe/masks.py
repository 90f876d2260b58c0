"""Mask carriers and the mask algebra used to gate texture writes.

A :class:`Mask` is a float field in [0, 1] tagged with the space it lives in:
``"uv"`` (texture atlas) or ``"pano"`` (equirectangular image). Combining
masks from different spaces is a hard error — the tag exists to catch that at
the call site instead of producing silently misaligned output.

Depth-edge detection runs on panoramic distance maps with cyclic horizontal
boundary handling, so a horizontal roll of the input rolls the output exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from scipy import ndimage

from .geometry import dir_to_equirect, normalize

if TYPE_CHECKING:
    from .camera import CameraPose
    from .uvproj import UvFieldSet

_MISS_DISTANCE = 1e6

PANO_MODES = ("nearest", "wrap")  # (vertical, horizontal) boundary handling


@dataclass
class Mask:
    data: np.ndarray
    space: str  # "uv" or "pano"

    def __post_init__(self) -> None:
        if self.space not in ("uv", "pano"):
            raise ValueError(f"unknown mask space {self.space!r}")
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {self.data.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def require(self, space: str, what: str = "mask") -> "Mask":
        if self.space != space:
            raise ValueError(f"{what} is in {self.space!r} space, expected {space!r}")
        return self

    def binarize(self, threshold: float = 0.5) -> np.ndarray:
        return self.data >= threshold

    def to_uint8(self) -> np.ndarray:
        return (np.clip(self.data, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)

    @classmethod
    def from_uint8(cls, img: np.ndarray, space: str) -> "Mask":
        if img.ndim == 3:
            img = img[..., 0]
        return cls(img.astype(np.float32) / 255.0, space)


def combine_min(*parts: Mask) -> Mask:
    """Texelwise minimum (soft intersection). All parts must share a space."""
    if not parts:
        raise ValueError("combine_min needs at least one mask")
    space = parts[0].space
    data = parts[0].data.copy()
    for m in parts[1:]:
        m.require(space)
        if m.shape != parts[0].shape:
            raise ValueError(f"mask shape mismatch: {m.shape} vs {parts[0].shape}")
        np.minimum(data, m.data, out=data)
    return Mask(data, space)


def combine_max(*parts: Mask) -> Mask:
    """Texelwise maximum (soft union). All parts must share a space."""
    if not parts:
        raise ValueError("combine_max needs at least one mask")
    space = parts[0].space
    data = parts[0].data.copy()
    for m in parts[1:]:
        m.require(space)
        if m.shape != parts[0].shape:
            raise ValueError(f"mask shape mismatch: {m.shape} vs {parts[0].shape}")
        np.maximum(data, m.data, out=data)
    return Mask(data, space)


@dataclass
class DepthEdgeParams:
    """Depth-edge detector knobs, stated at a 512-row panorama and scaled
    linearly with the actual height."""

    threshold: float = 0.1       # on the Sobel gradient of log distance
    dilate_radius: int = 5
    blur_sigma: float = 3.0
    reference_height: int = 512


def compute_edge_magnitude(field: np.ndarray) -> np.ndarray:
    """Sobel gradient magnitude of a panoramic 2-D field, scaled to per-pixel
    deltas ([1,2,1] smoothing sums to 4). Horizontal access wraps, so a
    cyclic shift of the input shifts the output identically."""
    f = np.asarray(field, dtype=np.float64)
    gx = ndimage.correlate1d(f, np.array([1.0, 0.0, -1.0]), axis=1, mode="wrap")
    gx = ndimage.correlate1d(gx, np.array([1.0, 2.0, 1.0]), axis=0, mode="nearest")
    gy = ndimage.correlate1d(f, np.array([1.0, 0.0, -1.0]), axis=0, mode="nearest")
    gy = ndimage.correlate1d(gy, np.array([1.0, 2.0, 1.0]), axis=1, mode="wrap")
    return np.hypot(gx, gy) / 4.0


def detect_depth_edges(distance: np.ndarray, params: DepthEdgeParams | None = None) -> Mask:
    """Soft mask of depth discontinuities in a panoramic distance map.

    Works on log distance so the threshold is relative: a step from 1 m to
    1.1 m scores the same as 10 m to 11 m. Misses (distance <= 0) are treated
    as a far constant, which makes silhouettes against empty space edges too.
    """
    if params is None:
        params = DepthEdgeParams()
    dist = np.asarray(distance, dtype=np.float64)
    if dist.ndim != 2:
        raise ValueError(f"distance map must be 2-D, got shape {dist.shape}")
    h = dist.shape[0]
    scale = h / params.reference_height
    logd = np.log(np.where(dist > 0.0, dist, _MISS_DISTANCE))
    mag = compute_edge_magnitude(logd)

    edges = (mag > params.threshold).astype(np.float64)
    radius = max(1, int(round(params.dilate_radius * scale)))
    edges = ndimage.maximum_filter(edges, size=2 * radius + 1, mode=PANO_MODES)
    edges = ndimage.gaussian_filter(edges, sigma=params.blur_sigma * scale, mode=PANO_MODES)
    return Mask(np.clip(edges, 0.0, 1.0), "pano")


def pano_pixel_coords_for_points(
    points: np.ndarray, pose: "CameraPose", width: int, height: int
) -> tuple[np.ndarray, np.ndarray]:
    """Continuous panorama pixel coords (x=col, y=row) that see each world
    point from ``pose``. Follows the pixel-center convention u=(x+0.5)/W."""
    d = np.asarray(points, dtype=np.float64) - pose.center
    u, v = dir_to_equirect(d)
    return u * width - 0.5, v * height - 0.5


def uv_depth_edge_mask(fields: "UvFieldSet", pose: "CameraPose", edge_pano: Mask) -> Mask:
    """Pull a panoramic depth-edge mask onto the atlas: each valid texel
    samples the edge field at the panorama pixel that sees its world point."""
    edge_pano.require("pano", "depth-edge mask")
    h, w = edge_pano.shape
    from .sampling import sample_bilinear

    out = np.zeros(fields.valid.shape, dtype=np.float32)
    valid = fields.valid
    if valid.any():
        x, y = pano_pixel_coords_for_points(fields.positions[valid], pose, w, h)
        out[valid] = sample_bilinear(edge_pano.data, x, y, wrap_x=True)
    return Mask(out, "uv")


def safe_view_mask(
    fields: "UvFieldSet",
    pose: "CameraPose",
    min_grazing_deg: float = 10.0,
    max_distance: float = 2.5,
) -> Mask:
    """Texels seen from a trustworthy angle and range.

    A texel passes when the direction back to the camera clears the surface
    plane by more than ``min_grazing_deg`` and the camera is within
    ``max_distance``. Grazing views and far views smear texture detail and
    are rejected here rather than blended down later.
    """
    to_cam = pose.center[None, :] - fields.positions[fields.valid]
    dist = np.linalg.norm(to_cam, axis=-1)
    cos_from_normal = np.einsum("ij,ij->i", normalize(to_cam), fields.normals[fields.valid])
    threshold = np.sin(np.deg2rad(min_grazing_deg))
    ok = (cos_from_normal > threshold) & (dist <= max_distance)
    out = np.zeros(fields.valid.shape, dtype=np.float32)
    out[fields.valid] = ok.astype(np.float32)
    return Mask(out, "uv")


def confidential_mask(
    visibility: Mask,
    safe_view: Mask,
    depth_edge_uv: Mask,
) -> Mask:
    """Binary gate for texture writes: visible, safely viewed, and away from
    depth edges. Binarized at 0.5 so soft inputs cannot leak partial writes."""
    visibility.require("uv", "visibility mask")
    safe_view.require("uv", "safe-view mask")
    depth_edge_uv.require("uv", "depth-edge mask")
    keep = Mask(1.0 - depth_edge_uv.data, "uv")
    combined = combine_min(visibility, safe_view, keep)
    return Mask(combined.binarize(0.5).astype(np.float32), "uv")


@dataclass
class InpaintMaskParams:
    dilate_radius: int = 8
    blur_sigma: float = 4.0
    reference_height: int = 512


def inpaint_request_mask(painted_pano: Mask, params: InpaintMaskParams | None = None) -> Mask:
    """Region a stylizer should fill: the complement of already-painted
    content, grown and feathered so fills overlap existing texture slightly."""
    painted_pano.require("pano", "painted mask")
    if params is None:
        params = InpaintMaskParams()
    h = painted_pano.shape[0]
    scale = h / params.reference_height
    hole = (painted_pano.data < 0.5).astype(np.float64)
    radius = max(1, int(round(params.dilate_radius * scale)))
    grown = ndimage.maximum_filter(hole, size=2 * radius + 1, mode=PANO_MODES)
    soft = ndimage.gaussian_filter(grown, sigma=params.blur_sigma * scale, mode=PANO_MODES)
    return Mask(np.clip(np.maximum(soft, hole), 0.0, 1.0), "pano")
