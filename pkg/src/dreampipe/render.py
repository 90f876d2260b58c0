"""Ray-traced rendering of textured meshes into panoramic and pinhole frames.

Panoramas are equirectangular, width = 2 x height, following the direction
conventions in :mod:`dreampipe.geometry`. Distance maps store euclidean
distance from the camera center in meters with -1 at misses.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .bvh import BVH, build_bvh, cast_rays
from .camera import CameraPose
from .geometry import interpolate_attribute, normalize, pano_pixel_dirs
from .imageio import load_image, save_image
from .masks import Mask
from .meshio import TexturedMesh
from .sampling import sample_bilinear


@dataclass
class PanoramaFrame:
    color: np.ndarray     # (H, W, 3) uint8
    distance: np.ndarray  # (H, W) float32, -1 at misses
    normal: np.ndarray    # (H, W, 3) float32, zero at misses
    pose: CameraPose

    @property
    def width(self) -> int:
        return self.color.shape[1]

    @property
    def height(self) -> int:
        return self.color.shape[0]

    def save(self, directory: str, stem: str) -> None:
        os.makedirs(directory, exist_ok=True)
        save_image(os.path.join(directory, f"{stem}_color.png"), self.color)
        save_image(os.path.join(directory, f"{stem}_distance.pfm"), self.distance)
        save_image(os.path.join(directory, f"{stem}_normal.pfm"), self.normal)

    @classmethod
    def load(cls, directory: str, stem: str, pose: CameraPose) -> "PanoramaFrame":
        return cls(
            color=load_image(os.path.join(directory, f"{stem}_color.png")),
            distance=load_image(os.path.join(directory, f"{stem}_distance.pfm")),
            normal=load_image(os.path.join(directory, f"{stem}_normal.pfm")),
            pose=pose,
        )


def _trace_panorama(
    mesh: TexturedMesh, pose: CameraPose, width: int, height: int, bvh: BVH | None
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    if width != 2 * height:
        raise ValueError(f"panorama must be 2:1, got {width}x{height}")
    if bvh is None:
        bvh = build_bvh(mesh.vertices, mesh.faces)
    dirs = pano_pixel_dirs(width, height).reshape(-1, 3)
    if not np.array_equal(pose.rotation, np.eye(3)):
        dirs = dirs @ pose.rotation.T
    tri, t, u, v = cast_rays(bvh, pose.center, dirs)
    return (
        tri.reshape(height, width),
        t.reshape(height, width),
        u.reshape(height, width),
        v.reshape(height, width),
    )


def _shade(
    mesh: TexturedMesh,
    tri: np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    texture: np.ndarray | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Texture color and interpolated normal for hit pixels."""
    tex = mesh.texture if texture is None else texture
    shape = tri.shape
    color = np.zeros(shape + (3,), dtype=np.uint8)
    nrm = np.zeros(shape + (3,), dtype=np.float32)
    hit = tri >= 0
    if not hit.any():
        return color, nrm
    th = tri[hit]
    weights = np.stack([1.0 - u[hit] - v[hit], u[hit], v[hit]], axis=-1)
    uvs = (mesh.face_uvs[th] * weights[..., None]).sum(axis=-2)
    ax = uvs[:, 0] * tex.shape[1] - 0.5
    ay = (1.0 - uvs[:, 1]) * tex.shape[0] - 0.5
    color[hit] = np.clip(sample_bilinear(tex, ax, ay) + 0.5, 0, 255).astype(np.uint8)
    n = interpolate_attribute(th, weights, mesh.faces, mesh.normals)
    nrm[hit] = normalize(n).astype(np.float32)
    return color, nrm


def render_panorama(
    mesh: TexturedMesh,
    pose: CameraPose,
    width: int = 1024,
    height: int = 512,
    bvh: BVH | None = None,
    texture: np.ndarray | None = None,
    shade: bool = True,
) -> PanoramaFrame:
    """Render color, distance, and normal panoramas from one viewpoint.

    ``texture`` overrides the mesh's atlas (same layout) so a scene can be
    re-rendered with a repainted atlas without rebuilding the mesh.
    ``shade=False`` skips the color and normal lookups (both come back zero)
    when only the distance map is needed.
    """
    tri, t, u, v = _trace_panorama(mesh, pose, width, height, bvh)
    if shade:
        color, nrm = _shade(mesh, tri, u, v, texture)
    else:
        color = np.zeros(tri.shape + (3,), dtype=np.uint8)
        nrm = np.zeros(tri.shape + (3,), dtype=np.float32)
    return PanoramaFrame(
        color=color,
        distance=np.where(tri >= 0, t, -1.0).astype(np.float32),
        normal=nrm,
        pose=pose,
    )


def render_uv_mask_as_panorama(
    mesh: TexturedMesh,
    pose: CameraPose,
    mask_uv: Mask,
    width: int,
    height: int,
    bvh: BVH | None = None,
) -> Mask:
    """Project an atlas-space mask into a panoramic view of it.

    Pixels that miss the mesh read 0 so they count as unpainted and get
    included in inpaint requests.
    """
    mask_uv.require("uv", "mask to render")
    tri, _, u, v = _trace_panorama(mesh, pose, width, height, bvh)
    out = np.zeros((height, width), dtype=np.float32)
    hit = tri >= 0
    if hit.any():
        th = tri[hit]
        weights = np.stack([1.0 - u[hit] - v[hit], u[hit], v[hit]], axis=-1)
        uvs = (mesh.face_uvs[th] * weights[..., None]).sum(axis=-2)
        ax = uvs[:, 0] * mask_uv.data.shape[1] - 0.5
        ay = (1.0 - uvs[:, 1]) * mask_uv.data.shape[0] - 0.5
        out[hit] = sample_bilinear(mask_uv.data, ax, ay)
    return Mask(out, "pano")


def render_perspective(
    mesh: TexturedMesh,
    pose: CameraPose,
    fov_deg: float = 90.0,
    width: int = 512,
    height: int = 512,
    bvh: BVH | None = None,
    texture: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Pinhole render for previews: (color uint8, distance float32).

    Camera frame before rotation: +X forward, +Y left, +Z up; ``fov_deg`` is
    the horizontal field of view.
    """
    if not 0.0 < fov_deg < 180.0:
        raise ValueError(f"fov must be in (0, 180), got {fov_deg}")
    if bvh is None:
        bvh = build_bvh(mesh.vertices, mesh.faces)
    th = np.tan(np.deg2rad(fov_deg) / 2.0)
    ndc_x = ((np.arange(width) + 0.5) / width) * 2.0 - 1.0
    ndc_y = ((np.arange(height) + 0.5) / height) * 2.0 - 1.0
    gx, gy = np.meshgrid(ndc_x, ndc_y)
    dirs = np.stack(
        [np.ones_like(gx), -gx * th, -gy * th * (height / width)], axis=-1
    ).reshape(-1, 3)
    dirs = normalize(dirs) @ pose.rotation.T
    tri, t, u, v = cast_rays(bvh, pose.center, dirs)
    tri = tri.reshape(height, width)
    color, _ = _shade(mesh, tri, u.reshape(height, width), v.reshape(height, width), texture)
    dist = np.where(tri >= 0, t.reshape(height, width), -1.0).astype(np.float32)
    return color, dist
