"""Atlas-space geometry fields and panorama-to-texture projection.

Rasterizing the UV layout gives every texel a world position and normal.
Projection then works texel-first: each texel looks up the panorama pixel
that sees it, which avoids holes that pixel-first splatting would leave.

Rasterization rules (both backends, bit-identical):
  - triangles are processed in ascending index order, first write wins, so
    overlapping charts resolve to the lower triangle index;
  - texels exactly on a shared edge belong to exactly one of the two
    triangles, decided by the half-plane rule ``accept boundary iff the edge
    direction d satisfies d.y > 0 or (d.y == 0 and d.x > 0)``; the reversed
    edge in the neighboring triangle fails the same test, so shared edges
    produce no gaps and no double writes;
  - zero-area UV triangles are skipped (reported via a logged warning).

Texel (row j, col i) center maps to UV ``u = (i + 0.5) / W``,
``v = 1 - (j + 0.5) / H`` — the bottom-left UV origin used by the mesh IO.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from .accel import USE_NUMBA, njit
from .camera import CameraPose
from .geometry import dir_to_equirect, normalize
from .masks import Mask
from .meshio import TexturedMesh
from .sampling import sample_bilinear

log = logging.getLogger(__name__)


@dataclass
class UvFieldSet:
    """Per-texel world attributes of a UV atlas."""

    positions: np.ndarray  # (H, W, 3) float64, zero where invalid
    normals: np.ndarray    # (H, W, 3) float64, unit where valid
    tri_index: np.ndarray  # (H, W) int32, -1 where invalid
    valid: np.ndarray      # (H, W) bool

    @property
    def shape(self) -> tuple[int, int]:
        return self.valid.shape

    def valid_mask(self) -> Mask:
        return Mask(self.valid.astype(np.float32), "uv")

    def save(self, path: str) -> None:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        np.savez_compressed(
            path,
            positions=self.positions,
            normals=self.normals,
            tri_index=self.tri_index,
            valid=self.valid,
        )

    @classmethod
    def load(cls, path: str) -> "UvFieldSet":
        with np.load(path) as z:
            return cls(
                positions=z["positions"],
                normals=z["normals"],
                tri_index=z["tri_index"],
                valid=z["valid"],
            )


@njit(cache=True)
def _rasterize_kernel(px, py, skip, height, width, tri_out, wa_out, wb_out, wc_out):
    """px/py: (T, 3) triangle corners in continuous atlas pixel coords."""
    for t in range(px.shape[0]):
        if skip[t]:
            continue
        ax, ay = px[t, 0], py[t, 0]
        bx, by = px[t, 1], py[t, 1]
        cx, cy = px[t, 2], py[t, 2]
        area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        swapped = False
        if area < 0.0:
            bx, by, cx, cy = cx, cy, bx, by
            area = -area
            swapped = True
        x0 = max(0, int(math.ceil(min(ax, min(bx, cx)))))
        x1 = min(width - 1, int(math.floor(max(ax, max(bx, cx)))))
        y0 = max(0, int(math.ceil(min(ay, min(by, cy)))))
        y1 = min(height - 1, int(math.floor(max(ay, max(by, cy)))))
        dabx, daby = bx - ax, by - ay
        dbcx, dbcy = cx - bx, cy - by
        dcax, dcay = ax - cx, ay - cy
        for j in range(y0, y1 + 1):
            for i in range(x0, x1 + 1):
                if tri_out[j, i] >= 0:
                    continue
                sx = float(i)
                sy = float(j)
                eab = dabx * (sy - ay) - daby * (sx - ax)
                if eab < 0.0 or (eab == 0.0 and not (daby > 0.0 or (daby == 0.0 and dabx > 0.0))):
                    continue
                ebc = dbcx * (sy - by) - dbcy * (sx - bx)
                if ebc < 0.0 or (ebc == 0.0 and not (dbcy > 0.0 or (dbcy == 0.0 and dbcx > 0.0))):
                    continue
                eca = dcax * (sy - cy) - dcay * (sx - cx)
                if eca < 0.0 or (eca == 0.0 and not (dcay > 0.0 or (dcay == 0.0 and dcax > 0.0))):
                    continue
                wa = ebc / area
                wb = eca / area
                wc = eab / area
                tri_out[j, i] = t
                wa_out[j, i] = wa
                if swapped:
                    wb_out[j, i] = wc
                    wc_out[j, i] = wb
                else:
                    wb_out[j, i] = wb
                    wc_out[j, i] = wc


def _rasterize_numpy(px, py, skip, height, width, tri_out, wa_out, wb_out, wc_out):
    """Same rules as the kernel, one vectorized bounding box per triangle."""
    for t in range(px.shape[0]):
        if skip[t]:
            continue
        ax, ay = px[t, 0], py[t, 0]
        bx, by = px[t, 1], py[t, 1]
        cx, cy = px[t, 2], py[t, 2]
        area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        swapped = area < 0.0
        if swapped:
            bx, by, cx, cy = cx, cy, bx, by
            area = -area
        x0 = max(0, int(math.ceil(min(ax, bx, cx))))
        x1 = min(width - 1, int(math.floor(max(ax, bx, cx))))
        y0 = max(0, int(math.ceil(min(ay, by, cy))))
        y1 = min(height - 1, int(math.floor(max(ay, by, cy))))
        if x1 < x0 or y1 < y0:
            continue
        sx, sy = np.meshgrid(
            np.arange(x0, x1 + 1, dtype=np.float64),
            np.arange(y0, y1 + 1, dtype=np.float64),
        )
        win = tri_out[y0 : y1 + 1, x0 : x1 + 1]

        def edge(pxx, pyy, qxx, qyy):
            dx, dy = qxx - pxx, qyy - pyy
            e = dx * (sy - pyy) - dy * (sx - pxx)
            own = dy > 0.0 or (dy == 0.0 and dx > 0.0)
            return e, (e > 0.0) | ((e == 0.0) & own)

        eab, in_ab = edge(ax, ay, bx, by)
        ebc, in_bc = edge(bx, by, cx, cy)
        eca, in_ca = edge(cx, cy, ax, ay)
        accept = in_ab & in_bc & in_ca & (win < 0)
        if not accept.any():
            continue
        wa = ebc / area
        wb = eca / area
        wc = eab / area
        win[accept] = t
        wa_out[y0 : y1 + 1, x0 : x1 + 1][accept] = wa[accept]
        if swapped:
            wb_out[y0 : y1 + 1, x0 : x1 + 1][accept] = wc[accept]
            wc_out[y0 : y1 + 1, x0 : x1 + 1][accept] = wb[accept]
        else:
            wb_out[y0 : y1 + 1, x0 : x1 + 1][accept] = wb[accept]
            wc_out[y0 : y1 + 1, x0 : x1 + 1][accept] = wc[accept]


def rasterize_uv_fields(
    mesh: TexturedMesh,
    atlas_width: int | None = None,
    atlas_height: int | None = None,
) -> UvFieldSet:
    """World position / normal / triangle id per atlas texel."""
    width = atlas_width or mesh.atlas_width
    height = atlas_height or mesh.atlas_height
    uvs = mesh.face_uvs
    px = np.ascontiguousarray(uvs[..., 0] * width - 0.5)
    py = np.ascontiguousarray((1.0 - uvs[..., 1]) * height - 0.5)
    area2 = (px[:, 1] - px[:, 0]) * (py[:, 2] - py[:, 0]) - (py[:, 1] - py[:, 0]) * (
        px[:, 2] - px[:, 0]
    )
    skip = area2 == 0.0
    if skip.any():
        log.warning(
            "skipping %d zero-area UV triangle(s): %s",
            int(skip.sum()),
            np.flatnonzero(skip)[:16].tolist(),
        )
    tri = np.full((height, width), -1, dtype=np.int32)
    wa = np.zeros((height, width))
    wb = np.zeros((height, width))
    wc = np.zeros((height, width))
    raster = _rasterize_kernel if USE_NUMBA else _rasterize_numpy
    raster(px, py, skip.astype(np.uint8), height, width, tri, wa, wb, wc)

    valid = tri >= 0
    positions = np.zeros((height, width, 3))
    normals = np.zeros((height, width, 3))
    if valid.any():
        th = tri[valid]
        w = np.stack([wa[valid], wb[valid], wc[valid]], axis=-1)[..., None]
        positions[valid] = (mesh.vertices[mesh.faces[th]] * w).sum(axis=-2)
        normals[valid] = normalize((mesh.normals[mesh.faces[th]] * w).sum(axis=-2))
    return UvFieldSet(positions=positions, normals=normals, tri_index=tri, valid=valid)


def compute_visibility_mask(
    fields: UvFieldSet,
    distance_pano: np.ndarray,
    pose: CameraPose,
    epsilon: float = 0.01,
) -> Mask:
    """Texels whose world point is what the panorama actually sees.

    Each valid texel computes its true distance to the camera and compares
    it against the distance map sampled (bilinearly, with horizontal wrap) at
    the texel's direction. Bilinear interpolation tracks the first-order
    distance variation across a surface inside one pixel, so agreement within
    ``epsilon`` meters holds on unoccluded surfaces at any reasonable
    panorama resolution, while an occluder changes the map by its full depth
    gap. Texels whose footprint straddles a silhouette mix foreground and
    background distances and come out not-visible, which is the conservative
    direction. Misses (negative distances) also fail the comparison.
    """
    dist_map = np.asarray(distance_pano)
    if dist_map.ndim != 2:
        raise ValueError(f"distance panorama must be 2-D, got {dist_map.shape}")
    h, w = dist_map.shape
    out = np.zeros(fields.valid.shape, dtype=np.float32)
    if not fields.valid.any():
        return Mask(out, "uv")
    pts = fields.positions[fields.valid]
    to_pt = pts - pose.center
    true_dist = np.linalg.norm(to_pt, axis=-1)
    u, v = dir_to_equirect(to_pt)
    seen = sample_bilinear(dist_map, u * w - 0.5, v * h - 0.5, wrap_x=True)
    visible = (seen > 0.0) & (np.abs(true_dist - seen) < epsilon)
    out[fields.valid] = visible.astype(np.float32)
    return Mask(out, "uv")


def project_panorama_to_uv(
    fields: UvFieldSet,
    pano: np.ndarray,
    pose: CameraPose,
    atlas: np.ndarray,
    painted: np.ndarray,
    write_mask: Mask | None = None,
) -> int:
    """Paint atlas texels from a panorama; earlier writes always win.

    Writes only texels that are valid, pass ``write_mask`` (binarized at 0.5),
    and are not painted yet. ``atlas`` (uint8 color) and ``painted`` (bool)
    are updated in place. Returns the number of texels written.
    """
    pano = np.asarray(pano)
    if pano.ndim != 3 or pano.shape[2] != 3:
        raise ValueError(f"panorama must be (H, W, 3), got {pano.shape}")
    if atlas.shape[:2] != fields.valid.shape or painted.shape != fields.valid.shape:
        raise ValueError("atlas/painted shape does not match the UV field set")
    writable = fields.valid & ~painted
    if write_mask is not None:
        write_mask.require("uv", "write mask")
        if write_mask.shape != fields.valid.shape:
            raise ValueError(
                f"write mask shape {write_mask.shape} does not match atlas {fields.valid.shape}"
            )
        writable &= write_mask.binarize()
    if not writable.any():
        return 0
    h, w = pano.shape[:2]
    to_pt = fields.positions[writable] - pose.center
    u, v = dir_to_equirect(to_pt)
    color = sample_bilinear(pano, u * w - 0.5, v * h - 0.5, wrap_x=True)
    atlas[writable] = np.clip(color + 0.5, 0, 255).astype(np.uint8)
    painted[writable] = True
    return int(writable.sum())


def dilate_texels(atlas: np.ndarray, filled: np.ndarray, radius: int = 4) -> np.ndarray:
    """Bleed painted colors outward so bilinear lookups at chart borders do
    not mix in background. Each pass fills unfilled texels that touch filled
    ones (8-neighborhood) with the mean of their filled neighbors."""
    from scipy import ndimage

    out = atlas.astype(np.float64)
    filled = filled.copy()
    kernel = np.ones((3, 3))
    for _ in range(radius):
        if filled.all():
            break
        cnt = ndimage.convolve(filled.astype(np.float64), kernel, mode="constant")
        grow = ~filled & (cnt > 0.0)
        if not grow.any():
            break
        acc = np.empty_like(out)
        for c in range(out.shape[2]):
            acc[..., c] = ndimage.convolve(
                out[..., c] * filled, kernel, mode="constant"
            )
        out[grow] = acc[grow] / cnt[grow, None]
        filled |= grow
    return np.clip(out + 0.5, 0, 255).astype(np.uint8)
