"""Repairs the two artifacts equirectangular generation leaves behind: the
vertical wrap seam and the smeared polar caps.

Horizontal seam: roll the panorama by half its width (an exact, lossless
pixel shift), inpaint a vertical strip now centered where the seam sits, and
roll back. Poles: unwarp a polar cap to a gnomonic (tangent-plane) image
where the singularity becomes an ordinary disk, inpaint the disk, and warp it
back with a feathered border so the cap blends into untouched rows.

The inpainting itself is delegated to a stylizer with an ``inpaint`` method
(image, distance, mask, seed) -> image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import dir_to_equirect, equirect_to_dir
from .sampling import sample_bilinear


def roll_half(pano: np.ndarray) -> np.ndarray:
    """Shift columns by half the width; moves the wrap seam to the center."""
    return np.roll(pano, pano.shape[1] // 2, axis=1)


def unroll_half(pano: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`roll_half`."""
    return np.roll(pano, -(pano.shape[1] // 2), axis=1)


@dataclass
class PoleWarp:
    pole: str  # "top" or "bottom"
    fov_deg: float
    out_size: int
    pano_width: int
    pano_height: int

    @property
    def theta_max(self) -> float:
        return np.deg2rad(self.fov_deg) / 2.0


def unwarp_pole(
    pano: np.ndarray, pole: str = "top", fov_deg: float = 90.0, out_size: int = 512
) -> tuple[np.ndarray, PoleWarp]:
    """Gnomonic image of a polar cap (angular radius fov/2 from the pole).

    Returns the cap image (same dtype semantics as input, uint8 stays uint8)
    and the warp description needed to paste it back.
    """
    if pole not in ("top", "bottom"):
        raise ValueError(f"pole must be 'top' or 'bottom', got {pole!r}")
    if not 0.0 < fov_deg < 180.0:
        raise ValueError(f"fov must be in (0, 180), got {fov_deg}")
    h, w = pano.shape[:2]
    warp = PoleWarp(pole, fov_deg, out_size, w, h)
    half = np.tan(warp.theta_max)
    c = (np.arange(out_size) + 0.5 - out_size / 2.0) / (out_size / 2.0) * half
    px, py = np.meshgrid(c, c)
    pz = np.ones_like(px) if pole == "top" else -np.ones_like(px)
    dirs = np.stack([px, py, pz], axis=-1)
    u, v = dir_to_equirect(dirs)
    sampled = sample_bilinear(pano, u * w - 0.5, v * h - 0.5, wrap_x=True)
    if pano.dtype == np.uint8:
        return np.clip(sampled + 0.5, 0, 255).astype(np.uint8), warp
    return sampled.astype(pano.dtype, copy=False), warp


def rewarp_pole(
    pano: np.ndarray, cap: np.ndarray, warp: PoleWarp, blend_radius: int = 8
) -> np.ndarray:
    """Paste a (possibly repainted) gnomonic cap back into the panorama.

    Rows within the cap's angular radius are replaced; an alpha ramp over
    ``blend_radius`` panorama rows at the cap border feathers the transition.
    """
    h, w = pano.shape[:2]
    if (w, h) != (warp.pano_width, warp.pano_height):
        raise ValueError(
            f"panorama {w}x{h} does not match the unwarp source "
            f"{warp.pano_width}x{warp.pano_height}"
        )
    theta_max = warp.theta_max
    rows = np.arange(h)
    theta = (rows + 0.5) * np.pi / h
    from_pole = theta if warp.pole == "top" else np.pi - theta
    touched = from_pole < theta_max
    if not touched.any():
        return pano.copy()
    jr = rows[touched]
    u = (np.arange(w) + 0.5) / w
    v = (jr + 0.5) / h
    gu, gv = np.meshgrid(u, v)
    d = equirect_to_dir(gu, gv)
    dz = d[..., 2] if warp.pole == "top" else -d[..., 2]
    dz = np.maximum(dz, 1e-12)
    half = np.tan(theta_max)
    size = warp.out_size
    cx = (d[..., 0] / dz) / half * (size / 2.0) + size / 2.0 - 0.5
    cy = (d[..., 1] / dz) / half * (size / 2.0) + size / 2.0 - 0.5
    patch = sample_bilinear(cap, cx, cy, wrap_x=False)

    band = blend_radius * np.pi / h
    alpha = np.clip((theta_max - from_pole[jr]) / band, 0.0, 1.0)[:, None, None]
    out = pano.copy()
    base = pano[touched].astype(np.float64)
    if patch.ndim == 2:
        patch = patch[..., None]
        base = base if base.ndim == 3 else base[..., None]
    blended = alpha * patch + (1.0 - alpha) * base
    if pano.dtype == np.uint8:
        out[touched] = np.clip(blended + 0.5, 0, 255).astype(np.uint8).reshape(out[touched].shape)
    else:
        out[touched] = blended.reshape(out[touched].shape).astype(pano.dtype)
    return out


@dataclass
class SeamFixParams:
    strip_fraction: float = 1.0 / 8.0  # width of the seam strip, as a fraction of W
    strip_feather: int = 8             # px of soft falloff on the strip mask
    pole_fov_deg: float = 90.0
    pole_out_size: int = 512
    pole_inpaint_fraction: float = 0.5  # repainted disk, as a fraction of the cap radius
    pole_blend_radius: int = 8          # pano rows of feather when pasting back
    order: str = "horizontal-first"     # or "poles-first"


def _strip_mask(height: int, width: int, params: SeamFixParams) -> np.ndarray:
    center = width / 2.0
    half = (params.strip_fraction * width) / 2.0
    x = np.arange(width) + 0.5
    ramp = np.clip((half + params.strip_feather - np.abs(x - center)) / max(params.strip_feather, 1), 0.0, 1.0)
    return np.repeat(ramp[None, :], height, axis=0).astype(np.float32)


def _disk_mask(size: int, radius_px: float, feather: float) -> np.ndarray:
    c = np.arange(size) + 0.5 - size / 2.0
    gx, gy = np.meshgrid(c, c)
    r = np.hypot(gx, gy)
    return np.clip((radius_px + feather - r) / max(feather, 1.0), 0.0, 1.0).astype(np.float32)


def fix_horizontal_seam(
    pano: np.ndarray,
    stylizer,
    distance: np.ndarray | None = None,
    seed: int = 0,
    params: SeamFixParams | None = None,
) -> np.ndarray:
    """Erase the left/right wrap seam by centering it and inpainting a strip."""
    params = params or SeamFixParams()
    h, w = pano.shape[:2]
    rolled = roll_half(pano)
    dist = roll_half(distance) if distance is not None else np.ones((h, w), dtype=np.float32)
    mask = _strip_mask(h, w, params)
    filled = stylizer.inpaint(image=rolled, distance=dist, mask=mask, seed=seed)
    return unroll_half(filled)


def fix_pole(
    pano: np.ndarray,
    stylizer,
    pole: str,
    distance: np.ndarray | None = None,
    seed: int = 0,
    params: SeamFixParams | None = None,
) -> np.ndarray:
    """Repaint the distorted disk around one pole in gnomonic space."""
    params = params or SeamFixParams()
    cap, warp = unwarp_pole(pano, pole, params.pole_fov_deg, params.pole_out_size)
    if distance is not None:
        cap_dist, _ = unwarp_pole(
            distance.astype(np.float32), pole, params.pole_fov_deg, params.pole_out_size
        )
    else:
        cap_dist = np.ones((params.pole_out_size,) * 2, dtype=np.float32)
    radius = params.pole_inpaint_fraction * (params.pole_out_size / 2.0)
    mask = _disk_mask(params.pole_out_size, radius, float(params.strip_feather))
    filled = stylizer.inpaint(image=cap, distance=cap_dist, mask=mask, seed=seed)
    return rewarp_pole(pano, filled, warp, params.pole_blend_radius)


def fix_seams(
    pano: np.ndarray,
    stylizer,
    distance: np.ndarray | None = None,
    seed: int = 0,
    params: SeamFixParams | None = None,
) -> np.ndarray:
    """Full seam repair: wrap seam plus both polar caps.

    ``params.order`` picks whether the strip or the poles go first; the strip
    pass feeds the pole passes (or vice versa) so fixes compose.
    """
    params = params or SeamFixParams()
    if params.order not in ("horizontal-first", "poles-first"):
        raise ValueError(f"unknown seam-fix order {params.order!r}")

    def horizontal(img):
        return fix_horizontal_seam(img, stylizer, distance, seed + 101, params)

    def poles(img):
        img = fix_pole(img, stylizer, "top", distance, seed + 102, params)
        return fix_pole(img, stylizer, "bottom", distance, seed + 103, params)

    if params.order == "horizontal-first":
        return poles(horizontal(pano))
    return horizontal(poles(pano))
