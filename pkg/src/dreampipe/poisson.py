"""Masked Poisson solver and gradient-domain image blending.

Solves ``laplacian(f) = g`` on an interior region with Dirichlet values taken
from the target image, using red-black Gauss-Seidel. Both backends update
cells in the same two-color schedule with the same arithmetic, so they
produce identical iterates. The 4-neighbor stencil wraps horizontally when
``wrap_x`` (panoramas); the top and bottom rows are always boundary.

Blending solves the pyramid coarse-to-fine: the coarsest level runs to the
residual tolerance, finer levels start from the upsampled solution and run a
bounded number of sweeps. Hitting the sweep cap without reaching tolerance
logs a warning instead of raising; the result is still usable.
"""

from __future__ import annotations

import logging

import numpy as np

from .accel import USE_NUMBA, njit, prange
from .masks import Mask
from .sampling import resize_bilinear

log = logging.getLogger(__name__)


def laplacian(img: np.ndarray, wrap_x: bool = True) -> np.ndarray:
    """4-neighbor Laplacian. Values on outer rows (and outer columns when not
    wrapping) are meaningless; callers only read interior cells."""
    f = np.asarray(img, dtype=np.float64)
    nb = (
        (np.roll(f, 1, axis=0) + np.roll(f, -1, axis=0))
        + np.roll(f, 1, axis=1)
    ) + np.roll(f, -1, axis=1)
    return nb - 4.0 * f


def _forced_boundary(interior: np.ndarray, wrap_x: bool) -> np.ndarray:
    interior = interior.copy()
    interior[0, :] = False
    interior[-1, :] = False
    if not wrap_x:
        interior[:, 0] = False
        interior[:, -1] = False
    return interior


@njit(cache=True, parallel=True)
def _gs_color_sweep(f, lap, interior, color, wrap_x):
    h, w, c = f.shape
    for j in prange(1, h - 1):
        for i in range(w):
            if interior[j, i] and ((i + j) & 1) == color:
                il = i - 1 if i > 0 else w - 1
                ir = i + 1 if i < w - 1 else 0
                if not wrap_x and (i == 0 or i == w - 1):
                    continue
                for k in range(c):
                    nb = ((f[j - 1, i, k] + f[j + 1, i, k]) + f[j, il, k]) + f[j, ir, k]
                    f[j, i, k] = (nb - lap[j, i, k]) / 4.0


@njit(cache=True, parallel=True)
def _residual_inf(f, lap, interior):
    # per-row maxima into distinct slots; a scalar max across prange is a
    # reduction numba's parfor pass handles unreliably
    h, w, c = f.shape
    row_worst = np.zeros(h)
    for j in prange(1, h - 1):
        worst = 0.0
        for i in range(w):
            if interior[j, i]:
                il = i - 1 if i > 0 else w - 1
                ir = i + 1 if i < w - 1 else 0
                for k in range(c):
                    nb = ((f[j - 1, i, k] + f[j + 1, i, k]) + f[j, il, k]) + f[j, ir, k]
                    r = abs((nb - 4.0 * f[j, i, k]) - lap[j, i, k])
                    if r > worst:
                        worst = r
        row_worst[j] = worst
    return row_worst.max()


def _gs_color_sweep_numpy(f, lap, interior, color, wrap_x):
    h, w = f.shape[:2]
    jj, ii = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    m = interior & (((ii + jj) & 1) == color)
    nb = (
        (np.roll(f, 1, axis=0) + np.roll(f, -1, axis=0))
        + np.roll(f, 1, axis=1)
    ) + np.roll(f, -1, axis=1)
    f[m] = (nb[m] - lap[m]) / 4.0


def _residual_inf_numpy(f, lap, interior):
    nb = (
        (np.roll(f, 1, axis=0) + np.roll(f, -1, axis=0))
        + np.roll(f, 1, axis=1)
    ) + np.roll(f, -1, axis=1)
    res = np.abs((nb - 4.0 * f) - lap)
    return float(res[interior].max()) if interior.any() else 0.0


def solve_poisson(
    target: np.ndarray,
    guidance_lap: np.ndarray,
    interior: np.ndarray,
    wrap_x: bool = True,
    tol: float = 1e-4,
    max_iters: int = 10000,
    check_every: int = 5,
    init: np.ndarray | None = None,
) -> tuple[np.ndarray, dict]:
    """Red-black Gauss-Seidel solve of ``laplacian(f) = guidance_lap`` on the
    interior, ``f = target`` elsewhere.

    Returns float64 ``f`` and an info dict with ``iterations``, ``residual``,
    ``converged``. Interior cells on the image frame are demoted to boundary
    (wrap keeps the horizontal frame usable).
    """
    f = np.array(init if init is not None else target, dtype=np.float64)
    squeeze = f.ndim == 2
    if squeeze:
        f = f[..., None]
    target = np.asarray(target, dtype=np.float64).reshape(f.shape)
    lap = np.asarray(guidance_lap, dtype=np.float64).reshape(f.shape)
    if interior.shape != f.shape[:2]:
        raise ValueError(f"interior shape {interior.shape} does not match image {f.shape[:2]}")
    if wrap_x and f.shape[1] % 2 != 0:
        raise ValueError("horizontal wrap needs an even width for the two-color sweep")
    interior = _forced_boundary(np.asarray(interior, dtype=bool), wrap_x)
    f[~interior] = target[~interior]

    info = {"iterations": 0, "residual": 0.0, "converged": True}
    if not interior.any():
        return (f[..., 0] if squeeze else f), info

    f = np.ascontiguousarray(f)
    lap = np.ascontiguousarray(lap)
    sweep = _gs_color_sweep if USE_NUMBA else _gs_color_sweep_numpy
    residual = _residual_inf if USE_NUMBA else _residual_inf_numpy
    res = np.inf
    it = 0
    while it < max_iters:
        sweep(f, lap, interior, 0, wrap_x)
        sweep(f, lap, interior, 1, wrap_x)
        it += 1
        if it % check_every == 0 or it == max_iters:
            res = float(residual(f, lap, interior))
            if res < tol:
                break
    info["iterations"] = it
    info["residual"] = res if np.isfinite(res) else float(residual(f, lap, interior))
    info["converged"] = info["residual"] < tol
    return (f[..., 0] if squeeze else f), info


def poisson_blend(
    target: np.ndarray,
    source: np.ndarray,
    region: Mask | np.ndarray,
    wrap_x: bool = True,
    tol: float = 1e-4,
    max_iters: int = 10000,
    coarse_size: int = 64,
    level_iters: int = 200,
) -> tuple[np.ndarray, dict]:
    """Gradient-domain blend: inside ``region`` the output follows the
    source's gradients while matching the target at the region border.

    Images are uint8 or float 0..255 with matching shapes. ``region`` is a
    float array binarized at 0.5, or a :class:`Mask` (which must be in
    panorama space when ``wrap_x``). Small images solve directly to ``tol``;
    larger ones solve a pyramid, taking the upsampled coarse solution as
    initialization and running ``level_iters`` sweeps per fine level.
    Returns (uint8 image, info dict).
    """
    if isinstance(region, Mask):
        if wrap_x:
            region.require("pano", "blend region")
        region = region.data
    region_bin = np.asarray(region, dtype=np.float64) >= 0.5
    t = np.asarray(target, dtype=np.float64)
    s = np.asarray(source, dtype=np.float64)
    if t.shape != s.shape:
        raise ValueError(f"target {t.shape} and source {s.shape} differ")
    if region_bin.shape != t.shape[:2]:
        raise ValueError(f"region {region_bin.shape} does not match images {t.shape[:2]}")
    interior = _forced_boundary(region_bin, wrap_x)
    if not interior.any():
        return np.clip(t + 0.5, 0, 255).astype(np.uint8), {
            "levels": 1, "iterations": 0, "residual": 0.0, "converged": True,
        }

    levels = [(t, s, interior)]
    while min(levels[-1][0].shape[:2]) > coarse_size:
        lt, ls, li = levels[-1]
        nh, nw = lt.shape[0] // 2, lt.shape[1] // 2
        if wrap_x:
            nw += nw % 2
        levels.append(
            (
                resize_bilinear(lt, nh, nw, wrap_x),
                resize_bilinear(ls, nh, nw, wrap_x),
                resize_bilinear(li.astype(np.float64), nh, nw, wrap_x) > 0.5,
            )
        )

    f = None
    total_iters = 0
    info = {}
    for depth, (lt, ls, li) in enumerate(reversed(levels)):
        coarsest = depth == 0
        if f is not None:
            f = resize_bilinear(f, lt.shape[0], lt.shape[1], wrap_x)
        f, info = solve_poisson(
            lt,
            laplacian(ls, wrap_x=wrap_x),
            li,
            wrap_x=wrap_x,
            tol=tol,
            max_iters=max_iters if coarsest else level_iters,
            init=f,
        )
        total_iters += info["iterations"]

    info = {
        "levels": len(levels),
        "iterations": total_iters,
        "residual": info["residual"],
        "converged": info["converged"],
    }
    if not info["converged"]:
        log.warning(
            "poisson blend stopped at residual %.3g (tol %.3g) after %d sweeps",
            info["residual"], tol, total_iters,
        )
    return np.clip(f + 0.5, 0, 255).astype(np.uint8), info


def harmonic_fill(
    image: np.ndarray,
    hole: np.ndarray,
    wrap_x: bool = False,
    tol: float = 1e-4,
    max_iters: int = 10000,
) -> np.ndarray:
    """Fill ``hole`` pixels by interpolating the surrounding image smoothly
    (zero-gradient-target Poisson solve). Returns float64."""
    img = np.asarray(image, dtype=np.float64)
    f, _ = solve_poisson(
        img,
        np.zeros_like(img, dtype=np.float64),
        np.asarray(hole, dtype=bool),
        wrap_x=wrap_x,
        tol=tol,
        max_iters=max_iters,
    )
    return f
