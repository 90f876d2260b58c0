"""Equirectangular projection math and barycentric interpolation.

World frame convention (used everywhere in this package):

* right-handed, metric (meters), **+Z is up**;
* **+X is forward** and maps to the horizontal center of a panorama
  (``u = 0.5``);
* equirect coords: ``u`` in ``[0, 1)`` is the longitude fraction
  (wraps modulo 1), ``v`` in ``[0, 1]`` is the colatitude fraction
  (``v = 0`` zenith, ``v = 1`` nadir);
* at the exact poles the longitude is undefined; ``dir_to_equirect``
  returns ``u = 0`` there for determinism.

Panorama pixel mapping for a ``width x height`` image (``width = 2*height``):
pixel center of column ``i``, row ``j`` sits at ``u = (i+0.5)/width``,
``v = (j+0.5)/height``; row 0 is the zenith.

All functions accept single coordinates or trailing-batched arrays and are
pure (safe to call concurrently).
"""

import numpy as np

TWO_PI = 2.0 * np.pi


def dir_to_equirect(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map direction(s) ``(..., 3)`` of any nonzero length to equirect
    ``(u, v)`` fractions.

    Inverse of :func:`equirect_to_dir` up to the modulo-1 wrap in ``u``.
    Exact poles (x = y = 0) get ``u = 0``. Normalizes internally: callers
    routinely pass raw point-minus-camera offsets, and the colatitude needs
    z over the full length, not z alone.
    """
    d = np.asarray(d, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    u = np.arctan2(y, x) / TWO_PI + 0.5
    # arctan2(+0,+x>0) -> u=0.5 forward; phi=pi wraps to u=0
    u = np.where(u >= 1.0, u - 1.0, u)
    at_pole = (x == 0.0) & (y == 0.0)
    u = np.where(at_pole, 0.0, u)
    n = np.sqrt(x * x + y * y + z * z)
    z_unit = z / np.where(n == 0.0, 1.0, n)
    v = np.arccos(np.clip(z_unit, -1.0, 1.0)) / np.pi
    return u, v


def equirect_to_dir(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Map equirect fraction(s) to unit direction(s) ``(..., 3)``.

    ``v = 0`` maps to +Z and ``v = 1`` to -Z regardless of ``u``.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    theta = v * np.pi
    phi = (u - 0.5) * TWO_PI
    s = np.sin(theta)
    return np.stack([s * np.cos(phi), s * np.sin(phi), np.cos(theta)], axis=-1)


def pano_pixel_dirs(width: int, height: int) -> np.ndarray:
    """Unit directions for every pixel center of a panorama, ``(H, W, 3)``."""
    u = (np.arange(width, dtype=np.float64) + 0.5) / width
    v = (np.arange(height, dtype=np.float64) + 0.5) / height
    uu, vv = np.meshgrid(u, v)
    return equirect_to_dir(uu, vv)


def interpolate_attribute(
    tri_index: np.ndarray,
    weights: np.ndarray,
    faces: np.ndarray,
    attribute: np.ndarray,
) -> np.ndarray:
    """Barycentric-interpolate a per-vertex attribute.

    ``tri_index``: ``(...,)`` triangle indices into ``faces`` ``(T, 3)``;
    ``weights``: ``(..., 3)`` barycentric weights; ``attribute``: ``(V, C)``
    or ``(V,)`` per-vertex values. Returns the weighted corner sum.
    """
    tri_index = np.asarray(tri_index)
    if np.any(tri_index < 0) or np.any(tri_index >= faces.shape[0]):
        raise IndexError("triangle index out of range")
    corners = attribute[faces[tri_index]]  # (..., 3, C) or (..., 3)
    w = np.asarray(weights, dtype=np.float64)
    if corners.ndim == w.ndim + 1:
        return (corners * w[..., None]).sum(axis=-2)
    # scalar attribute: the trailing axis is the corner axis itself
    return (corners * w).sum(axis=-1)


def normalize(vec: np.ndarray, axis: int = -1) -> np.ndarray:
    """Unit-normalize along ``axis``; zero vectors stay zero."""
    vec = np.asarray(vec, dtype=np.float64)
    n = np.linalg.norm(vec, axis=axis, keepdims=True)
    return np.where(n > 0.0, vec / np.where(n == 0.0, 1.0, n), 0.0)
