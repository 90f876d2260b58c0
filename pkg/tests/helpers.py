"""Synthetic scenes and reference oracles shared across the test suite.

Everything here is deliberately independent of the library's hot paths:
the occlusion oracle intersects rays against every triangle with its own
plane/barycentric arithmetic so it can stand as a reference for the BVH
and visibility code rather than a mirror of them.
"""

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from dreampipe.meshio import TexturedMesh


def dense_solve(target, lap, interior, wrap_x):
    """Direct sparse solve of the same equations the iterative solver uses:
    sum of 4 neighbors minus 4f equals lap on the interior, f = target
    elsewhere. Built independently, row by row."""
    h, w = target.shape
    idx = -np.ones((h, w), dtype=np.int64)
    ins = np.argwhere(interior)
    idx[interior] = np.arange(len(ins))
    a = sparse.lil_matrix((len(ins), len(ins)))
    rhs = lap[interior].astype(np.float64).copy()
    for row, (j, i) in enumerate(ins):
        a[row, row] = -4.0
        for dj, di in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            jj, ii = j + dj, i + di
            if wrap_x:
                ii %= w
            if not (0 <= jj < h and 0 <= ii < w):
                continue  # open frame edge contributes nothing
            if interior[jj, ii]:
                a[row, idx[jj, ii]] = 1.0
            else:
                rhs[row] -= target[jj, ii]
    f = target.astype(np.float64).copy()
    f[interior] = spsolve(a.tocsr(), rhs)
    return f

# unit cube corner offsets, index = x_bit + 2*y_bit + 4*z_bit
_CORNERS = np.array(
    [
        [-1, -1, -1], [1, -1, -1], [-1, 1, -1], [1, 1, -1],
        [-1, -1, 1], [1, -1, 1], [-1, 1, 1], [1, 1, 1],
    ],
    dtype=np.float64,
)

# quad corner indices wound so the normal points into the box interior
_QUADS_INWARD = [
    (0, 1, 3, 2),   # floor  (z = -s), normal +Z
    (6, 7, 5, 4),   # ceiling (z = +s), normal -Z
    (4, 5, 1, 0),   # wall y = -s, normal +Y
    (2, 3, 7, 6),   # wall y = +s, normal -Y
    (0, 2, 6, 4),   # wall x = -s, normal +X
    (5, 7, 3, 1),   # wall x = +s, normal -X
]


def box_quads(center, size, inward=True):
    """Six quads of an axis-aligned box, each as a (4, 3) corner array."""
    center = np.asarray(center, dtype=np.float64)
    half = np.asarray(size, dtype=np.float64) / 2.0
    verts = center + _CORNERS * half
    quads = []
    for q in _QUADS_INWARD:
        order = q if inward else q[::-1]
        quads.append(verts[list(order)])
    return quads


def quad_mesh(quads, atlas_size=256, fill=200):
    """Mesh from a list of quads, each packed into its own UV chart.

    Charts sit in a square grid with a 10% inset so neighbouring charts
    never share texels. Corner order (a, b, c, d) maps to the chart's
    (u0,v0), (u1,v0), (u1,v1), (u0,v1) corners.
    """
    grid = int(np.ceil(np.sqrt(len(quads))))
    vertices, faces, face_uvs = [], [], []
    for k, quad in enumerate(quads):
        gi, gj = k % grid, k // grid
        u0 = (gi + 0.1) / grid
        u1 = (gi + 0.9) / grid
        v0 = (gj + 0.1) / grid
        v1 = (gj + 0.9) / grid
        base = len(vertices)
        vertices.extend(np.asarray(quad, dtype=np.float64))
        corners_uv = [(u0, v0), (u1, v0), (u1, v1), (u0, v1)]
        a, b, c, d = base, base + 1, base + 2, base + 3
        faces.append([a, b, c])
        face_uvs.append([corners_uv[0], corners_uv[1], corners_uv[2]])
        faces.append([a, c, d])
        face_uvs.append([corners_uv[0], corners_uv[2], corners_uv[3]])
    texture = np.full((atlas_size, atlas_size, 3), fill, dtype=np.uint8)
    return TexturedMesh(
        np.array(vertices),
        np.array(faces, dtype=np.int32),
        np.array(face_uvs),
        texture,
    )


def box_room(size=4.0, atlas=96):
    """Inward-facing cube room centered at the origin, one chart per wall.

    Charts are stacked vertically: wall q occupies v in [q/6, (q+1)/6).
    Every atlas texel is covered (no gutters), which makes coverage
    bookkeeping in pipeline tests exact. Corners duplicate vertices the way
    scanned-room meshes do, so vertex normals stay per-wall exact instead
    of blending across the crease.
    """
    vertices, faces, uvs = [], [], []
    for qi, quad in enumerate(box_quads((0, 0, 0), size, inward=True)):
        v0, v1 = qi / 6.0, (qi + 1) / 6.0
        base = len(vertices)
        vertices.extend(quad)
        corn = [(0.0, v0), (1.0, v0), (1.0, v1), (0.0, v1)]
        a, b, c, d = base, base + 1, base + 2, base + 3
        faces.append([a, b, c])
        uvs.append([corn[0], corn[1], corn[2]])
        faces.append([a, c, d])
        uvs.append([corn[0], corn[2], corn[3]])
    tex = np.full((atlas, atlas, 3), 200, np.uint8)
    return TexturedMesh(
        np.array(vertices), np.array(faces, np.int32), np.array(uvs), tex
    )


def two_box_scene(atlas=512):
    """Room with a free-standing box casting an occlusion shadow.

    Outer room is a 6 m inward cube; the occluder is a 1 m outward cube
    between the camera (at the origin) and the +X wall, so that wall and
    the floor carry clean occluded regions. 24 triangles, 12 charts.
    """
    quads = box_quads((0, 0, 0), 6.0, inward=True)
    quads += box_quads((1.5, 0.0, -1.0), 1.0, inward=False)
    return quad_mesh(quads, atlas_size=atlas)


def tilted_plane_scene(length=8.0, width=1.0, atlas_w=512, atlas_h=64):
    """Single horizontal quad, normal +Z, full-atlas chart.

    With the camera 1 m above the x = 0 edge the viewing distance and the
    grazing angle both depend only on the in-plane radius, which makes the
    safe-view isolines analytic.
    """
    w = width / 2.0
    quad = np.array(
        [[0.0, -w, 0.0], [length, -w, 0.0], [length, w, 0.0], [0.0, w, 0.0]]
    )
    faces = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int32)
    uvs = np.array(
        [
            [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)],
            [(0.0, 0.0), (1.0, 1.0), (0.0, 1.0)],
        ]
    )
    tex = np.full((atlas_h, atlas_w, 3), 128, np.uint8)
    return TexturedMesh(quad, faces, uvs, tex)


def wrap_difference(img):
    """Mean absolute difference between the first and last pixel columns."""
    a = np.asarray(img, dtype=np.float64)
    return float(np.abs(a[:, 0] - a[:, -1]).mean())


def smooth_pano(h, w):
    """Low-frequency test panorama; wrap-continuous by construction."""
    u = (np.arange(w) + 0.5) / w
    v = (np.arange(h) + 0.5) / h
    gu, gv = np.meshgrid(u, v)
    r = 127.5 * (1.0 + np.sin(2 * np.pi * gu) * np.sin(np.pi * gv))
    g = 127.5 * (1.0 + np.cos(2 * np.pi * gu) * np.cos(np.pi * gv) * 0.7)
    b = 255.0 * gv
    return np.clip(np.stack([r, g, b], axis=-1) + 0.5, 0, 255).astype(np.uint8)


def gradient_pano(h, w):
    """Hard horizontal ramp: maximal discontinuity across the wrap."""
    row = np.linspace(0, 255, w).astype(np.uint8)
    return np.repeat(np.tile(row, (h, 1))[..., None], 3, axis=-1)


def segment_occluded(origin, points, vertices, faces, t_hi=0.999):
    """Reference occlusion test: does any triangle cut the open segment
    from ``origin`` to each point before reaching it?

    Plane intersection plus dot-product barycentrics, looped over
    triangles with an early-out, so it shares no code or formula layout
    with the BVH traversal it is checked against. ``t_hi`` excludes the
    segment endpoint (the point's own surface).
    """
    origin = np.asarray(origin, dtype=np.float64)
    d = np.asarray(points, dtype=np.float64) - origin
    occluded = np.zeros(len(d), dtype=bool)
    tri = vertices[faces]
    for p0, p1, p2 in tri:
        live = ~occluded
        if not live.any():
            break
        e1, e2 = p1 - p0, p2 - p0
        n = np.cross(e1, e2)
        denom = d[live] @ n
        ok = np.abs(denom) > 1e-14
        t = np.where(ok, ((p0 - origin) @ n) / np.where(ok, denom, 1.0), -1.0)
        ok &= (t > 1e-6) & (t < t_hi)
        if not ok.any():
            continue
        h = origin + t[:, None] * d[live] - p0
        d00, d01, d11 = e1 @ e1, e1 @ e2, e2 @ e2
        inv = 1.0 / (d00 * d11 - d01 * d01)
        hd0, hd1 = h @ e1, h @ e2
        ba = (d11 * hd0 - d01 * hd1) * inv
        bb = (d00 * hd1 - d01 * hd0) * inv
        ok &= (ba >= -1e-9) & (bb >= -1e-9) & (ba + bb <= 1.0 + 1e-9)
        idx = np.flatnonzero(live)
        occluded[idx[ok]] = True
    return occluded
