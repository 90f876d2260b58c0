"""Triangle-mesh ray casting: BVH build + traversal kernels.

The BVH is a median-split tree flattened into numpy arrays. Two closest-hit
paths exist (see :mod:`dreampipe.accel`): a numba stack traversal and a
tiled pure-numpy brute-force sweep over all triangles. Both apply the same
intersection arithmetic and the same tie rule — equal hit distances go to the
lower triangle index — so they return identical results.

Hit parametrization: barycentric weights are ``(1-u-v, u, v)`` for corners
``(0, 1, 2)``. Misses carry triangle index -1 and distance -1.
"""

from dataclasses import dataclass

import numpy as np

from .accel import USE_NUMBA, njit, prange

_LEAF_SIZE = 4
_T_MIN = 1e-7  # ignore hits closer than this (self-intersection guard)
_BARY_EPS = 1e-9
_DET_EPS = 1e-12


@dataclass
class BVH:
    nodes_min: np.ndarray
    nodes_max: np.ndarray
    node_left: np.ndarray   # internal: left child; leaf: -1
    node_right: np.ndarray  # internal: right child; leaf: -1
    leaf_start: np.ndarray  # leaf: offset into tri permutation
    leaf_count: np.ndarray  # leaf: triangle count; internal: 0
    tri_v0: np.ndarray      # per reordered triangle
    tri_e1: np.ndarray
    tri_e2: np.ndarray
    tri_orig: np.ndarray    # reordered -> original triangle index

    @property
    def num_triangles(self) -> int:
        return len(self.tri_orig)


def build_bvh(vertices: np.ndarray, faces: np.ndarray, leaf_size: int = _LEAF_SIZE) -> BVH:
    """Median-split BVH on triangle-centroid longest axis."""
    faces = np.asarray(faces, dtype=np.int32)
    if len(faces) == 0:
        raise ValueError("cannot build a BVH over an empty mesh")
    vertices = np.asarray(vertices, dtype=np.float64)
    v0 = vertices[faces[:, 0]]
    v1 = vertices[faces[:, 1]]
    v2 = vertices[faces[:, 2]]
    tmin = np.minimum(np.minimum(v0, v1), v2)
    tmax = np.maximum(np.maximum(v0, v1), v2)
    centroids = (tmin + tmax) * 0.5

    nodes_min, nodes_max = [], []
    node_left, node_right, leaf_start, leaf_count = [], [], [], []
    order: list[np.ndarray] = []
    order_len = 0

    def alloc() -> int:
        nodes_min.append(None)
        nodes_max.append(None)
        node_left.append(-1)
        node_right.append(-1)
        leaf_start.append(0)
        leaf_count.append(0)
        return len(nodes_min) - 1

    root = alloc()
    stack = [(np.arange(len(faces)), root)]
    while stack:
        idx, slot = stack.pop()
        nodes_min[slot] = tmin[idx].min(axis=0)
        nodes_max[slot] = tmax[idx].max(axis=0)
        if len(idx) <= leaf_size:
            leaf_start[slot] = order_len
            leaf_count[slot] = len(idx)
            order.append(idx)
            order_len += len(idx)
            continue
        c = centroids[idx]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        k = len(idx) // 2
        part = np.argpartition(c[:, axis], k)
        left_slot, right_slot = alloc(), alloc()
        node_left[slot] = left_slot
        node_right[slot] = right_slot
        stack.append((idx[part[:k]], left_slot))
        stack.append((idx[part[k:]], right_slot))

    perm = np.concatenate(order) if order else np.zeros(0, dtype=np.int64)
    return BVH(
        nodes_min=np.ascontiguousarray(nodes_min, dtype=np.float64),
        nodes_max=np.ascontiguousarray(nodes_max, dtype=np.float64),
        node_left=np.asarray(node_left, dtype=np.int32),
        node_right=np.asarray(node_right, dtype=np.int32),
        leaf_start=np.asarray(leaf_start, dtype=np.int32),
        leaf_count=np.asarray(leaf_count, dtype=np.int32),
        tri_v0=np.ascontiguousarray(v0[perm]),
        tri_e1=np.ascontiguousarray(v1[perm] - v0[perm]),
        tri_e2=np.ascontiguousarray(v2[perm] - v0[perm]),
        tri_orig=np.ascontiguousarray(perm.astype(np.int32)),
    )


@njit(cache=True)
def _slab_tnear(ox, oy, oz, dx, dy, dz, bmin, bmax, tmax_limit):
    """Entry distance of the ray into an AABB; > tmax_limit means skip."""
    if dx != 0.0:
        inv = 1.0 / dx
    else:
        inv = 1e300 if dx >= 0.0 else -1e300
    t1 = (bmin[0] - ox) * inv
    t2 = (bmax[0] - ox) * inv
    tnear = min(t1, t2)
    tfar = max(t1, t2)
    if dy != 0.0:
        inv = 1.0 / dy
    else:
        inv = 1e300 if dy >= 0.0 else -1e300
    t1 = (bmin[1] - oy) * inv
    t2 = (bmax[1] - oy) * inv
    tnear = max(tnear, min(t1, t2))
    tfar = min(tfar, max(t1, t2))
    if dz != 0.0:
        inv = 1.0 / dz
    else:
        inv = 1e300 if dz >= 0.0 else -1e300
    t1 = (bmin[2] - oz) * inv
    t2 = (bmax[2] - oz) * inv
    tnear = max(tnear, min(t1, t2))
    tfar = min(tfar, max(t1, t2))
    if tfar < tnear or tfar < 0.0 or tnear > tmax_limit:
        return 1e301
    return tnear


@njit(cache=True, parallel=True)
def _cast_rays_bvh(
    origin,
    dirs,
    nodes_min,
    nodes_max,
    node_left,
    node_right,
    leaf_start,
    leaf_count,
    tri_v0,
    tri_e1,
    tri_e2,
    tri_orig,
    out_tri,
    out_t,
    out_u,
    out_v,
):
    n_rays = dirs.shape[0]
    ox, oy, oz = origin[0], origin[1], origin[2]
    for r in prange(n_rays):
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        best_t = np.inf
        best_tri = -1
        best_u = 0.0
        best_v = 0.0
        stack = np.empty(128, dtype=np.int32)
        stack[0] = 0
        sp = 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            # strictly-greater prune keeps equal-distance candidates reachable
            # so the lower-index tie rule can apply across leaves
            if _slab_tnear(ox, oy, oz, dx, dy, dz,
                           nodes_min[node], nodes_max[node], best_t) > best_t:
                continue
            if leaf_count[node] > 0:
                start = leaf_start[node]
                for k in range(start, start + leaf_count[node]):
                    e1x, e1y, e1z = tri_e1[k, 0], tri_e1[k, 1], tri_e1[k, 2]
                    e2x, e2y, e2z = tri_e2[k, 0], tri_e2[k, 1], tri_e2[k, 2]
                    px = dy * e2z - dz * e2y
                    py = dz * e2x - dx * e2z
                    pz = dx * e2y - dy * e2x
                    det = e1x * px + e1y * py + e1z * pz
                    if abs(det) < _DET_EPS:
                        continue
                    inv_det = 1.0 / det
                    sx = ox - tri_v0[k, 0]
                    sy = oy - tri_v0[k, 1]
                    sz = oz - tri_v0[k, 2]
                    u = (sx * px + sy * py + sz * pz) * inv_det
                    if u < -_BARY_EPS or u > 1.0 + _BARY_EPS:
                        continue
                    qx = sy * e1z - sz * e1y
                    qy = sz * e1x - sx * e1z
                    qz = sx * e1y - sy * e1x
                    v = (dx * qx + dy * qy + dz * qz) * inv_det
                    if v < -_BARY_EPS or u + v > 1.0 + _BARY_EPS:
                        continue
                    t = (e2x * qx + e2y * qy + e2z * qz) * inv_det
                    if t <= _T_MIN:
                        continue
                    orig = tri_orig[k]
                    if t < best_t or (t == best_t and orig < best_tri):
                        best_t = t
                        best_tri = orig
                        best_u = u
                        best_v = v
            else:
                stack[sp] = node_left[node]
                stack[sp + 1] = node_right[node]
                sp += 2
        out_tri[r] = best_tri
        if best_tri >= 0:
            out_t[r] = best_t
            out_u[r] = best_u
            out_v[r] = best_v
        else:
            out_t[r] = -1.0
            out_u[r] = 0.0
            out_v[r] = 0.0


def cast_rays_numpy(
    origin: np.ndarray,
    dirs: np.ndarray,
    v0: np.ndarray,
    e1: np.ndarray,
    e2: np.ndarray,
    ray_tile: int = 2048,
    tri_tile: int = 1024,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized brute-force closest hit over all triangles, tiled to bound
    memory. Triangles are swept in index order so the first minimum is the
    lowest index — the same tie rule as the BVH kernel."""
    n_rays = len(dirs)
    n_tris = len(v0)
    out_tri = np.full(n_rays, -1, dtype=np.int32)
    out_t = np.full(n_rays, -1.0)
    out_u = np.zeros(n_rays)
    out_v = np.zeros(n_rays)
    s_all = origin[None, :] - v0  # (T, 3)

    for r0 in range(0, n_rays, ray_tile):
        r1 = min(r0 + ray_tile, n_rays)
        d = dirs[r0:r1]  # (R, 3)
        best_t = np.full(r1 - r0, np.inf)
        best_tri = np.full(r1 - r0, -1, dtype=np.int32)
        best_u = np.zeros(r1 - r0)
        best_v = np.zeros(r1 - r0)
        for t0 in range(0, n_tris, tri_tile):
            t1_ = min(t0 + tri_tile, n_tris)
            E1 = e1[t0:t1_][None]  # (1, K, 3)
            E2 = e2[t0:t1_][None]
            S = s_all[t0:t1_][None]
            D = d[:, None, :]  # (R, 1, 3)
            P = np.cross(D, E2)
            det = (E1 * P).sum(-1)
            ok = np.abs(det) >= _DET_EPS
            inv_det = np.where(ok, 1.0 / np.where(det == 0.0, 1.0, det), 0.0)
            u = (S * P).sum(-1) * inv_det
            ok &= (u >= -_BARY_EPS) & (u <= 1.0 + _BARY_EPS)
            Q = np.cross(S, E1)
            v = (D * Q).sum(-1) * inv_det
            ok &= (v >= -_BARY_EPS) & (u + v <= 1.0 + _BARY_EPS)
            t = (E2 * Q).sum(-1) * inv_det
            ok &= t > _T_MIN
            t = np.where(ok, t, np.inf)
            k = np.argmin(t, axis=1)  # first (lowest-index) minimum
            rows = np.arange(r1 - r0)
            tk = t[rows, k]
            tri_k = (t0 + k).astype(np.int32)
            take = (tk < best_t) | ((tk == best_t) & (tri_k < best_tri) & (tk < np.inf))
            best_u = np.where(take, u[rows, k], best_u)
            best_v = np.where(take, v[rows, k], best_v)
            best_tri = np.where(take, tri_k, best_tri)
            best_t = np.where(take, tk, best_t)
        hit = best_tri >= 0
        out_tri[r0:r1] = best_tri
        out_t[r0:r1] = np.where(hit, best_t, -1.0)
        out_u[r0:r1] = best_u
        out_v[r0:r1] = best_v
    return out_tri, out_t, out_u, out_v


def cast_rays(
    bvh: BVH, origin: np.ndarray, dirs: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Closest hit for rays sharing one origin.

    Returns ``(tri, t, u, v)`` arrays; ``tri = -1`` and ``t = -1`` at misses.
    Barycentric weights of the hit are ``(1-u-v, u, v)``.
    """
    origin = np.ascontiguousarray(origin, dtype=np.float64).reshape(3)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    if USE_NUMBA:
        n = len(dirs)
        out_tri = np.empty(n, dtype=np.int32)
        out_t = np.empty(n)
        out_u = np.empty(n)
        out_v = np.empty(n)
        _cast_rays_bvh(
            origin, dirs,
            bvh.nodes_min, bvh.nodes_max, bvh.node_left, bvh.node_right,
            bvh.leaf_start, bvh.leaf_count,
            bvh.tri_v0, bvh.tri_e1, bvh.tri_e2, bvh.tri_orig,
            out_tri, out_t, out_u, out_v,
        )
        return out_tri, out_t, out_u, out_v
    # numpy path sweeps original-order triangles; rebuild them from the
    # BVH's reordered storage
    inv = np.argsort(bvh.tri_orig, kind="stable")
    return cast_rays_numpy(
        origin, dirs, bvh.tri_v0[inv], bvh.tri_e1[inv], bvh.tri_e2[inv]
    )
