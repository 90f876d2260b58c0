#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Every hot kernel (BVH ray casting, UV rasterization, Gauss-Seidel
relaxation) dispatches on a module-level ``USE_NUMBA`` binding that is read
at call time; this script flips that binding in place so one process can
time both paths on identical inputs. Outputs are cross-checked first, so
the table never compares two different answers.

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeat 5 --json out.json

With DREAMPIPE_BACKEND=numpy (or numba missing) only the numpy column runs.
"""

import argparse
import json
import time

import numpy as np

from dreampipe import bvh as bvh_mod
from dreampipe import poisson as poisson_mod
from dreampipe import uvproj as uvproj_mod
from dreampipe.accel import NUMBA_AVAILABLE
from dreampipe.bvh import build_bvh, cast_rays
from dreampipe.geometry import pano_pixel_dirs
from dreampipe.meshio import TexturedMesh
from dreampipe.poisson import laplacian, solve_poisson
from dreampipe.uvproj import rasterize_uv_fields


def _box_quads(center, size, inward=False):
    c = np.asarray(center, dtype=np.float64)
    h = size / 2.0
    x, y, z = c
    corners = {
        (sx, sy, sz): [x + sx * h, y + sy * h, z + sz * h]
        for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)
    }
    quads = [
        [(1, -1, -1), (1, 1, -1), (1, 1, 1), (1, -1, 1)],     # +x
        [(-1, 1, -1), (-1, -1, -1), (-1, -1, 1), (-1, 1, 1)],  # -x
        [(1, 1, -1), (-1, 1, -1), (-1, 1, 1), (1, 1, 1)],      # +y
        [(-1, -1, -1), (1, -1, -1), (1, -1, 1), (-1, -1, 1)],  # -y
        [(-1, -1, 1), (1, -1, 1), (1, 1, 1), (-1, 1, 1)],      # +z
        [(1, -1, -1), (-1, -1, -1), (-1, 1, -1), (1, 1, -1)],  # -z
    ]
    out = [np.array([corners[k] for k in quad]) for quad in quads]
    return [q[::-1] for q in out] if inward else out


def ray_scene(grid=8):
    """Inverted room around a grid x grid field of small boxes."""
    quads = _box_quads((0.0, 0.0, 0.0), 20.0, inward=True)
    span = np.linspace(-6.0, 6.0, grid)
    for bx in span:
        for by in span:
            quads += _box_quads((bx, by, -1.0), 0.8)
    vertices, faces = [], []
    for quad in quads:
        base = len(vertices)
        vertices.extend(quad)
        faces.append([base, base + 1, base + 2])
        faces.append([base, base + 2, base + 3])
    return np.array(vertices), np.array(faces, dtype=np.int32)


def chart_grid_mesh(charts=16, atlas=1024):
    """charts x charts planar quads, one UV cell each."""
    vertices, faces, uvs = [], [], []
    for j in range(charts):
        for i in range(charts):
            base = len(vertices)
            vertices += [
                [i, j, 0.0], [i + 1, j, 0.0], [i + 1, j + 1, 0.0], [i, j + 1, 0.0]
            ]
            u0, u1 = i / charts, (i + 1) / charts
            v0, v1 = j / charts, (j + 1) / charts
            corn = [(u0, v0), (u1, v0), (u1, v1), (u0, v1)]
            faces.append([base, base + 1, base + 2])
            uvs.append([corn[0], corn[1], corn[2]])
            faces.append([base, base + 2, base + 3])
            uvs.append([corn[0], corn[2], corn[3]])
    tex = np.zeros((atlas, atlas, 3), dtype=np.uint8)
    return TexturedMesh(
        np.array(vertices), np.array(faces, np.int32), np.array(uvs), tex
    )


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def run_backends(module, fn, check, repeat):
    """Time fn under both dispatch settings of module.USE_NUMBA."""
    saved = module.USE_NUMBA
    out = {}
    try:
        module.USE_NUMBA = False
        ref = fn()
        out["numpy"] = best_of(fn, repeat)
        if NUMBA_AVAILABLE:
            module.USE_NUMBA = True
            got = fn()  # warm-up, compiles on first call
            check(ref, got)
            out["numba"] = best_of(fn, repeat)
    finally:
        module.USE_NUMBA = saved
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3, help="timings per cell, best kept")
    ap.add_argument("--rays", type=int, default=512, help="panorama width for the cast")
    ap.add_argument("--grid", type=int, default=8, help="box grid side for the cast scene")
    ap.add_argument("--charts", type=int, default=16, help="chart grid side for rasterization")
    ap.add_argument("--atlas", type=int, default=1024, help="atlas side for rasterization")
    ap.add_argument("--size", type=int, default=512, help="image side for relaxation sweeps")
    ap.add_argument("--sweeps", type=int, default=80, help="fixed Gauss-Seidel sweep count")
    ap.add_argument("--json", help="also write results to this path")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    rows = []

    vertices, faces = ray_scene(args.grid)
    bvh = build_bvh(vertices, faces)
    dirs = pano_pixel_dirs(args.rays, args.rays // 2).reshape(-1, 3)
    origin = np.zeros(3)

    def cast():
        return cast_rays(bvh, origin, dirs)

    def cast_check(ref, got):
        assert np.array_equal(ref[0], got[0]), "backends disagree on hit ids"
        assert np.allclose(ref[1], got[1], atol=1e-9), "backends disagree on hit distances"

    rows.append((
        f"bvh ray cast ({len(dirs)} rays, {len(faces)} tris)",
        run_backends(bvh_mod, cast, cast_check, args.repeat),
    ))

    mesh = chart_grid_mesh(args.charts, args.atlas)

    def rasterize():
        return rasterize_uv_fields(mesh)

    def rasterize_check(ref, got):
        assert np.array_equal(ref.tri_index, got.tri_index), "backends disagree on coverage"
        assert np.allclose(ref.positions, got.positions, atol=1e-9)

    rows.append((
        f"uv rasterize ({args.atlas}^2 atlas, {len(mesh.faces)} tris)",
        run_backends(uvproj_mod, rasterize, rasterize_check, args.repeat),
    ))

    n = args.size
    target = rng.uniform(0.0, 255.0, (n, n))
    guide = rng.uniform(0.0, 255.0, (n, n))
    interior = np.zeros((n, n), dtype=bool)
    interior[8:-8, 8:-8] = True
    lap = laplacian(guide, wrap_x=False)

    def relax():
        # tol 0 can never be reached: both backends run exactly args.sweeps
        return solve_poisson(
            target, lap, interior, wrap_x=False, tol=0.0, max_iters=args.sweeps
        )

    def relax_check(ref, got):
        assert ref[1]["iterations"] == got[1]["iterations"]
        assert np.allclose(ref[0], got[0], atol=1e-8), "backends disagree on the solution"

    rows.append((
        f"gauss-seidel ({n}x{n}, {args.sweeps} sweeps)",
        run_backends(poisson_mod, relax, relax_check, args.repeat),
    ))

    width = max(len(name) for name, _ in rows)
    print(f"{'kernel':<{width}}  {'numba':>9}  {'numpy':>9}  {'speedup':>8}")
    for name, result in rows:
        numba_s = result.get("numba")
        numpy_s = result["numpy"]
        if numba_s is None:
            print(f"{name:<{width}}  {'-':>9}  {numpy_s:>8.3f}s  {'-':>8}")
        else:
            print(
                f"{name:<{width}}  {numba_s:>8.3f}s  {numpy_s:>8.3f}s"
                f"  {numpy_s / numba_s:>7.1f}x"
            )
    if not NUMBA_AVAILABLE:
        print("numba unavailable or disabled; numpy fallback timings only")

    if args.json:
        payload = {name: result for name, result in rows}
        with open(args.json, "w") as fh:
            json.dump(payload, fh, indent=2)
        print(f"wrote {args.json}")


if __name__ == "__main__":
    main()
