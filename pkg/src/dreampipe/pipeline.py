"""End-to-end scene texturing: panorama generation, projection, inpainting
rounds, imitation, and final atlas export.

Every stage persists its intermediates under the run directory, named by
stage, so failed runs can be inspected and downstream checks can audit mask
containment (what got written is always a subset of what the masks allowed).

Write discipline: the stylized atlas starts mid-gray, the first projection
writes texels allowed by the central visibility mask, and each inpainting
round may only write texels that are still unpainted and pass its
confidential mask. First write wins; nothing is overwritten.
"""

from __future__ import annotations

import json
import logging
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .bvh import build_bvh
from .camera import CameraPose
from .config import PipelineConfig, save_config
from .errors import DreamPipeError, StageError
from .imageio import save_image
from .imitator import fuse_imitated, imitate_all, save_checkpoint, train_imitator
from .masks import (
    Mask,
    combine_max,
    compute_edge_magnitude,
    confidential_mask,
    detect_depth_edges,
    inpaint_request_mask,
    safe_view_mask,
    uv_depth_edge_mask,
)
from .meshio import TexturedMesh, load_mesh, save_mesh_with_texture
from .poisson import poisson_blend
from .render import render_panorama, render_uv_mask_as_panorama
from .sampling import resize_bilinear
from .seamfix import fix_seams
from .stylizer import StylizerClient, make_stylizer
from .uvproj import (
    compute_visibility_mask,
    dilate_texels,
    project_panorama_to_uv,
    rasterize_uv_fields,
)

log = logging.getLogger(__name__)


def auto_central_viewpoint(mesh: TexturedMesh, eye_height: float = 1.6) -> np.ndarray:
    """Eye-level point over the footprint center: floor height is the 5th
    percentile of vertex z, clamped into the scene's vertical extent."""
    lo, hi = mesh.aabb()
    floor_z = float(np.percentile(mesh.vertices[:, 2], 5.0))
    extent_z = max(hi[2] - lo[2], 1e-9)
    z = min(floor_z + eye_height, hi[2] - 0.05 * extent_z)
    z = max(z, lo[2] + 0.05 * extent_z)
    return np.array([(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, z])


def candidate_grid(mesh: TexturedMesh, z: float, n: int = 5, margin: float = 0.15) -> np.ndarray:
    """Fallback inpainting-viewpoint candidates: an n x n grid at height z,
    inset from the footprint by ``margin`` of each extent."""
    lo, hi = mesh.aabb()
    xs = np.linspace(lo[0] + margin * (hi[0] - lo[0]), hi[0] - margin * (hi[0] - lo[0]), n)
    ys = np.linspace(lo[1] + margin * (hi[1] - lo[1]), hi[1] - margin * (hi[1] - lo[1]), n)
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel(), np.full(n * n, z)], axis=-1)


def select_viewpoints(candidates: np.ndarray, seeds: list[np.ndarray], count: int) -> list[int]:
    """Greedy farthest-point picks: each round takes the candidate that
    maximizes the minimum distance to everything already chosen (seeds plus
    earlier picks). Ties resolve to the lower candidate index."""
    candidates = np.asarray(candidates, dtype=np.float64).reshape(-1, 3)
    if count > len(candidates):
        raise ValueError(f"asked for {count} viewpoints from {len(candidates)} candidates")
    chosen: list[int] = []
    anchors = [np.asarray(s, dtype=np.float64) for s in seeds]
    for _ in range(count):
        dmin = np.full(len(candidates), np.inf)
        for a in anchors:
            dmin = np.minimum(dmin, np.linalg.norm(candidates - a, axis=1))
        dmin[chosen] = -np.inf
        pick = int(np.argmax(dmin))
        chosen.append(pick)
        anchors.append(candidates[pick])
    return chosen


def edge_image(color: np.ndarray) -> np.ndarray:
    """Gradient-magnitude visualization of a panorama, used as the structure
    hint for generation and alignment. Wraps horizontally."""
    g = np.asarray(color, dtype=np.float64) @ np.array([0.299, 0.587, 0.114])
    mag = compute_edge_magnitude(g)
    out = np.clip(mag, 0.0, 255.0).astype(np.uint8)
    return np.repeat(out[..., None], 3, axis=2)


def _upscale_mask_pano(mask: Mask, height: int, width: int) -> Mask:
    mask.require("pano", "mask to upscale")
    return Mask(
        resize_bilinear(mask.data.astype(np.float64), height, width, wrap_x=True).astype(
            np.float32
        ),
        "pano",
    )


def _window_alpha(rects: list, height: int, width: int) -> np.ndarray | None:
    """Transparent rectangles in UV coordinates (u right, v up)."""
    if not rects:
        return None
    alpha = np.full((height, width), 255, dtype=np.uint8)
    for u0, v0, u1, v1 in rects:
        x0 = int(np.floor(min(u0, u1) * width))
        x1 = int(np.ceil(max(u0, u1) * width))
        y0 = int(np.floor((1.0 - max(v0, v1)) * height))
        y1 = int(np.ceil((1.0 - min(v0, v1)) * height))
        alpha[max(y0, 0) : max(y1, 0), max(x0, 0) : max(x1, 0)] = 0
    return alpha


@contextmanager
def _stage(report: dict, name: str):
    log.info("stage %s", name)
    t0 = time.perf_counter()
    try:
        yield
    except DreamPipeError:
        raise
    except Exception as e:
        raise StageError(name, str(e)) from e
    finally:
        report["stages"][name] = round(time.perf_counter() - t0, 3)


def _save_mask(mask: Mask, path: Path) -> None:
    save_image(path, mask.to_uint8())


def run_pipeline(cfg: PipelineConfig, stylizer: StylizerClient | None = None) -> dict:
    """Run all stages; returns the report dict (also written as report.json)."""
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.yaml")
    report: dict = {"stages": {}, "counts": {}, "viewpoints": {}, "outputs": {}}

    mesh = load_mesh(cfg.scene.mesh, cfg.scene.texture)
    bvh = build_bvh(mesh.vertices, mesh.faces)
    own_stylizer = stylizer is None
    if own_stylizer:
        stylizer = make_stylizer(
            backend=cfg.stylizer.backend,
            url=cfg.stylizer.url,
            command=list(cfg.stylizer.command) or None,
            retries=cfg.stylizer.retries,
            backoff=cfg.stylizer.backoff,
            directives={
                "denoise_strength": cfg.stylizer.denoise_strength,
                "circular_padding_fraction": cfg.stylizer.circular_padding_fraction,
                "upscale_factor": cfg.panorama.upscale_factor,
            },
        )
    seed = cfg.stylizer.seed
    cw, ch = cfg.panorama.coarse_width, cfg.panorama.coarse_height
    lw, lh = cfg.panorama.large_width, cfg.panorama.large_height

    try:
        with _stage(report, "01_render"):
            if cfg.viewpoints.central == "auto":
                central = auto_central_viewpoint(mesh, cfg.viewpoints.eye_height)
            else:
                central = np.asarray(cfg.viewpoints.central, dtype=np.float64)
            pose_c = CameraPose(center=central)
            report["viewpoints"]["central"] = central.tolist()
            coarse = render_panorama(mesh, pose_c, cw, ch, bvh)
            edges_src = edge_image(coarse.color)
            large_frame = render_panorama(mesh, pose_c, lw, lh, bvh, shade=False)
            d = out / "stage01_render"
            coarse.save(d, "central")
            save_image(d / "edge_source.png", edges_src)
            save_image(d / "central_large_distance.pfm", large_frame.distance)

        with _stage(report, "02_generate"):
            stylized = stylizer.generate(coarse.distance, edges_src, seed)
            d = out / "stage02_generate"
            d.mkdir(exist_ok=True)
            save_image(d / "stylized.png", stylized)

        with _stage(report, "03_upscale"):
            stylized_large = stylizer.upscale(stylized, seed + 1)
            if stylized_large.shape[:2] != (lh, lw):
                raise StageError(
                    "03_upscale",
                    f"upscaled panorama is {stylized_large.shape[1]}x"
                    f"{stylized_large.shape[0]}, expected {lw}x{lh}",
                )
            d = out / "stage03_upscale"
            d.mkdir(exist_ok=True)
            save_image(d / "stylized_large.png", stylized_large)

        with _stage(report, "04_seamfix"):
            stylized_fixed = fix_seams(
                stylized_large,
                stylizer,
                distance=large_frame.distance,
                seed=seed,
                params=cfg.seams,
            )
            d = out / "stage04_seamfix"
            d.mkdir(exist_ok=True)
            save_image(d / "stylized_large_seamfixed.png", stylized_fixed)

        with _stage(report, "05_align"):
            aligned = stylizer.align(edges_src, stylized, seed + 2)
            aligned_large = stylizer.upscale(aligned, seed + 3)
            if cfg.seams.align_seam_fix:
                aligned_large = fix_seams(
                    aligned_large,
                    stylizer,
                    distance=large_frame.distance,
                    seed=seed + 4,
                    params=cfg.seams,
                )
            d = out / "stage05_align"
            d.mkdir(exist_ok=True)
            save_image(d / "aligned.png", aligned)
            save_image(d / "aligned_large.png", aligned_large)

        with _stage(report, "06_blend"):
            edges_coarse = detect_depth_edges(coarse.distance, cfg.masks.edges)
            edges_large = _upscale_mask_pano(edges_coarse, lh, lw)
            blended, blend_info = poisson_blend(
                stylized_fixed,
                aligned_large,
                edges_large,
                wrap_x=True,
                tol=cfg.blend.tol,
                max_iters=cfg.blend.max_iters,
                level_iters=cfg.blend.level_iters,
            )
            report["counts"]["blend"] = blend_info
            d = out / "stage06_blend"
            d.mkdir(exist_ok=True)
            _save_mask(edges_coarse, d / "depth_edges_coarse.png")
            _save_mask(edges_large, d / "depth_edges_large.png")
            save_image(d / "blended.png", blended)

        with _stage(report, "07_project"):
            fields = rasterize_uv_fields(mesh)
            atlas = np.full(mesh.texture.shape, 128, dtype=np.uint8)
            painted = np.zeros(fields.valid.shape, dtype=bool)
            m_init = compute_visibility_mask(
                fields, large_frame.distance, pose_c, cfg.masks.visibility_epsilon
            )
            n_central = project_panorama_to_uv(
                fields, blended, pose_c, atlas, painted, write_mask=m_init
            )
            m_accu = Mask(m_init.data.copy(), "uv")
            report["counts"]["central_written"] = n_central
            d = out / "stage07_project"
            d.mkdir(exist_ok=True)
            fields.save(d / "fields.npz")
            _save_mask(m_init, d / "m_init_vis.png")
            _save_mask(Mask(painted.astype(np.float32), "uv"), d / "painted.png")
            save_image(d / "atlas.png", atlas)

        with _stage(report, "08_inpaint"):
            if cfg.viewpoints.candidates:
                candidates = np.asarray(cfg.viewpoints.candidates, dtype=np.float64)
            else:
                candidates = candidate_grid(mesh, float(central[2]))
            picks = select_viewpoints(candidates, [central], cfg.viewpoints.inpaint_count)
            report["viewpoints"]["inpaint"] = [candidates[i].tolist() for i in picks]
            d = out / "stage08_inpaint"
            d.mkdir(exist_ok=True)
            inpaint_counts = []
            for k, idx in enumerate(picks):
                vd = d / f"vp{k + 1:02d}"
                vd.mkdir(exist_ok=True)
                pose_k = CameraPose(center=candidates[idx])
                frame_k = render_panorama(mesh, pose_k, lw, lh, bvh, shade=False)
                partial = render_panorama(mesh, pose_k, lw, lh, bvh, texture=atlas).color
                painted_pano = render_uv_mask_as_panorama(
                    mesh, pose_k, Mask(painted.astype(np.float32), "uv"), lw, lh, bvh
                )
                m_request = inpaint_request_mask(painted_pano, cfg.masks.inpaint)
                filled = stylizer.inpaint(
                    partial, frame_k.distance, m_request.data, seed + 10 + k
                )
                m_vis = compute_visibility_mask(
                    fields, frame_k.distance, pose_k, cfg.masks.visibility_epsilon
                )
                edges_k = detect_depth_edges(frame_k.distance, cfg.masks.edges)
                m_edge_uv = uv_depth_edge_mask(fields, pose_k, edges_k)
                m_safe = safe_view_mask(
                    fields,
                    pose_k,
                    cfg.masks.safe_min_grazing_deg,
                    cfg.masks.safe_max_distance,
                )
                m_conf = confidential_mask(m_vis, m_safe, m_edge_uv)
                n_k = project_panorama_to_uv(
                    fields, filled, pose_k, atlas, painted, write_mask=m_conf
                )
                m_accu = combine_max(m_accu, m_vis)
                inpaint_counts.append(n_k)
                save_image(vd / "distance.pfm", frame_k.distance)
                save_image(vd / "partial.png", partial)
                _save_mask(painted_pano, vd / "painted_pano.png")
                _save_mask(m_request, vd / "inpaint_request.png")
                save_image(vd / "filled.png", filled)
                _save_mask(m_vis, vd / "m_vis.png")
                _save_mask(m_safe, vd / "m_safe.png")
                _save_mask(m_edge_uv, vd / "m_edge_uv.png")
                _save_mask(m_conf, vd / "m_conf.png")
                _save_mask(Mask(painted.astype(np.float32), "uv"), vd / "painted.png")
                save_image(vd / "atlas.png", atlas)
            report["counts"]["inpaint_written"] = inpaint_counts
            _save_mask(m_accu, d / "m_accu.png")

        with _stage(report, "09_imitate"):
            sup = painted & fields.valid
            pts = fields.positions[sup]
            base = mesh.texture[sup].astype(np.float64) / 255.0
            target = atlas[sup].astype(np.float64) / 255.0
            net, history = train_imitator(
                pts, base, target, cfg.imitator, aabb=mesh.aabb()
            )
            imitated = imitate_all(net, fields.positions, fields.valid, mesh.texture)
            n_fused = fuse_imitated(atlas, imitated, painted, fields.valid)
            report["counts"]["imitator_fused"] = n_fused
            report["counts"]["imitator_train_loss"] = history["train_loss"][-1]
            if history["holdout_loss"]:
                report["counts"]["imitator_holdout_loss"] = history["holdout_loss"][-1]
            d = out / "stage09_imitate"
            d.mkdir(exist_ok=True)
            save_checkpoint(net, d / "checkpoint.bin")
            with open(d / "history.json", "w") as f:
                json.dump(history, f)
            save_image(d / "imitated.png", imitated)
            save_image(d / "atlas_fused.png", atlas)

        with _stage(report, "10_output"):
            n_unwritten = int((fields.valid & ~painted).sum())
            coverage = (
                float(painted[fields.valid].mean()) if fields.valid.any() else 1.0
            )
            report["counts"]["unwritten_valid_texels"] = n_unwritten
            report["counts"]["coverage"] = coverage
            final_atlas = dilate_texels(atlas, fields.valid.copy(), cfg.output.atlas_dilation)
            alpha = _window_alpha(
                cfg.output.window_rects, mesh.atlas_height, mesh.atlas_width
            )
            d = out / "stage10_output"
            d.mkdir(exist_ok=True)
            save_mesh_with_texture(mesh, final_atlas, d / "scene.obj", alpha_mask=alpha)
            report["outputs"]["mesh"] = str(d / "scene.obj")
            report["outputs"]["texture"] = str(d / "scene.png")
    finally:
        if own_stylizer and stylizer is not None:
            stylizer.close()
        with open(out / "report.json", "w") as f:
            json.dump(report, f, indent=2)

    log.info(
        "done: coverage %.4f, %d texels never written",
        report["counts"].get("coverage", float("nan")),
        report["counts"].get("unwritten_valid_texels", -1),
    )
    return report
