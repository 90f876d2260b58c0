"""Quick-look renders of a finished run: four pinhole views around the
central viewpoint plus a small panorama, written into ``<run>/previews``."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .bvh import build_bvh
from .camera import CameraPose
from .errors import ConfigError
from .imageio import save_image
from .meshio import load_mesh
from .render import render_panorama, render_perspective


def _yaw_matrix(deg: float) -> np.ndarray:
    a = np.deg2rad(deg)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def emit_previews(run_dir, size: int = 512, fov_deg: float = 90.0) -> list[str]:
    """Render previews for a pipeline run directory; returns written paths."""
    run_dir = Path(run_dir)
    report_path = run_dir / "report.json"
    if not report_path.is_file():
        raise ConfigError(f"{run_dir} has no report.json; is it a pipeline run?")
    report = json.loads(report_path.read_text())
    mesh_path = report.get("outputs", {}).get("mesh")
    central = report.get("viewpoints", {}).get("central")
    if not mesh_path or central is None:
        raise ConfigError(f"{report_path} lacks outputs.mesh or viewpoints.central")

    mesh = load_mesh(mesh_path)
    bvh = build_bvh(mesh.vertices, mesh.faces)
    center = np.asarray(central, dtype=np.float64)
    out = run_dir / "previews"
    out.mkdir(exist_ok=True)
    written: list[str] = []
    for yaw in (0, 90, 180, 270):
        pose = CameraPose(center=center, rotation=_yaw_matrix(yaw))
        color, _ = render_perspective(mesh, pose, fov_deg, size, size, bvh)
        path = out / f"view_yaw{yaw:03d}.png"
        save_image(path, color)
        written.append(str(path))
    pano = render_panorama(mesh, CameraPose(center=center), size, size // 2, bvh)
    path = out / "panorama.png"
    save_image(path, pano.color)
    written.append(str(path))
    return written
