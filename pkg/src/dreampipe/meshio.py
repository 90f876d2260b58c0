"""UV-textured triangle meshes: OBJ/MTL/PNG load and save.

Scope: single-atlas Wavefront OBJ with per-corner ``vt`` records. Positions
are metric (meters) — the visibility epsilon and the far-surface cutoff are
absolute distances, so scale matters.

UV conventions: ``vt`` follows the OBJ convention (origin bottom-left, v up).
Atlas texel row 0 therefore corresponds to ``v = 1``; every texture sampling
site in this package maps ``row = (1 - v) * atlas_height - 0.5``. Mesh floats
are serialized with 17 significant digits so save→load round trips are
bit-exact.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from .imageio import load_png, save_png


class MeshError(Exception):
    pass


@dataclass
class TexturedMesh:
    """Triangle mesh with per-corner UVs and a single texture atlas.

    vertices: (V, 3) float64 positions in meters
    normals:  (V, 3) float64 unit vertex normals
    faces:    (T, 3) int32 vertex indices
    face_uvs: (T, 3, 2) float64 per-corner texture coordinates in [0, 1]^2
    texture:  (H, W, 3) uint8 real-world atlas
    """

    vertices: np.ndarray
    faces: np.ndarray
    face_uvs: np.ndarray
    texture: np.ndarray
    normals: np.ndarray = field(default=None)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int32)
        self.face_uvs = np.ascontiguousarray(self.face_uvs, dtype=np.float64)
        self.texture = np.ascontiguousarray(self.texture, dtype=np.uint8)
        if self.faces.size and (
            self.faces.min() < 0 or self.faces.max() >= len(self.vertices)
        ):
            raise MeshError("face references a vertex out of range")
        if self.face_uvs.shape != (len(self.faces), 3, 2):
            raise MeshError("face_uvs must be (T, 3, 2)")
        if np.any(self.face_uvs < -1e-6) or np.any(self.face_uvs > 1 + 1e-6):
            raise MeshError("texture coordinates outside [0, 1]^2")
        self.face_uvs = np.clip(self.face_uvs, 0.0, 1.0)
        if self.normals is None:
            self.normals = compute_vertex_normals(self.vertices, self.faces)
        self.normals = np.ascontiguousarray(self.normals, dtype=np.float64)

    @property
    def atlas_width(self) -> int:
        return self.texture.shape[1]

    @property
    def atlas_height(self) -> int:
        return self.texture.shape[0]

    @property
    def num_triangles(self) -> int:
        return len(self.faces)

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def compute_vertex_normals(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Area-weighted face-normal averaging; isolated vertices get +Z."""
    normals = np.zeros_like(vertices)
    v0 = vertices[faces[:, 0]]
    e1 = vertices[faces[:, 1]] - v0
    e2 = vertices[faces[:, 2]] - v0
    fn = np.cross(e1, e2)  # magnitude = 2*area, the area weighting
    for k in range(3):
        np.add.at(normals, faces[:, k], fn)
    lens = np.linalg.norm(normals, axis=1)
    zero = lens < 1e-20
    normals[zero] = (0.0, 0.0, 1.0)
    normals[~zero] /= lens[~zero, None]
    return normals


def load_mesh(path, texture_path=None) -> TexturedMesh:
    """Load an OBJ with vt records and one material atlas.

    The atlas PNG is resolved through the MTL's ``map_Kd`` unless
    ``texture_path`` overrides it. Missing normals are recomputed.
    """
    path = os.fspath(path)
    base_dir = os.path.dirname(path)
    vertices, uvs, vn = [], [], []
    faces, face_uvs_idx = [], []
    mtllib = None
    materials_used = set()

    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            try:
                if tag == "v":
                    vertices.append([float(x) for x in parts[1:4]])
                elif tag == "vt":
                    uvs.append([float(parts[1]), float(parts[2])])
                elif tag == "vn":
                    vn.append([float(x) for x in parts[1:4]])
                elif tag == "f":
                    corners = []
                    for spec_ in parts[1:]:
                        comps = spec_.split("/")
                        vi = int(comps[0])
                        ti = int(comps[1]) if len(comps) > 1 and comps[1] else 0
                        if ti == 0:
                            raise MeshError(
                                f"{path}:{lineno}: face corner without UV"
                            )
                        corners.append((vi - 1, ti - 1))
                    # fan-triangulate polygons
                    for k in range(1, len(corners) - 1):
                        tri = (corners[0], corners[k], corners[k + 1])
                        faces.append([c[0] for c in tri])
                        face_uvs_idx.append([c[1] for c in tri])
                elif tag == "mtllib":
                    mtllib = parts[1]
                elif tag == "usemtl":
                    materials_used.add(parts[1])
            except (ValueError, IndexError) as exc:
                raise MeshError(f"{path}:{lineno}: malformed record: {line}") from exc

    if not faces:
        raise MeshError(f"{path}: no faces")
    if len(materials_used) > 1:
        raise MeshError(
            f"{path}: multiple materials {sorted(materials_used)}; "
            "a single texture atlas is required"
        )

    if texture_path is None:
        texture_path = _resolve_texture(base_dir, mtllib)
    texture = load_png(texture_path)
    if texture.ndim == 3 and texture.shape[2] == 4:
        texture = texture[:, :, :3]
    if texture.ndim != 3 or texture.shape[2] != 3:
        raise MeshError(f"{texture_path}: atlas must be RGB")

    vertices = np.asarray(vertices, dtype=np.float64)
    uvs = np.asarray(uvs, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int32)
    face_uvs = uvs[np.asarray(face_uvs_idx, dtype=np.int64)]
    normals = None
    if vn and len(vn) == len(vertices):
        normals = np.asarray(vn, dtype=np.float64)
        lens = np.linalg.norm(normals, axis=1, keepdims=True)
        normals = np.where(lens > 1e-20, normals / np.where(lens == 0, 1, lens), 0)
    return TexturedMesh(vertices, faces, face_uvs, texture, normals=normals)


def _resolve_texture(base_dir: str, mtllib) -> str:
    if mtllib is None:
        raise MeshError("OBJ has no mtllib and no texture_path was given")
    mtl_path = os.path.join(base_dir, mtllib)
    if not os.path.exists(mtl_path):
        raise MeshError(f"material file not found: {mtl_path}")
    map_kd = None
    with open(mtl_path) as f:
        for line in f:
            parts = line.split()
            if parts and parts[0] == "map_Kd":
                if map_kd is not None and parts[1] != map_kd:
                    raise MeshError(f"{mtl_path}: multiple texture atlases")
                map_kd = parts[1]
    if map_kd is None:
        raise MeshError(f"{mtl_path}: no map_Kd")
    return os.path.join(base_dir, map_kd)


def save_mesh_with_texture(
    mesh: TexturedMesh, texture: np.ndarray, path, alpha_mask: np.ndarray = None
) -> None:
    """Write OBJ + MTL + PNG. With ``alpha_mask`` (float [0,1] or uint8, atlas
    dims) the PNG gains an alpha channel."""
    texture = np.asarray(texture, dtype=np.uint8)
    if texture.shape[:2] != (mesh.atlas_height, mesh.atlas_width):
        raise MeshError(
            f"texture {texture.shape[:2]} does not match atlas "
            f"{(mesh.atlas_height, mesh.atlas_width)}"
        )
    path = os.fspath(path)
    stem, _ = os.path.splitext(path)
    name = os.path.basename(stem)
    png_path = stem + ".png"
    mtl_path = stem + ".mtl"

    if alpha_mask is not None:
        alpha = np.asarray(alpha_mask)
        if alpha.shape != texture.shape[:2]:
            raise MeshError("alpha mask dimensions do not match the texture")
        if alpha.dtype != np.uint8:
            alpha = np.clip(np.rint(alpha * 255.0), 0, 255).astype(np.uint8)
        out = np.dstack([texture, alpha])
    else:
        out = texture
    save_png(png_path, out)

    with open(mtl_path, "w") as f:
        f.write("newmtl material0\n")
        f.write("Kd 1.0 1.0 1.0\n")
        f.write(f"map_Kd {name}.png\n")
        if alpha_mask is not None:
            f.write(f"map_d {name}.png\n")

    with open(path, "w") as f:
        f.write(f"mtllib {name}.mtl\n")
        for v in mesh.vertices:
            f.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for n in mesh.normals:
            f.write(f"vn {n[0]:.17g} {n[1]:.17g} {n[2]:.17g}\n")
        for tri_uv in mesh.face_uvs:
            for uv in tri_uv:
                f.write(f"vt {uv[0]:.17g} {uv[1]:.17g}\n")
        f.write("usemtl material0\n")
        for t, tri in enumerate(mesh.faces):
            ts = [
                f"{tri[k] + 1}/{3 * t + k + 1}/{tri[k] + 1}" for k in range(3)
            ]
            f.write(f"f {ts[0]} {ts[1]} {ts[2]}\n")
