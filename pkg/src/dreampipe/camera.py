"""Camera poses: center + world-from-camera rotation.

At identity rotation the camera frame coincides with the world frame
(+X forward, +Z up, see :mod:`dreampipe.geometry`). Poses serialize as
3 translation values plus a wxyz quaternion.
"""

import json
from dataclasses import dataclass, field

import numpy as np


def quat_to_matrix(q) -> np.ndarray:
    """Unit quaternion (w, x, y, z) to 3x3 rotation matrix."""
    w, x, y, z = np.asarray(q, dtype=np.float64)
    n = np.sqrt(w * w + x * x + y * y + z * z)
    if n == 0.0:
        raise ValueError("zero quaternion")
    w, x, y, z = w / n, x / n, y / n, z / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


@dataclass
class CameraPose:
    center: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        if not np.allclose(self.rotation @ self.rotation.T, np.eye(3), atol=1e-6):
            raise ValueError("rotation is not orthonormal within 1e-6")
        if not np.all(np.isfinite(self.center)):
            raise ValueError("camera center contains non-finite values")

    @classmethod
    def from_tq(cls, t, q) -> "CameraPose":
        return cls(center=np.asarray(t, dtype=np.float64), rotation=quat_to_matrix(q))

    def to_dict(self) -> dict:
        # rotation back to quaternion via the standard trace method
        m = self.rotation
        tr = m[0, 0] + m[1, 1] + m[2, 2]
        if tr > 0:
            s = np.sqrt(tr + 1.0) * 2
            q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s,
                 (m[1, 0] - m[0, 1]) / s]
        elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
            q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s,
                 (m[0, 2] + m[2, 0]) / s]
        elif m[1, 1] > m[2, 2]:
            s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
            q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s,
                 (m[1, 2] + m[2, 1]) / s]
        else:
            s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
            q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s,
                 (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        return {"t": self.center.tolist(), "q": [float(c) for c in q]}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraPose":
        return cls.from_tq(d["t"], d["q"])


def load_pose_file(path) -> list[CameraPose]:
    """Read a JSON pose list: {"poses": [{"t": [...], "q": [...]}, ...]}."""
    with open(path) as f:
        doc = json.load(f)
    return [CameraPose.from_dict(p) for p in doc["poses"]]


def save_pose_file(path, poses: list[CameraPose]) -> None:
    with open(path, "w") as f:
        json.dump({"poses": [p.to_dict() for p in poses]}, f, indent=2)


def parse_pose_arg(text: str) -> CameraPose:
    """Parse 'tx,ty,tz,qw,qx,qy,qz' (CLI form); 3 values mean identity rotation."""
    parts = [float(p) for p in text.split(",")]
    if len(parts) == 3:
        return CameraPose(center=np.array(parts))
    if len(parts) == 7:
        return CameraPose.from_tq(parts[:3], parts[3:])
    raise ValueError("pose must be tx,ty,tz or tx,ty,tz,qw,qx,qy,qz")
