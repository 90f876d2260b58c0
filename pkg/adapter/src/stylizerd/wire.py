"""Stand-alone implementation of the stylizer wire protocol.

One JSON object per request::

    {"kind": "<generate|align|inpaint|upscale>",
     "slots": {"<name>": {"format": "png"|"pfm", "data": "<base64>"}, ...},
     "directives": {"seed": 7, ...}}

and one per response: ``{"image": {"format": "png", "data": ...}}`` on
success, ``{"error": "<message>"}`` otherwise. Color slots are 8-bit RGB
PNGs; ``distance`` and ``mask`` are 2-D float32 PFMs (little-endian,
bottom-up row order, so in-memory arrays are top-down).

This module is deliberately self-contained: the service speaks the protocol
from its published description alone and shares no code with any particular
client, which is what makes it a drop-in backend.
"""

from __future__ import annotations

import base64
import io
import json
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import RequestError

KIND_SLOTS: dict[str, tuple[str, ...]] = {
    "generate": ("distance", "edge-source"),
    "align": ("canny-source", "tile-source"),
    "inpaint": ("partial-image", "distance", "mask"),
    "upscale": ("image",),
}

# slots carrying float data; everything else is uint8 color/structure
FLOAT_SLOTS = frozenset({"distance", "mask"})


def png_encode(image: np.ndarray) -> bytes:
    arr = np.asarray(image)
    if arr.dtype != np.uint8 or arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"PNG output must be (H, W, 3) uint8, got {arr.dtype} {arr.shape}")
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def png_decode(data: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as im:
            return np.asarray(im, dtype=np.uint8).copy()
    except Exception as e:
        raise RequestError(f"undecodable PNG payload: {e}") from e


def pfm_encode(image: np.ndarray) -> bytes:
    arr = np.asarray(image, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError(f"PFM slots are 2-D float maps, got shape {arr.shape}")
    h, w = arr.shape
    header = b"Pf\n" + f"{w} {h}\n".encode("ascii") + b"-1.0\n"
    return header + np.flipud(arr).astype("<f4").tobytes()


def pfm_decode(data: bytes) -> np.ndarray:
    f = io.BytesIO(data)
    magic = f.readline().strip()
    if magic == b"PF":
        channels = 3
    elif magic == b"Pf":
        channels = 1
    else:
        raise RequestError(f"not a PFM payload: bad magic {magic!r}")
    dims = f.readline().split()
    if len(dims) != 2:
        raise RequestError("corrupt PFM header")
    try:
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
    except ValueError as e:
        raise RequestError(f"corrupt PFM header: {e}") from e
    payload = np.frombuffer(f.read(w * h * channels * 4), dtype="<f4" if scale < 0 else ">f4")
    if payload.size != w * h * channels:
        raise RequestError("truncated PFM payload")
    arr = payload.reshape(h, w) if channels == 1 else payload.reshape(h, w, channels)
    return np.flipud(arr).astype(np.float32).copy()


def _decode_slot(name: str, payload) -> np.ndarray:
    if not isinstance(payload, dict):
        raise RequestError(f"slot {name!r} is not an object")
    fmt = payload.get("format")
    try:
        raw = base64.b64decode(payload.get("data", ""), validate=True)
    except (ValueError, TypeError) as e:
        raise RequestError(f"slot {name!r} carries invalid base64: {e}") from e
    if fmt == "pfm":
        arr = pfm_decode(raw)
    elif fmt == "png":
        arr = png_decode(raw)
    else:
        raise RequestError(f"slot {name!r} has unknown format {fmt!r}")
    if name in FLOAT_SLOTS:
        if arr.ndim != 2:
            raise RequestError(f"slot {name!r} must be a 2-D float map, got shape {arr.shape}")
        return np.asarray(arr, dtype=np.float32)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise RequestError(f"slot {name!r} must be (H, W, 3) uint8, got {arr.dtype} {arr.shape}")
    return arr


def _encode_slot(name: str, image: np.ndarray) -> dict:
    if name in FLOAT_SLOTS:
        return {"format": "pfm", "data": base64.b64encode(pfm_encode(image)).decode("ascii")}
    return {"format": "png", "data": base64.b64encode(png_encode(image)).decode("ascii")}


@dataclass
class Request:
    """A validated request: decoded slots plus the raw directive mapping.

    Directives other than the mandatory integer ``seed`` are passed through
    untouched; interpretation (and config fallbacks for absent ones) is the
    pipeline's business, not the wire's.
    """

    kind: str
    slots: dict[str, np.ndarray]
    directives: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return int(self.directives["seed"])


def parse_request(text: str) -> Request:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise RequestError(f"malformed request JSON: {e}") from e
    if not isinstance(obj, dict):
        raise RequestError("request must be a JSON object")
    kind = obj.get("kind", "")
    if kind not in KIND_SLOTS:
        raise RequestError(f"unknown stylize kind {kind!r}")
    raw_slots = obj.get("slots", {})
    required = set(KIND_SLOTS[kind])
    got = set(raw_slots)
    if got != required:
        missing = sorted(required - got)
        extra = sorted(got - required)
        raise RequestError(f"{kind}: wrong slots, missing {missing}, unexpected {extra}")
    slots = {name: _decode_slot(name, raw_slots[name]) for name in KIND_SLOTS[kind]}
    directives = obj.get("directives", {})
    if not isinstance(directives, dict):
        raise RequestError("directives must be an object")
    if "seed" not in directives:
        raise RequestError(f"{kind}: the 'seed' directive is mandatory")
    if not isinstance(directives["seed"], int):
        raise RequestError(f"{kind}: seed must be an int")
    return Request(kind=kind, slots=slots, directives=dict(directives))


def build_request_json(kind: str, slots: dict[str, np.ndarray], directives: dict) -> str:
    """Client-side encoder; the service itself never calls this, but tools
    and tests that want to speak to one do."""
    return json.dumps(
        {
            "kind": kind,
            "slots": {k: _encode_slot(k, v) for k, v in slots.items()},
            "directives": directives,
        }
    )


def response_json(image: np.ndarray) -> str:
    return json.dumps({"image": _encode_slot("image-out", image)})


def error_json(message: str) -> str:
    return json.dumps({"error": message})


def parse_response(text: str) -> np.ndarray:
    """Decode a response back to an image; raises on error payloads."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise RequestError(f"malformed response JSON: {e}") from e
    if "error" in obj:
        raise RequestError(f"backend reported: {obj['error']}")
    if "image" not in obj:
        raise RequestError("response carries neither image nor error")
    return _decode_slot("image-out", obj["image"])
