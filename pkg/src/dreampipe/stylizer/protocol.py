"""Wire protocol between the pipeline and a stylization backend.

A request is one JSON object::

    {"kind": "<generate|align|inpaint|upscale>",
     "slots": {"<name>": {"format": "png"|"pfm", "data": "<base64>"}, ...},
     "directives": {"seed": 7, ...}}

and a response is ``{"image": {"format": ..., "data": ...}}`` or
``{"error": "<message>"}``. Color/structure slots travel as PNG (uint8);
distance maps and masks travel as PFM (float32).

Each kind requires an exact slot set, and its response dimensions are pinned
to one of the inputs so a client can validate what it got back:

    generate   distance, edge-source          -> sized like distance
    align      canny-source, tile-source      -> sized like tile-source
    inpaint    partial-image, distance, mask  -> sized like partial-image
    upscale    image                          -> image size x upscale_factor

``seed`` is mandatory in every request; backends must be deterministic in it.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import BackendError
from ..imageio import pfm_from_bytes, pfm_to_bytes, png_from_bytes, png_to_bytes

KIND_SLOTS: dict[str, tuple[str, ...]] = {
    "generate": ("distance", "edge-source"),
    "align": ("canny-source", "tile-source"),
    "inpaint": ("partial-image", "distance", "mask"),
    "upscale": ("image",),
}

# slots carrying float data; everything else is uint8 color/structure
FLOAT_SLOTS = frozenset({"distance", "mask"})

# the slot whose dimensions the response must match (upscale multiplies)
RESPONSE_SIZE_SLOT = {
    "generate": "distance",
    "align": "tile-source",
    "inpaint": "partial-image",
    "upscale": "image",
}

DEFAULT_DIRECTIVES: dict[str, float | int] = {
    "circular_padding_fraction": 0.6,
    "upscale_factor": 3,
    "denoise_strength": 0.75,
}


def _encode_slot(name: str, image: np.ndarray) -> dict:
    if name in FLOAT_SLOTS:
        return {
            "format": "pfm",
            "data": base64.b64encode(pfm_to_bytes(image)).decode("ascii"),
        }
    return {
        "format": "png",
        "data": base64.b64encode(png_to_bytes(image)).decode("ascii"),
    }


def _decode_slot(name: str, payload: dict) -> np.ndarray:
    fmt = payload.get("format")
    raw = base64.b64decode(payload.get("data", ""))
    if fmt == "pfm":
        return pfm_from_bytes(raw, label=f"slot {name!r}")
    if fmt == "png":
        return png_from_bytes(raw)
    raise BackendError(f"slot {name!r} has unknown format {fmt!r}")


def _check_slot(kind: str, name: str, image: np.ndarray) -> np.ndarray:
    if name in FLOAT_SLOTS:
        arr = np.asarray(image, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"{kind}: slot {name!r} must be a 2-D float map, got {arr.shape}")
        return arr
    arr = np.asarray(image)
    if arr.dtype != np.uint8 or arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(
            f"{kind}: slot {name!r} must be (H, W, 3) uint8, got {arr.dtype} {arr.shape}"
        )
    return arr


@dataclass
class StylizeRequest:
    kind: str
    slots: dict[str, np.ndarray]
    directives: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KIND_SLOTS:
            raise ValueError(f"unknown stylize kind {self.kind!r}")
        required = set(KIND_SLOTS[self.kind])
        got = set(self.slots)
        if got != required:
            missing = sorted(required - got)
            extra = sorted(got - required)
            raise ValueError(
                f"{self.kind}: wrong slots, missing {missing}, unexpected {extra}"
            )
        self.slots = {k: _check_slot(self.kind, k, v) for k, v in self.slots.items()}
        if "seed" not in self.directives:
            raise ValueError(f"{self.kind}: the 'seed' directive is mandatory")
        if not isinstance(self.directives["seed"], int):
            raise ValueError(f"{self.kind}: seed must be an int")
        merged = dict(DEFAULT_DIRECTIVES)
        merged.update(self.directives)
        self.directives = merged

    def expected_shape(self) -> tuple[int, int]:
        """(height, width) the response image must have."""
        ref = self.slots[RESPONSE_SIZE_SLOT[self.kind]]
        h, w = ref.shape[:2]
        if self.kind == "upscale":
            factor = int(self.directives["upscale_factor"])
            return h * factor, w * factor
        return h, w

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "slots": {k: _encode_slot(k, v) for k, v in self.slots.items()},
                "directives": self.directives,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "StylizeRequest":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            raise BackendError(f"malformed request JSON: {e}") from e
        slots = {k: _decode_slot(k, v) for k, v in obj.get("slots", {}).items()}
        return cls(kind=obj.get("kind", ""), slots=slots, directives=obj.get("directives", {}))


@dataclass
class StylizeResponse:
    image: np.ndarray

    def to_json(self) -> str:
        return json.dumps({"image": _encode_slot("image-out", self.image)})

    @classmethod
    def from_json(cls, text: str) -> "StylizeResponse":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            raise BackendError(f"malformed response JSON: {e}") from e
        if "error" in obj:
            raise BackendError(f"stylizer reported: {obj['error']}")
        if "image" not in obj:
            raise BackendError("stylizer response carries neither image nor error")
        return cls(image=_decode_slot("image-out", obj["image"]))


def error_json(message: str) -> str:
    return json.dumps({"error": message})
