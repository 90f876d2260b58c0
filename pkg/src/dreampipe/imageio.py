"""PNG and PFM image IO.

8-bit color / alpha / grayscale buffers travel as PNG; float distance maps
and masks travel as PFM (portable float map, 32-bit). PFM files are written
little-endian (scale header ``-1.0``) with the standard bottom-to-top row
order; loading flips back so in-memory arrays are always top-down row-major.

Sentinel convention for distance maps: misses are stored as ``-1.0``.
"""

import io
from pathlib import Path

import numpy as np
from PIL import Image


def png_to_bytes(image: np.ndarray) -> bytes:
    """Encode a uint8 image: (H, W) grayscale, (H, W, 3) RGB or (H, W, 4) RGBA."""
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        raise ValueError(f"PNG output must be uint8, got {arr.dtype}")
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def png_from_bytes(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        if im.mode not in ("L", "RGB", "RGBA"):
            im = im.convert("RGBA" if "A" in im.getbands() else "RGB")
        return np.asarray(im, dtype=np.uint8).copy()


def save_png(path, image: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(png_to_bytes(image))


def load_png(path) -> np.ndarray:
    """Read a PNG as uint8; keeps the channel count found in the file."""
    with open(path, "rb") as f:
        return png_from_bytes(f.read())


def pfm_to_bytes(image: np.ndarray) -> bytes:
    """Encode a float32 PFM: (H, W) grayscale or (H, W, 3) color."""
    arr = np.asarray(image, dtype=np.float32)
    if arr.ndim == 2:
        header = b"Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        header = b"PF"
    else:
        raise ValueError(f"PFM supports (H,W) or (H,W,3), got shape {arr.shape}")
    h, w = arr.shape[:2]
    return (
        header
        + b"\n"
        + f"{w} {h}\n".encode("ascii")
        + b"-1.0\n"  # negative scale = little-endian
        + np.flipud(arr).astype("<f4").tobytes()
    )


def pfm_from_bytes(data: bytes, label: str = "buffer") -> np.ndarray:
    f = io.BytesIO(data)
    header = f.readline().strip()
    if header == b"PF":
        channels = 3
    elif header == b"Pf":
        channels = 1
    else:
        raise ValueError(f"not a PFM file: bad magic {header!r} in {label}")
    dims = f.readline().split()
    if len(dims) != 2:
        raise ValueError(f"corrupt PFM header in {label}")
    w, h = int(dims[0]), int(dims[1])
    scale = float(f.readline().strip())
    dtype = "<f4" if scale < 0 else ">f4"
    payload = np.frombuffer(f.read(w * h * channels * 4), dtype=dtype)
    if payload.size != w * h * channels:
        raise ValueError(f"truncated PFM payload in {label}")
    arr = payload.reshape(h, w) if channels == 1 else payload.reshape(h, w, channels)
    return np.flipud(arr).astype(np.float32).copy()


def save_pfm(path, image: np.ndarray) -> None:
    """Write a float32 PFM: (H, W) grayscale or (H, W, 3) color."""
    with open(path, "wb") as f:
        f.write(pfm_to_bytes(image))


def load_pfm(path) -> np.ndarray:
    """Read a PFM file into a top-down float32 array."""
    with open(path, "rb") as f:
        return pfm_from_bytes(f.read(), label=str(path))


def save_image(path, image: np.ndarray) -> None:
    """Dispatch on extension: .png for uint8, .pfm for float."""
    suffix = Path(path).suffix.lower()
    if suffix == ".png":
        save_png(path, image)
    elif suffix == ".pfm":
        save_pfm(path, image)
    else:
        raise ValueError(f"unsupported image extension {suffix!r}")


def load_image(path) -> np.ndarray:
    suffix = Path(path).suffix.lower()
    if suffix == ".png":
        return load_png(path)
    if suffix == ".pfm":
        return load_pfm(path)
    raise ValueError(f"unsupported image extension {suffix!r}")
