"""The four request pipelines on top of one denoiser.

Latent space is an identity autoencoder stand-in: encode averages pixel
blocks of ``latent_scale`` down to a 3-channel latent, decode upsamples
bilinearly and clamps. Images are padded (replicate) to block-and-UNet
friendly sizes before encoding and cropped back after decoding, so any
input size >= 2*latent_scale per side works.

Conditions (distance, soft edges, canny edges, tile content) are resized to
the latent grid, pushed through their control encoders and summed into the
stem features. The two padding variants of the features are built lazily
and cached, since a condition image does not change across steps.

Kind semantics:

  generate  sample from noise, conditioned on distance + edge structure;
            the padding switch makes the result wrap-continuous, nothing
            pins the seam afterwards
  align     partial denoise starting from the reference panorama (tile
            conditioning) with canny structure, strength from the
            denoise_strength directive
  inpaint   masked sampling with known-region re-imposition at latent
            resolution, then an exact pixel-space composite so pixels with
            mask 0 survive byte-identically
  upscale   bicubic x factor, then overlap-feathered per-tile latent
            refinement; tiles are ordinary images, not panoramas, so they
            always pad plainly (downstream seam repair owns the wrap there)
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from .config import BackendConfig
from .errors import RequestError
from .model import ControlEncoder, LatentDenoiser, materialize
from .sampler import ddim_sample

_SOBEL_X = torch.tensor([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T


def _directive_float(directives: dict, name: str, default: float, lo: float, hi: float) -> float:
    value = directives.get(name, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RequestError(f"directive {name} must be a number, got {value!r}")
    value = float(value)
    if not lo <= value <= hi:
        raise RequestError(f"directive {name}={value} outside [{lo}, {hi}]")
    return value


class DiffusionPipelines:
    def __init__(self, config: BackendConfig) -> None:
        self.cfg = config.validate()
        self.device = config.resolve_device()
        self.net = materialize(LatentDenoiser(config.base_channels), config.base_model).to(self.device)
        self.controls = {
            kind: materialize(ControlEncoder(config.base_channels), model_id).to(self.device)
            for kind, model_id in config.control_modules.items()
        }

    # image <-> latent plumbing ------------------------------------------

    def _block(self) -> int:
        # one UNet downsample on top of the pixel->latent pooling
        return self.cfg.latent_scale * 2

    def _check_size(self, kind: str, h: int, w: int) -> None:
        if h < self._block() or w < self._block():
            raise RequestError(f"{kind}: images must be at least {self._block()} px per side, got {w}x{h}")

    def _to_unit(self, img: np.ndarray) -> torch.Tensor:
        x = torch.from_numpy(np.ascontiguousarray(img)).to(self.device, torch.float32)
        return (x.permute(2, 0, 1)[None] / 127.5) - 1.0

    def _from_unit(self, x: torch.Tensor) -> np.ndarray:
        arr = ((x.clamp(-1.0, 1.0) + 1.0) * 127.5 + 0.5).floor().clamp(0, 255)
        return arr[0].permute(1, 2, 0).to("cpu", torch.uint8).numpy()

    def _pad_unit(self, x: torch.Tensor) -> torch.Tensor:
        block = self._block()
        h, w = x.shape[-2:]
        ph = (-h) % block
        pw = (-w) % block
        if ph or pw:
            x = F.pad(x, (0, pw, 0, ph), mode="replicate")
        return x

    def _encode_unit(self, x: torch.Tensor) -> torch.Tensor:
        s = self.cfg.latent_scale
        x = self._pad_unit(x)
        return F.avg_pool2d(x, s) if s > 1 else x

    def _decode_unit(self, lat: torch.Tensor, hw: tuple[int, int]) -> torch.Tensor:
        s = self.cfg.latent_scale
        x = lat if s == 1 else F.interpolate(lat, scale_factor=s, mode="bilinear", align_corners=False)
        return x[..., : hw[0], : hw[1]]

    def _latent_hw(self, h: int, w: int) -> tuple[int, int]:
        block = self._block()
        return (h + (-h) % block) // self.cfg.latent_scale, (w + (-w) % block) // self.cfg.latent_scale

    # condition plumbing --------------------------------------------------

    def _gray01(self, img: np.ndarray) -> torch.Tensor:
        x = torch.from_numpy(np.ascontiguousarray(img)).to(self.device, torch.float32) / 255.0
        luma = x @ torch.tensor([0.299, 0.587, 0.114], device=self.device)
        return luma[None, None]

    def _edges01(self, img: np.ndarray) -> torch.Tensor:
        g = F.pad(self._gray01(img), (1, 1, 1, 1), mode="replicate")
        gx = F.conv2d(g, _SOBEL_X.to(self.device)[None, None])
        gy = F.conv2d(g, _SOBEL_Y.to(self.device)[None, None])
        return torch.hypot(gx, gy).clamp(0.0, 1.0)

    def _distance01(self, distance: np.ndarray) -> torch.Tensor:
        valid = distance[distance >= 0.0]
        scale = float(np.quantile(valid, 0.95)) if valid.size else 1.0
        d = np.clip(distance, 0.0, None) / max(scale, 1e-6)
        return torch.from_numpy(np.clip(d, 0.0, 1.0).astype(np.float32)).to(self.device)[None, None]

    def _control_fn(self, conds: dict[str, torch.Tensor], lat_hw: tuple[int, int]):
        """conds: condition kind -> (1, 1, h, w) map in [0, 1]. Returns the
        wrap -> summed-feature callable the sampler expects."""
        cache: dict[bool, torch.Tensor] = {}

        def build(wrap: bool) -> torch.Tensor:
            if wrap not in cache:
                total = None
                for kind, c in conds.items():
                    if c.shape[-2:] != lat_hw:
                        c = F.interpolate(c, size=lat_hw, mode="bilinear", align_corners=False, antialias=True)
                    feats = self.controls[kind](c * 2.0 - 1.0, wrap)
                    total = feats if total is None else total + feats
                cache[wrap] = total
            return cache[wrap]

        return build

    def _wrap_fraction(self, directives: dict) -> float:
        return _directive_float(
            directives, "circular_padding_fraction", self.cfg.circular_padding_fraction, 0.0, 1.0
        )

    # the four kinds -------------------------------------------------------

    def generate(self, distance: np.ndarray, edge_source: np.ndarray, directives: dict) -> np.ndarray:
        h, w = distance.shape
        self._check_size("generate", h, w)
        lat_hw = self._latent_hw(h, w)
        control = self._control_fn(
            {"distance": self._distance01(distance), "softedge": self._edges01(edge_source)}, lat_hw
        )
        gen = torch.Generator().manual_seed(int(directives["seed"]))
        lat = ddim_sample(
            self.net,
            (1, 3, *lat_hw),
            gen,
            steps=self.cfg.steps,
            guidance_scale=self.cfg.guidance_scale,
            wrap_fraction=self._wrap_fraction(directives),
            control=control,
        )
        return self._from_unit(self._decode_unit(lat, (h, w)))

    def align(self, canny_source: np.ndarray, tile_source: np.ndarray, directives: dict) -> np.ndarray:
        h, w = tile_source.shape[:2]
        self._check_size("align", h, w)
        strength = _directive_float(directives, "denoise_strength", self.cfg.align_strength, 1e-6, 1.0)
        lat_hw = self._latent_hw(h, w)
        control = self._control_fn(
            {"canny": self._edges01(canny_source), "tile": self._gray01(tile_source)}, lat_hw
        )
        init = self._encode_unit(self._to_unit(tile_source))
        gen = torch.Generator().manual_seed(int(directives["seed"]))
        lat = ddim_sample(
            self.net,
            tuple(init.shape),
            gen,
            steps=self.cfg.steps,
            guidance_scale=self.cfg.guidance_scale,
            wrap_fraction=self._wrap_fraction(directives),
            control=control,
            init=init,
            strength=strength,
        )
        return self._from_unit(self._decode_unit(lat, (h, w)))

    def inpaint(
        self, partial: np.ndarray, distance: np.ndarray, mask: np.ndarray, directives: dict
    ) -> np.ndarray:
        h, w = partial.shape[:2]
        if mask.shape != (h, w) or distance.shape != (h, w):
            raise RequestError(
                f"inpaint: slot sizes disagree, image {(h, w)}, "
                f"distance {distance.shape}, mask {mask.shape}"
            )
        self._check_size("inpaint", h, w)
        soft = np.clip(mask, 0.0, 1.0).astype(np.float32)
        if not (soft >= 0.5).any():
            return partial.copy()
        lat_hw = self._latent_hw(h, w)
        known = self._encode_unit(self._to_unit(partial))
        hole = torch.from_numpy(soft).to(self.device)[None, None]
        hole = F.interpolate(hole, size=lat_hw, mode="bilinear", align_corners=False)
        control = self._control_fn({"distance": self._distance01(distance)}, lat_hw)
        gen = torch.Generator().manual_seed(int(directives["seed"]))
        lat = ddim_sample(
            self.net,
            tuple(known.shape),
            gen,
            steps=self.cfg.steps,
            guidance_scale=self.cfg.guidance_scale,
            wrap_fraction=self._wrap_fraction(directives),
            control=control,
            known=known,
            hole=hole,
        )
        painted = self._decode_unit(lat, (h, w))
        base = self._to_unit(partial)
        m = torch.from_numpy(soft).to(self.device)[None, None]
        return self._from_unit(base * (1.0 - m) + painted * m)

    def upscale(self, image: np.ndarray, directives: dict) -> np.ndarray:
        factor = directives.get("upscale_factor", 3)
        if isinstance(factor, bool) or not isinstance(factor, int) or factor < 1:
            raise RequestError(f"directive upscale_factor must be an int >= 1, got {factor!r}")
        h, w = image.shape[:2]
        self._check_size("upscale", h, w)
        out_h, out_w = h * factor, w * factor
        big = self._to_unit(image)
        if factor > 1:
            big = F.interpolate(big, size=(out_h, out_w), mode="bicubic", align_corners=False)
            big = big.clamp(-1.0, 1.0)
        acc = torch.zeros_like(big)
        wsum = torch.zeros((1, 1, out_h, out_w), device=self.device)
        seed = int(directives["seed"])
        for iy, y0, th in _tile_spans(out_h, self.cfg.tile_size, self.cfg.tile_overlap):
            for ix, x0, tw in _tile_spans(out_w, self.cfg.tile_size, self.cfg.tile_overlap):
                tile = big[..., y0 : y0 + th, x0 : x0 + tw]
                refined = self._refine_tile(tile, seed, iy, ix)
                weight = _feather(th, tw, self.cfg.tile_overlap, self.device)
                acc[..., y0 : y0 + th, x0 : x0 + tw] += refined * weight
                wsum[..., y0 : y0 + th, x0 : x0 + tw] += weight
        return self._from_unit(acc / wsum)

    def _refine_tile(self, tile: torch.Tensor, seed: int, iy: int, ix: int) -> torch.Tensor:
        th, tw = tile.shape[-2:]
        init = self._encode_unit(tile)
        control = self._control_fn({"tile": (tile.mean(dim=1, keepdim=True) + 1.0) / 2.0}, init.shape[-2:])
        gen = torch.Generator().manual_seed((seed * 1000003 + iy * 131071 + ix) & 0x7FFFFFFF)
        lat = ddim_sample(
            self.net,
            tuple(init.shape),
            gen,
            steps=self.cfg.steps,
            guidance_scale=self.cfg.guidance_scale,
            wrap_fraction=0.0,
            control=control,
            init=init,
            strength=self.cfg.upscale_strength,
        )
        return self._decode_unit(lat, (th, tw))


def _tile_spans(extent: int, tile: int, overlap: int):
    """(index, start, length) covering [0, extent) with the given overlap."""
    if extent <= tile:
        yield 0, 0, extent
        return
    step = tile - overlap
    starts = list(range(0, extent - tile + 1, step))
    if starts[-1] + tile < extent:
        starts.append(extent - tile)
    for i, s in enumerate(starts):
        yield i, s, tile


def _feather(th: int, tw: int, overlap: int, device) -> torch.Tensor:
    """Separable linear ramp over the overlap margin; never reaches zero so
    weight normalization stays finite at the image border."""

    def ramp(n: int) -> torch.Tensor:
        up = (torch.arange(n, dtype=torch.float32, device=device) + 1.0) / overlap
        return torch.minimum(up, up.flip(0)).clamp(max=1.0)

    return ramp(th)[None, None, :, None] * ramp(tw)[None, None, None, :]
