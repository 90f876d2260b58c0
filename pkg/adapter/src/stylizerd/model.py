"""Denoiser network and control encoders.

The architectural point of this module is :class:`WrapConv2d`: every 2-D
convolution in the stack pads functionally per call, so one boolean decides
whether the horizontal borders replicate (ordinary image behavior) or wrap
around (panorama behavior, left and right edges are neighbors). The sampler
flips that flag for the tail of the denoising schedule, which is what makes
generated equirectangular panoramas continuous across the seam. Vertical
borders always replicate; the poles are not periodic.

Model ids starting with ``identity`` build stub networks whose weights are
seeded from the id string: untrained but fully deterministic, enough to
exercise every code path and contract. Any other id is read as a path to a
``state_dict`` checkpoint, which is how a real trained backbone would be
deployed.
"""

from __future__ import annotations

import math
import zlib
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ModelLoadError

LATENT_CHANNELS = 3


def _pad_hv(x: torch.Tensor, pad: int, wrap: bool) -> torch.Tensor:
    if pad == 0:
        return x
    x = F.pad(x, (pad, pad, 0, 0), mode="circular" if wrap else "replicate")
    return F.pad(x, (0, 0, pad, pad), mode="replicate")


class WrapConv2d(nn.Module):
    """3x3 convolution with a per-call horizontal padding mode."""

    def __init__(self, in_ch: int, out_ch: int, stride: int = 1) -> None:
        super().__init__()
        self.weight = nn.Parameter(torch.empty(out_ch, in_ch, 3, 3))
        self.bias = nn.Parameter(torch.empty(out_ch))
        self.stride = stride

    def forward(self, x: torch.Tensor, wrap: bool) -> torch.Tensor:
        return F.conv2d(_pad_hv(x, 1, wrap), self.weight, self.bias, stride=self.stride)


def _time_embedding(t: float, dim: int, device, dtype) -> torch.Tensor:
    """Sinusoidal features of the schedule position t in [0, 1]."""
    half = dim // 2
    freqs = torch.exp(torch.linspace(0.0, math.log(1000.0), half, device=device, dtype=dtype))
    angles = t * freqs
    return torch.cat([torch.sin(angles), torch.cos(angles)])[None, :]


class ResBlock(nn.Module):
    def __init__(self, ch: int, temb_dim: int) -> None:
        super().__init__()
        self.norm1 = nn.GroupNorm(8, ch)
        self.conv1 = WrapConv2d(ch, ch)
        self.temb = nn.Linear(temb_dim, ch)
        self.norm2 = nn.GroupNorm(8, ch)
        self.conv2 = WrapConv2d(ch, ch)

    def forward(self, x: torch.Tensor, temb: torch.Tensor, wrap: bool) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)), wrap)
        h = h + self.temb(temb)[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)), wrap)
        return x + h


class LatentDenoiser(nn.Module):
    """Small single-downsample UNet predicting the noise residual.

    The prediction is the high-frequency part of the state plus a learned
    correction from the UNet. The fixed high-pass term gives the untrained
    stub the contractive character a denoiser trained at low noise levels
    has (residual noise lives in the high frequencies), so sampling
    actually smooths; the correction keeps the output structured and is
    where a real checkpoint would carry its prior. Both terms are spatial
    ops and both obey the padding flag.

    forward(x, t, control, wrap): latent (B, C, H, W) with H and W even,
    schedule position t in [0, 1], optional control features shaped
    (B, base, H, W) injected after the stem, and the padding flag threaded
    through every convolution.
    """

    CORRECTION_GAIN = 0.35

    def __init__(self, base: int = 32, temb_dim: int = 64) -> None:
        super().__init__()
        self.time_mlp = nn.Sequential(nn.Linear(temb_dim, temb_dim), nn.SiLU(), nn.Linear(temb_dim, temb_dim))
        self.temb_dim = temb_dim
        self.stem = WrapConv2d(LATENT_CHANNELS, base)
        self.enc = ResBlock(base, temb_dim)
        self.down = WrapConv2d(base, base * 2, stride=2)
        self.mid1 = ResBlock(base * 2, temb_dim)
        self.mid2 = ResBlock(base * 2, temb_dim)
        self.up = WrapConv2d(base * 2, base)
        self.dec = ResBlock(base, temb_dim)
        self.out_norm = nn.GroupNorm(8, base)
        self.out = WrapConv2d(base, LATENT_CHANNELS)

    def forward(
        self, x: torch.Tensor, t: float, control: torch.Tensor | None, wrap: bool
    ) -> torch.Tensor:
        if x.shape[-1] % 2 or x.shape[-2] % 2:
            raise ValueError(f"latent dims must be even, got {tuple(x.shape[-2:])}")
        temb = self.time_mlp(_time_embedding(t, self.temb_dim, x.device, x.dtype))
        h = self.stem(x, wrap)
        if control is not None:
            h = h + control
        skip = self.enc(h, temb, wrap)
        h = self.down(skip, wrap)
        h = self.mid2(self.mid1(h, temb, wrap), temb, wrap)
        h = F.interpolate(h, scale_factor=2, mode="nearest")
        h = self.up(h, wrap) + skip
        h = self.dec(h, temb, wrap)
        correction = self.out(F.silu(self.out_norm(h)), wrap)
        highpass = x - F.avg_pool2d(_pad_hv(x, 1, wrap), 3, stride=1)
        return highpass + self.CORRECTION_GAIN * correction


class ControlEncoder(nn.Module):
    """Lifts one condition channel to stem-resolution features."""

    def __init__(self, base: int = 32) -> None:
        super().__init__()
        self.conv1 = WrapConv2d(1, base // 2)
        self.conv2 = WrapConv2d(base // 2, base)

    def forward(self, c: torch.Tensor, wrap: bool) -> torch.Tensor:
        return self.conv2(F.silu(self.conv1(c, wrap)), wrap)


def seed_weights(module: nn.Module, seed: int) -> None:
    """Deterministic init, independent of parameter registration order:
    matrices get fan-in scaled gaussians, norm gains 1, everything else 0."""
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, p in sorted(module.named_parameters()):
            if p.ndim >= 2:
                std = math.sqrt(2.0 / p[0].numel())
                p.copy_(torch.empty_like(p, device="cpu").normal_(0.0, std, generator=gen))
            elif name.endswith("weight"):
                p.fill_(1.0)  # norm gains
            else:
                p.zero_()


def weight_seed(model_id: str) -> int:
    return zlib.crc32(model_id.encode("utf-8"))


def materialize(module: nn.Module, model_id: str) -> nn.Module:
    """Fill a freshly built module with weights named by a model id."""
    if model_id.startswith("identity"):
        seed_weights(module, weight_seed(model_id))
    else:
        path = Path(model_id)
        if not path.is_file():
            raise ModelLoadError(
                f"model {model_id!r} is neither an identity stub nor a readable checkpoint file"
            )
        try:
            state = torch.load(path, map_location="cpu", weights_only=True)
            module.load_state_dict(state)
        except Exception as e:
            raise ModelLoadError(f"cannot load checkpoint {model_id!r}: {e}") from e
    module.eval()
    module.requires_grad_(False)
    return module
