"""Deterministic DDIM sampling with a mid-schedule padding switch.

The schedule is the cosine noise level curve; stepping is the eta=0 DDIM
update (predict x0 from the noise estimate, clip it, re-noise to the next
level), so a fixed seed replays the exact trajectory. Three extensions the
pipelines need:

  - padding switch: steps at index >= round(steps * (1 - wrap_fraction))
    run every convolution with horizontal circular padding, i.e. the final
    wrap_fraction of the schedule treats the image as a horizontal cylinder;
  - partial denoise (strength < 1): start from a noised copy of a reference
    latent instead of pure noise and run only the tail of the schedule,
    which is the image-to-image mode used by alignment and tile refinement;
  - known-region re-imposition: after every step, pixels outside the hole
    mask are reset to the reference latent noised to the current level, so
    inpainting can only invent content inside the hole.

Noise is always drawn on the CPU generator and moved to the compute device,
which keeps seeds portable across devices.
"""

from __future__ import annotations

import math

import torch


def alpha_bar(t: float) -> float:
    """Cosine signal level schedule; t=1 is (almost) pure noise, t=0 clean.
    Clamped away from 0 and 1 so the x0 reconstruction stays finite."""
    ab = math.cos((t + 0.008) / 1.008 * math.pi / 2.0) ** 2
    return min(max(ab, 1e-4), 0.9999)


def wrap_start_index(steps: int, wrap_fraction: float) -> int:
    """First step index that pads circularly; steps..steps*(1-f) stay plain."""
    return min(max(int(round(steps * (1.0 - wrap_fraction))), 0), steps)


def _randn(shape, generator: torch.Generator, like: torch.Tensor) -> torch.Tensor:
    return torch.randn(shape, generator=generator, dtype=torch.float32).to(
        device=like.device, dtype=like.dtype
    )


@torch.no_grad()
def ddim_sample(
    net,
    shape: tuple[int, ...],
    generator: torch.Generator,
    *,
    steps: int,
    guidance_scale: float = 1.0,
    wrap_fraction: float = 0.0,
    control=None,
    init: torch.Tensor | None = None,
    strength: float = 1.0,
    known: torch.Tensor | None = None,
    hole: torch.Tensor | None = None,
) -> torch.Tensor:
    """Run the loop and return the final latent.

    ``control`` is a callable wrap -> feature tensor (or None); making it a
    function lets the caller cache the two padding variants instead of
    re-encoding conditions every step.
    """
    anchor = next(net.parameters())
    noise = _randn(shape, generator, anchor)
    if strength >= 1.0 or init is None:
        start = 0
        x = noise
    else:
        start = steps - max(1, int(round(steps * strength)))
        t_start = (steps - start) / steps
        ab = alpha_bar(t_start)
        x = math.sqrt(ab) * init + math.sqrt(1.0 - ab) * noise
    first_wrapped = wrap_start_index(steps, wrap_fraction)
    for i in range(start, steps):
        t = (steps - i) / steps
        t_next = (steps - i - 1) / steps
        wrap = i >= first_wrapped
        eps = net(x, t, control(wrap) if control is not None else None, wrap)
        if guidance_scale != 1.0 and control is not None:
            eps_unc = net(x, t, None, wrap)
            eps = eps_unc + guidance_scale * (eps - eps_unc)
        ab_t, ab_n = alpha_bar(t), alpha_bar(t_next)
        x0 = (x - math.sqrt(1.0 - ab_t) * eps) / math.sqrt(ab_t)
        x0 = x0.clamp(-3.0, 3.0)
        x = math.sqrt(ab_n) * x0 + math.sqrt(1.0 - ab_n) * eps
        if hole is not None and known is not None:
            renoised = math.sqrt(ab_n) * known + math.sqrt(1.0 - ab_n) * _randn(
                shape, generator, anchor
            )
            x = hole * x + (1.0 - hole) * renoised
    return x
