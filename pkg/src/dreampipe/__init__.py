"""Scene-level mesh re-texturing through panoramic texture projection.

Takes a UV-textured indoor mesh plus text-driven stylized panoramas (from a
pluggable stylizer backend) and bakes a fully re-textured atlas: panorama
rendering, visibility masking, dual-texture blending, confidential inpainting
projection and implicit texture imitation for occluded regions.
"""

__version__ = "0.1.0"
