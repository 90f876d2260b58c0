"""Command-line interface.

Subcommands cover the full run plus the individual operations that are
useful standalone (rendering, visibility baking, blending, seam fixing,
imitator training/application, and serving the mock stylizer).

Exit codes: 0 success, 2 configuration or input errors, 3 stylizer backend
failures, 4 stage failures inside the pipeline.
"""

from __future__ import annotations

import argparse
import json
import logging
import shlex
import sys
from pathlib import Path

import numpy as np

from .errors import BackendError, ConfigError, StageError
from .meshio import MeshError


def _add_backend_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", default="mock", choices=("mock", "http", "subprocess"))
    p.add_argument("--url", help="stylizer endpoint for --backend http")
    p.add_argument(
        "--command", help="stylizer command line for --backend subprocess (one string)"
    )
    p.add_argument("--seed", type=int, default=7)


def _make_stylizer(args):
    from .stylizer import make_stylizer

    return make_stylizer(
        backend=args.backend,
        url=args.url,
        command=shlex.split(args.command) if args.command else None,
    )


def _cmd_run(args) -> int:
    from .config import load_config
    from .pipeline import run_pipeline

    cfg = load_config(args.config)
    if args.output:
        cfg.output.directory = args.output
    report = run_pipeline(cfg)
    print(json.dumps({"coverage": report["counts"]["coverage"],
                      "outputs": report["outputs"]}, indent=2))
    return 0


def _cmd_preview(args) -> int:
    from .previews import emit_previews

    for path in emit_previews(args.run_dir, size=args.size):
        print(path)
    return 0


def _cmd_render_pano(args) -> int:
    from .camera import parse_pose_arg
    from .meshio import load_mesh
    from .render import render_panorama

    mesh = load_mesh(args.mesh, args.texture)
    pose = parse_pose_arg(args.pose)
    frame = render_panorama(mesh, pose, args.width, args.width // 2)
    out = Path(args.out)
    frame.save(out.parent if out.suffix else out, out.stem if out.suffix else "pano")
    print(out)
    return 0


def _cmd_bake_visibility(args) -> int:
    from .camera import parse_pose_arg
    from .imageio import save_image
    from .meshio import load_mesh
    from .render import render_panorama
    from .uvproj import compute_visibility_mask, rasterize_uv_fields

    mesh = load_mesh(args.mesh, args.texture)
    pose = parse_pose_arg(args.pose)
    frame = render_panorama(mesh, pose, args.width, args.width // 2, shade=False)
    fields = rasterize_uv_fields(mesh)
    mask = compute_visibility_mask(fields, frame.distance, pose, args.epsilon)
    save_image(args.out, mask.to_uint8())
    print(args.out)
    return 0


def _cmd_blend(args) -> int:
    from .imageio import load_image, save_image
    from .masks import Mask
    from .poisson import poisson_blend

    target = load_image(args.target)
    source = load_image(args.source)
    mask_img = load_image(args.mask)
    space = "pano" if args.wrap else "uv"
    region = Mask.from_uint8(mask_img, space)
    blended, info = poisson_blend(
        target, source, region, wrap_x=args.wrap, tol=args.tol, max_iters=args.max_iters
    )
    save_image(args.out, blended)
    print(json.dumps(info))
    return 0


def _cmd_fix_seams(args) -> int:
    from .imageio import load_image, save_image
    from .seamfix import SeamFixParams, fix_seams

    pano = load_image(args.image)
    distance = load_image(args.distance) if args.distance else None
    stylizer = _make_stylizer(args)
    try:
        fixed = fix_seams(
            pano,
            stylizer,
            distance=distance,
            seed=args.seed,
            params=SeamFixParams(order=args.order),
        )
    finally:
        stylizer.close()
    save_image(args.out, fixed)
    print(args.out)
    return 0


def _cmd_imitate(args) -> int:
    from .imageio import load_image, save_image
    from .imitator import (
        ImitatorParams,
        imitate_all,
        load_checkpoint,
        save_checkpoint,
        train_imitator,
    )
    from .uvproj import UvFieldSet

    fields = UvFieldSet.load(args.fields)
    base = load_image(args.base)
    if args.train:
        target = load_image(args.target)
        painted = load_image(args.painted) >= 128
        if painted.ndim == 3:
            painted = painted[..., 0]
        sup = painted & fields.valid
        if not sup.any():
            raise ConfigError("no painted valid texels to train on")
        params = ImitatorParams(
            iterations=args.iterations, seed=args.seed, batch_size=args.batch_size
        )
        net, history = train_imitator(
            fields.positions[sup],
            base[sup].astype(np.float64) / 255.0,
            target[sup].astype(np.float64) / 255.0,
            params,
        )
        save_checkpoint(net, args.checkpoint)
        print(json.dumps({"train_loss": history["train_loss"][-1],
                          "samples": int(sup.sum())}))
        return 0
    net = load_checkpoint(args.checkpoint)
    imitated = imitate_all(net, fields.positions, fields.valid, base)
    save_image(args.out, imitated)
    print(args.out)
    return 0


def _cmd_serve_mock(args) -> int:
    from .stylizer import MockStylizer, serve_http, serve_stdio

    backend = MockStylizer()
    if args.stdio:
        serve_stdio(backend)
        return 0
    host, _, port = args.http.rpartition(":")
    serve_http(backend, host or "127.0.0.1", int(port))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dreampipe", description="scene mesh texturing pipeline"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the full pipeline from a YAML config")
    p.add_argument("--config", required=True)
    p.add_argument("--output", help="override output.directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("preview", help="render previews for a finished run")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--size", type=int, default=512)
    p.set_defaults(func=_cmd_preview)

    p = sub.add_parser("render-pano", help="render color/distance/normal panoramas")
    p.add_argument("--mesh", required=True)
    p.add_argument("--texture")
    p.add_argument("--pose", required=True, help='"x,y,z" or "x,y,z,qw,qx,qy,qz"')
    p.add_argument("--width", type=int, default=1024)
    p.add_argument("--out", required=True, help="output directory or file stem")
    p.set_defaults(func=_cmd_render_pano)

    p = sub.add_parser("bake-visibility", help="write the UV visibility mask for a viewpoint")
    p.add_argument("--mesh", required=True)
    p.add_argument("--texture")
    p.add_argument("--pose", required=True)
    p.add_argument("--width", type=int, default=1024)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bake_visibility)

    p = sub.add_parser("blend", help="gradient-domain blend of two images over a mask")
    p.add_argument("--target", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iters", type=int, default=10000)
    p.add_argument("--no-wrap", dest="wrap", action="store_false",
                   help="treat images as non-panoramic")
    p.set_defaults(func=_cmd_blend, wrap=True)

    p = sub.add_parser("fix-seams", help="repair wrap seam and poles of a panorama")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--distance", help="PFM distance panorama for conditioning")
    p.add_argument("--order", default="horizontal-first",
                   choices=("horizontal-first", "poles-first"))
    _add_backend_args(p)
    p.set_defaults(func=_cmd_fix_seams)

    p = sub.add_parser("imitate", help="train or apply the texture imitator")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--train", action="store_true")
    mode.add_argument("--apply", action="store_true")
    p.add_argument("--fields", required=True, help="fields.npz from a run")
    p.add_argument("--base", required=True, help="real texture atlas PNG")
    p.add_argument("--target", help="stylized atlas PNG (training)")
    p.add_argument("--painted", help="painted mask PNG (training)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", help="imitated atlas PNG (apply)")
    p.add_argument("--iterations", type=int, default=5000)
    p.add_argument("--batch-size", type=int, default=8192)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_imitate)

    p = sub.add_parser("serve-mock", help="serve the deterministic mock stylizer")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--stdio", action="store_true")
    mode.add_argument("--http", help="host:port to listen on")
    p.set_defaults(func=_cmd_serve_mock)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if getattr(args, "train", False):
        for name in ("target", "painted"):
            if not getattr(args, name):
                print(f"error: --train needs --{name}", file=sys.stderr)
                return 2
    if getattr(args, "apply", False) and not getattr(args, "out", None):
        print("error: --apply needs --out", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, MeshError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except BackendError as e:
        print(f"stylizer backend error: {e}", file=sys.stderr)
        return 3
    except StageError as e:
        print(f"stage {e.stage} failed: {e}", file=sys.stderr)
        return 4
    except FileNotFoundError as e:
        print(f"missing file: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
