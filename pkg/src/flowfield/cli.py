"""Command-line surface for the flow pipeline.

Exit codes: 0 success, 2 usage, 3 validation, 4 I/O or file format,
5 numeric (non-finite or out-of-domain values).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import tensorio
from .camera import render_depth
from .encoding import build_edited_encoding, build_encoding
from .headmodel import apply_edit, assemble_target, evaluate_mesh
from .images import write_flow_ppm, write_pgm16
from .meshfiles import write_obj
from .minimodel import make_mini_model
from .validation import NumericError, ValidationError

EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4
EXIT_NUMERIC = 5


def _vector_argument(value: str) -> np.ndarray:
    """Parse an inline JSON array or, failing that, a path to one."""
    text = value
    if not value.lstrip().startswith("["):
        text = Path(value).read_text("utf-8")
    doc = json.loads(text)
    if not isinstance(doc, list):
        raise ValidationError(f"{value}: expected a JSON array of numbers")
    return np.asarray(doc, dtype=np.float64)


def _cmd_gen_test_model(args) -> None:
    assets = make_mini_model(args.seed, args.subdiv)
    out = Path(args.out)
    if out.exists() and not args.force:
        raise OSError(f"{out}: already exists (pass --force to overwrite)")
    tensorio.save_assets(out, assets)


def _cmd_eval_mesh(args) -> None:
    assets = tensorio.load_assets(args.assets)
    params = tensorio.load_params(args.params)
    write_obj(args.out, evaluate_mesh(assets, params))


def _cmd_encode(args) -> None:
    assets = tensorio.load_assets(args.assets)
    src = tensorio.load_params(args.src_params)
    dri = tensorio.load_params(args.dri_params)
    cam = tensorio.load_camera(args.camera)
    cfg, policies = tensorio.load_encode_options(args.config)
    if args.mode is not None:
        cfg = replace(cfg, mode=args.mode)

    kwargs = dict(
        root_policy=policies["root_policy"],
        sf_offset=policies["sf_offset"],
        workers=args.threads,
    )
    if args.delta_theta is not None or args.delta_psi is not None:
        dtheta = (
            _vector_argument(args.delta_theta)
            if args.delta_theta is not None
            else np.zeros_like(dri.theta)
        )
        dpsi = (
            _vector_argument(args.delta_psi)
            if args.delta_psi is not None
            else np.zeros_like(dri.psi)
        )
        enc = build_edited_encoding(assets, src, dri, dtheta, dpsi, cam, cfg, **kwargs)
    else:
        enc = build_encoding(assets, src, dri, cam, cfg, **kwargs)
    tensorio.save_encoding(args.out, enc)

    if args.emit_depth or args.emit_vis:
        tgt_mesh = evaluate_mesh(
            assets,
            # The depth/vis images describe the same target the tensor used.
            _target_params_for_images(src, dri, args, policies),
        )
        if args.emit_depth:
            dmap = render_depth(tgt_mesh, cam)
            write_pgm16(args.emit_depth, dmap.values, far=cam.origin_depth + cfg.d_far)
        if args.emit_vis:
            mid = enc.n_samples // 2
            write_flow_ppm(args.emit_vis, enc.data[:, :, 3 * mid : 3 * mid + 3])


def _target_params_for_images(src, dri, args, policies):
    if args.delta_theta is not None or args.delta_psi is not None:
        dtheta = (
            _vector_argument(args.delta_theta)
            if args.delta_theta is not None
            else np.zeros_like(dri.theta)
        )
        dpsi = (
            _vector_argument(args.delta_psi)
            if args.delta_psi is not None
            else np.zeros_like(dri.psi)
        )
        dri = apply_edit(dri, dtheta, dpsi)
    return assemble_target(src, dri, root_policy=policies["root_policy"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowfield",
        description="Motion-flow conditioning tensors from a parametric head model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-test-model", help="write deterministic synthetic head assets")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--subdiv", type=int, required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--force", action="store_true", help="overwrite an existing output file")
    gen.set_defaults(func=_cmd_gen_test_model)

    ev = sub.add_parser("eval-mesh", help="evaluate parameters to an OBJ mesh")
    ev.add_argument("--assets", required=True)
    ev.add_argument("--params", required=True)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=_cmd_eval_mesh)

    enc = sub.add_parser("encode", help="build a flow-encoding tensor")
    enc.add_argument("--assets", required=True)
    enc.add_argument("--src-params", required=True)
    enc.add_argument("--dri-params", required=True)
    enc.add_argument("--delta-theta", help="pose edit: inline JSON array or a path to one")
    enc.add_argument("--delta-psi", help="expression edit: inline JSON array or a path to one")
    enc.add_argument("--camera", required=True)
    enc.add_argument("--config", required=True)
    enc.add_argument("--out", required=True)
    enc.add_argument("--mode", choices=["depth_guided", "uniform"])
    enc.add_argument("--emit-depth", help="also write the target depth map as 16-bit PGM")
    enc.add_argument("--emit-vis", help="also write a mid-sample flow visualization PPM")
    enc.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("FLOWFIELD_THREADS", "1")),
        help="worker count (output is identical for any value)",
    )
    enc.set_defaults(func=_cmd_encode)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen-test-model" and args.subdiv < 0:
        parser.error("--subdiv must be >= 0")
    if args.command == "encode" and args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        args.func(args)
    except NumericError as exc:
        print(f"flowfield: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValidationError as exc:
        print(f"flowfield: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except json.JSONDecodeError as exc:
        print(f"flowfield: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"flowfield: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
