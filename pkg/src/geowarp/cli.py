"""Command-line interface: a thin shell over the library.

Every subcommand's result equals the corresponding library call exactly.
Exit codes: 0 success, 2 usage error, 3 I/O or file-format error,
4 algorithmic failure (insufficient data, unidentifiable flow, generation
failure).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import flowio
from .apps import exaggerate, transfer
from .core import DimensionMismatch, epe
from .fitting import (
    DEFAULT_CELLS,
    FitResult,
    InsufficientData,
    Unidentifiable,
    hough_fit,
    identify_model,
    refine_flow,
)
from .models import DistortionType
from .resampler import ResampleOptions, _solve_points, resample
from .synthesizer import GenerationFailure, generate_dataset

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_ALGORITHM = 4


def _fit_to_dict(fit: FitResult) -> dict:
    return {
        "type": fit.type.value,
        "rho": list(fit.rho),
        "votes": fit.votes,
        "inlierFraction": fit.inlier_fraction,
        "refitEpe": fit.refit_epe,
    }


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"size must look like 256x256, got {text!r}") from exc


def _parse_type(text: str) -> DistortionType:
    try:
        return DistortionType(text.lower())
    except ValueError as exc:
        names = ", ".join(t.value for t in DistortionType)
        raise argparse.ArgumentTypeError(f"unknown type {text!r}; pick one of {names}") from exc


def _cmd_epe(args) -> int:
    a = flowio.read_flow(args.a)
    b = flowio.read_flow(args.b)
    print(epe(a, b))
    return EXIT_OK


def _cmd_fit(args) -> int:
    flow = flowio.read_flow(args.flow)
    if args.auto:
        fit = identify_model(flow, cells=args.cells)[0]
    else:
        fit = hough_fit(flow, args.type, cells=args.cells)
    if args.refined_out:
        flowio.write_flow(args.refined_out, refine_flow(fit, flow.width, flow.height))
    print(json.dumps(_fit_to_dict(fit), indent=2))
    return EXIT_OK


def _cmd_identify(args) -> int:
    flow = flowio.read_flow(args.flow)
    ranked = identify_model(flow, cells=args.cells)
    print(json.dumps([_fit_to_dict(f) for f in ranked], indent=2))
    return EXIT_OK


def _cmd_correct(args) -> int:
    image = flowio.read_image(args.image)
    flow = flowio.read_flow(args.flow)
    if args.refine:
        if args.type is not None:
            fit = hough_fit(flow, args.type)
        else:
            fit = identify_model(flow)[0]
        flow = refine_flow(fit, image.width, image.height)
    opts = ResampleOptions(
        max_iterations=args.max_iter,
        tolerance=args.tol,
        use_derivative_init=not args.no_deriv_init,
        boundary=args.boundary,
    )
    corrected, report = resample(image, flow, opts)
    flowio.write_image(args.out, corrected)
    payload = json.dumps(report.summary(), indent=2)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(payload + "\n")
    else:
        print(payload, file=sys.stderr)
    return EXIT_OK


def _cmd_resample_bench(args) -> int:
    flow = flowio.read_flow(args.flow)
    h, w = flow.height, flow.width
    gx, gy = np.meshgrid(np.arange(w, dtype=np.intp), np.arange(h, dtype=np.intp))
    qx, qy = gx.ravel(), gy.ravel()
    ref_opts = ResampleOptions(max_iterations=100, tolerance=1e-10)
    rx, ry, _, _ = _solve_points(flow, qx, qy, ref_opts)

    writer = csv.writer(sys.stdout)
    writer.writerow(["iterations", "epeDerivInit", "fracConvergedDerivInit",
                     "epePlainInit", "fracConvergedPlainInit"])
    for n in range(1, args.levels + 1):
        row = [n]
        for deriv in (True, False):
            opts = ResampleOptions(max_iterations=n, tolerance=args.tol,
                                   use_derivative_init=deriv)
            px, py, _, conv = _solve_points(flow, qx, qy, opts)
            row.append(float(np.hypot(px - rx, py - ry).mean()))
            row.append(float(conv.mean()))
        writer.writerow(row)
    return EXIT_OK


def _cmd_transfer(args) -> int:
    ref = flowio.read_flow(args.ref_flow)
    target = flowio.read_image(args.target)
    flowio.write_image(args.out, transfer(ref, target))
    return EXIT_OK


def _cmd_exaggerate(args) -> int:
    image = flowio.read_image(args.image)
    flow = flowio.read_flow(args.flow)
    flowio.write_image(args.out, exaggerate(image, flow, args.gain))
    return EXIT_OK


def _cmd_synth(args) -> int:
    types = tuple(args.types) if args.types else tuple(DistortionType)
    manifest = generate_dataset(
        source_dir=args.src,
        out_dir=args.out,
        per_type_count=args.count,
        types=types,
        seed=args.seed,
        size=args.size,
    )
    print(json.dumps({"records": len(manifest.records), "out": args.out}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geowarp",
        description="Synthesize, fit, and correct parametric geometric image distortions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("epe", help="mean endpoint error between two flow files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=_cmd_epe)

    p = sub.add_parser("fit", help="fit one distortion family to a flow file")
    p.add_argument("--flow", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--type", type=_parse_type)
    group.add_argument("--auto", action="store_true")
    p.add_argument("--cells", type=int, default=DEFAULT_CELLS)
    p.add_argument("--refined-out", help="also write the fitted model's regenerated flow")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("identify", help="rank all six families against a flow file")
    p.add_argument("--flow", required=True)
    p.add_argument("--cells", type=int, default=DEFAULT_CELLS)
    p.set_defaults(func=_cmd_identify)

    p = sub.add_parser("correct", help="resample an image through its forward flow")
    p.add_argument("--image", required=True)
    p.add_argument("--flow", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--refine", action="store_true",
                   help="Hough-fit the flow and resample through the regenerated model flow")
    p.add_argument("--type", type=_parse_type,
                   help="distortion family for --refine (default: identify automatically)")
    p.add_argument("--max-iter", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--no-deriv-init", action="store_true")
    p.add_argument("--boundary", choices=("mark-invalid", "clamp"), default="mark-invalid")
    p.add_argument("--report", help="write the convergence report JSON here instead of stderr")
    p.set_defaults(func=_cmd_correct)

    p = sub.add_parser("resample-bench",
                       help="per-iteration solver error table (CSV on stdout)")
    p.add_argument("--flow", required=True)
    p.add_argument("--levels", type=int, default=15)
    p.add_argument("--tol", type=float, default=1e-3)
    p.set_defaults(func=_cmd_resample_bench)

    p = sub.add_parser("transfer", help="apply a reference flow to another image")
    p.add_argument("--ref-flow", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_transfer)

    p = sub.add_parser("exaggerate", help="resample through a gain-scaled flow")
    p.add_argument("--image", required=True)
    p.add_argument("--flow", required=True)
    p.add_argument("--gain", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_exaggerate)

    p = sub.add_parser("synth", help="generate a distorted-image/flow dataset")
    p.add_argument("--src", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=1, help="samples per distortion type")
    p.add_argument("--types", type=_parse_type, nargs="*")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=_parse_size, default=(256, 256))
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (flowio.FlowFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InsufficientData, Unidentifiable, GenerationFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ALGORITHM
    except (DimensionMismatch, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
