"""Command-line entry point: ``splatcodec {encode,decode,info,metrics,bench,lod}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import codec
from .bsp import bench_render, build_partition, format_bench, render_image_blocked
from .fit import FitAborted, FitConfig, fit
from .gaussian import InvalidParameterError
from .metrics import psnr, ssim
from .optim import NonFiniteGradientError
from .raster import UnsupportedFormatError, load_image, save_image
from .render import render_image

logger = logging.getLogger("splatcodec")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_FIT = 5
EXIT_INVALID = 6


def _nmax_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad n_max list {text!r}") from exc
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("n_max values must be positive integers")
    return values


def _write_igs2(path: Path, gs, nmax: int, width: int, height: int, k: int) -> bytes:
    data = codec.encode(gs, build_partition(gs, nmax), width, height, k)
    path.write_bytes(data)
    return data


def cmd_encode(args) -> int:
    img = load_image(args.input)
    h, w = img.shape[:2]
    cfg = FitConfig(
        budget=args.gaussians,
        k=args.k,
        lambda_init=args.lambda_init,
        lambda_opt=args.lambda_opt,
        iterations=args.iters,
        samples_per_iter=args.samples,
        eval_interval=args.eval_interval,
        warmup_iters=args.warmup,
        densify_interval=args.densify_interval,
        seed=args.seed,
    )
    report_fh = open(args.report, "w") if args.report else None
    try:
        def on_eval(rec):
            if report_fh is not None:
                report_fh.write(rec.to_json() + "\n")
                report_fh.flush()

        gs, report = fit(img, cfg, on_eval=on_eval)
    finally:
        if report_fh is not None:
            report_fh.close()

    data = _write_igs2(Path(args.output), gs, args.nmax, w, h, args.k)
    if args.lod_dir:
        lod_dir = Path(args.lod_dir)
        lod_dir.mkdir(parents=True, exist_ok=True)
        for ckpt in report.checkpoints:
            _write_igs2(lod_dir / f"{ckpt.name}.igs2", ckpt.gaussians, args.nmax, w, h, args.k)
    final = report.final
    print(f"wrote {args.output}: {len(gs)} Gaussians, {len(data)} bytes, "
          f"PSNR {final.psnr:.3f} dB, SSIM {final.ssim:.4f}")
    return EXIT_OK


def cmd_decode(args) -> int:
    dec = codec.decode(Path(args.input).read_bytes())
    width = args.width or dec.width
    height = args.height or dec.height
    if dec.partition is not None and not args.no_accel:
        img = render_image_blocked(dec.gaussians, dec.partition, width, height, dec.k)
    else:
        img = render_image(dec.gaussians, width, height, dec.k)
    save_image(img, args.output, bitdepth=args.bitdepth)
    return EXIT_OK


def cmd_info(args) -> int:
    data = Path(args.input).read_bytes()
    h = codec.read_header(data)
    codec.decode(data)
    rep = codec.size_report(h["n_g"], h["n_b"], h["width"], h["height"])
    print(f"version        {h['version']}")
    print(f"k              {h['k']}")
    print(f"resolution     {h['width']}x{h['height']}")
    print(f"gaussians      {h['n_g']}")
    print(f"blocks         {h['n_b']}")
    print(f"header bytes   {rep.header_bytes}")
    print(f"payload bytes  {rep.payload_bytes} ({rep.payload_kb:.3f} KB)")
    print(f"block bytes    {rep.block_bytes}")
    print(f"total bytes    {rep.total_bytes}")
    print(f"bpp            {rep.bpp:.3f}")
    return EXIT_OK


def _fmt(x: float) -> str:
    return str(round(float(x), 6))


def cmd_metrics(args) -> int:
    ref = load_image(args.ref)
    test = load_image(args.test)
    print(f"PSNR {_fmt(psnr(ref, test))}, SSIM {_fmt(ssim(ref, test))}")
    return EXIT_OK


def cmd_bench(args) -> int:
    dec = codec.decode(Path(args.input).read_bytes())
    rows = bench_render(dec.gaussians, args.pixels, args.nmax_list, k=dec.k,
                        trials=args.trials, seed=args.seed)
    print(f"{len(dec.gaussians)} Gaussians, {args.pixels} pixels, ms per 10k pixels")
    print(format_bench(rows))
    return EXIT_OK


def cmd_lod(args) -> int:
    files = sorted(Path(args.dir).glob("*.igs2"), key=lambda p: (len(p.name), p.name))
    if not files:
        print(f"no .igs2 files in {args.dir}", file=sys.stderr)
        return EXIT_IO
    print(f"{'file':<24} {'gaussians':>9} {'blocks':>6} {'payload_B':>10} {'bpp':>7}")
    for f in files:
        dec = codec.decode(f.read_bytes())
        rep = codec.size_report(len(dec.gaussians), 0 if dec.partition is None else dec.partition.n_blocks,
                                dec.width, dec.height)
        print(f"{f.name:<24} {len(dec.gaussians):>9d} {rep.n_blocks:>6d} {rep.payload_bytes:>10d} {rep.bpp:>7.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splatcodec", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="fit Gaussians to a PNG and write an IGS2 file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--gaussians", type=int, required=True, help="Gaussian budget N_g (>= 8)")
    p.add_argument("--iters", type=int, default=50_000)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--lambda-init", type=float, default=0.3)
    p.add_argument("--lambda-opt", type=float, default=0.8)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nmax", type=int, default=64, help="max Gaussians per BSP block")
    p.add_argument("--lod-dir", help="write one IGS2 checkpoint per densification stage here")
    p.add_argument("--report", help="write the per-evaluation log (JSON lines) here")
    p.add_argument("--warmup", type=int, default=10_000, help="iterations before the first densification")
    p.add_argument("--densify-interval", type=int, default=5_000)
    p.add_argument("--eval-interval", type=int, default=1_000)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="render an IGS2 file to PNG")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--width", type=int, help="defaults to the stored resolution")
    p.add_argument("--height", type=int, help="defaults to the stored resolution")
    p.add_argument("--no-accel", action="store_true", help="ignore the BSP blocks")
    p.add_argument("--bitdepth", type=int, choices=(8, 16), default=8)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("info", help="print header fields and size accounting")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("metrics", help="PSNR and SSIM between two PNGs")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", help="time the blocked renderer for several n_max values")
    p.add_argument("--input", required=True)
    p.add_argument("--pixels", type=int, default=10_000)
    p.add_argument("--nmax-list", type=_nmax_list, default=_nmax_list("1024,256,128,64,43"))
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("lod", help="list the checkpoints in a LoD directory")
    p.add_argument("--dir", required=True)
    p.set_defaults(func=cmd_lod)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (codec.CodecError, UnsupportedFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FitAborted, NonFiniteGradientError, InvalidParameterError) as exc:
        print(f"error: fit aborted: {exc}", file=sys.stderr)
        return EXIT_FIT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
