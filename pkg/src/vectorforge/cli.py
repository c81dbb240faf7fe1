"""Command line entry point: ``vectorforge vectorize | benchmark | interpolate``.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import raster
from .config import RunConfig, coerce, read_config_file
from .fileio import load_raster, save_png, write_svg
from .optimizer import NumericalError
from .pipeline import interpolate, run_oandr
from .report import plot_benchmark, plot_phases, summary_text, write_benchmark_csv, write_metrics_csv

log = logging.getLogger("vectorforge")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# flag -> config key; values arrive as text and go through config.coerce
_RUN_FLAGS = {
    "--shapes": "shapes",
    "--schedule": "schedule",
    "--loss": "loss",
    "--alpha-blend": "alpha_blend",
    "--lambda-geom": "lambda_geom",
    "--lambda-p": "lambda_p",
    "--reduce": "reduce",
    "--reduce-loss": "reduce_loss",
    "--temperature": "temperature",
    "--seed": "seed",
    "--add": "adds",
    "--size": "size",
    "--iters": "total_iters",
    "--min-iters": "min_iters",
    "--max-iters": "max_iters",
    "--rel-improve": "rel_improve_floor",
    "--segments": "segments",
    "--lr-points": "lr_points",
    "--lr-colors": "lr_colors",
}


def _add_run_flags(p: argparse.ArgumentParser, skip=()):
    p.add_argument("--config", help="flat key=value file; flags override it")
    for flag, key in _RUN_FLAGS.items():
        if key not in skip:
            p.add_argument(flag, dest=key, default=None, metavar=key.upper())
    p.add_argument("--exclusive-xor", dest="exclusive_xor", action="store_const", const="true", default=None,
                   help="use p+q-2pq in the intersection term")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vectorforge", description="Raster to compact SVG via Optimize & Reduce.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("vectorize", help="vectorize one image")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--metrics", help="per-phase CSV (default: <output>.metrics.csv)")
    p.add_argument("--summary", help="text summary (default: <output>.summary.txt)")
    p.add_argument("--plot", help="per-phase MSE figure (.png or .svg)")
    _add_run_flags(p)

    p = sub.add_parser("benchmark", help="MSE vs shape count over a directory of images")
    p.add_argument("--dir", required=True)
    p.add_argument("--targets", default="8,16,32,64")
    p.add_argument("--csv", required=True)
    p.add_argument("--plot", required=True)
    _add_run_flags(p, skip=("shapes",))

    p = sub.add_parser("interpolate", help="morph one image's vectorization into another")
    p.add_argument("--from", dest="source", required=True)
    p.add_argument("--to", dest="target", required=True)
    p.add_argument("--frames", type=int, default=5)
    p.add_argument("--outdir", required=True)
    p.add_argument("--strip", help="optional PNG with all frames side by side")
    _add_run_flags(p)
    return parser


def config_from_args(args, **fixed) -> RunConfig:
    updates = {}
    if args.config:
        updates.update(read_config_file(args.config))
    for key in list(_RUN_FLAGS.values()) + ["exclusive_xor"]:
        value = getattr(args, key, None)
        if value is not None:
            updates.update(coerce(key, value))
    updates.update(fixed)
    return RunConfig(**updates)


def _sidecar(output: Path, suffix: str) -> Path:
    return output.with_name(output.stem + suffix)


def cmd_vectorize(args) -> int:
    output = Path(args.output)
    cfg = config_from_args(args, input=args.input, output=args.output)
    target = load_raster(cfg.input, (cfg.width, cfg.height))
    t0 = time.perf_counter()
    try:
        scene, records = run_oandr(target, cfg)
    except NumericalError as exc:
        debug = _sidecar(output, ".nan-debug.svg")
        write_svg(exc.scene, debug)
        log.error("%s; offending scene written to %s", exc, debug)
        return EXIT_NUMERIC
    write_svg(scene, output)
    write_metrics_csv(records, args.metrics or _sidecar(output, ".metrics.csv"))
    summary = summary_text(records, cfg.input)
    Path(args.summary or _sidecar(output, ".summary.txt")).write_text(summary)
    if args.plot:
        plot_phases(records, args.plot)
    print(summary, end="")
    log.info("wrote %s in %.1f s", output, time.perf_counter() - t0)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    folder = Path(args.dir)
    if not folder.is_dir():
        raise FileNotFoundError(f"{folder}: not a directory")
    images = sorted(p for p in folder.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not images:
        raise FileNotFoundError(f"{folder}: no PNG/JPEG images found")
    targets = [int(t) for t in args.targets.split(",") if t.strip()]
    if not targets or min(targets) < 1:
        raise UsageError("--targets must list positive shape counts")
    base = config_from_args(args)
    rows = []
    for image in images:
        target_img = load_raster(image, (base.width, base.height))
        for n in targets:
            cfg = base.replace(shapes=n, input=str(image))
            t0 = time.perf_counter()
            _, records = run_oandr(target_img, cfg)
            final = records[-1]
            row = {"image": image.name, "target": n, **final.row()}
            row["iterations"] = sum(r.iterations for r in records)
            row["seconds"] = time.perf_counter() - t0
            rows.append(row)
            log.info("%s @ %d shapes: mse %.5f", image.name, n, final.mse)
    write_benchmark_csv(rows, args.csv)
    plot_benchmark(rows, args.plot)
    return EXIT_OK


def cmd_interpolate(args) -> int:
    if args.frames < 2:
        raise UsageError("--frames must be >= 2")
    cfg = config_from_args(args, input=args.source)
    native = [load_raster(p, None) for p in (args.source, args.target)]
    if native[0].pixels.shape != native[1].pixels.shape:
        raise ValueError(
            f"{args.source} is {native[0].width}x{native[0].height} but "
            f"{args.target} is {native[1].width}x{native[1].height}"
        )
    source = load_raster(args.source, (cfg.width, cfg.height))
    target = load_raster(args.target, (cfg.width, cfg.height))
    frames = interpolate(source, target, cfg, args.frames)
    outdir = Path(args.outdir)
    for i, scene in enumerate(frames):
        write_svg(scene, outdir / f"frame_{i:03d}.svg")
    if args.strip:
        save_png(np.concatenate([raster.render(s).pixels for s in frames], axis=1), args.strip)
    return EXIT_OK


COMMANDS = {"vectorize": cmd_vectorize, "benchmark": cmd_benchmark, "interpolate": cmd_interpolate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"vectorforge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"vectorforge: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError, KeyError) as exc:
        print(f"vectorforge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"vectorforge: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
