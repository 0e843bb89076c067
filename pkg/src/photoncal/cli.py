"""Command-line interface: the whole pipeline as deterministic subcommands.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 calibration
quality failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import calibration, correction, imageio, mosaic, segmentation, simchip
from .errors import CalibrationQualityError, FormatError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_QUALITY = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; we reserve that for data errors
        raise UsageError(message)


def _positive_int(value):
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="photoncal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="build a calibration file from spectra and frame stacks")
    p.add_argument("--spectra", required=True, help="directory of filter spectrum CSVs (lexicographic order, dark first)")
    p.add_argument("--frames", required=True, help="directory with one subdirectory of replicate PNGs per filter setting")
    p.add_argument("--qe-r", required=True, help="red channel QE curve CSV")
    p.add_argument("--qe-g", required=True, help="green channel QE curve CSV")
    p.add_argument("--qe-b", required=True, help="blue channel QE curve CSV")
    p.add_argument("--pattern", default="rggb", choices=sorted(mosaic.BAYER_PATTERNS))
    p.add_argument("--manifest", help="optional file of `spectrum_csv frames_subdir` lines overriding lexicographic order")
    p.add_argument("-o", "--output", required=True, help="output .pcal path")

    p = sub.add_parser("correct", help="convert a raw frame to a photon map")
    p.add_argument("input", help="raw 16-bit grayscale PNG")
    p.add_argument("-c", "--calibration", required=True, help=".pcal file")
    p.add_argument("-o", "--output", required=True, help="output 16-bit PNG (12-bit photon values)")
    p.add_argument("--dump-pmap", help="also write the lossless f64 photon dump here")
    p.add_argument("--scale", default="auto", help="quantization scale: `auto` or a positive float")
    p.add_argument("--workers", type=_positive_int, default=None, help="row-parallel threads (default: cpu count)")

    p = sub.add_parser("demosaic", help="quarter-resolution non-interpolating demosaic")
    p.add_argument("input", help="raw 16-bit grayscale PNG")
    p.add_argument("--pattern", default="rggb", choices=sorted(mosaic.BAYER_PATTERNS))
    p.add_argument("--mode", default="16bit", choices=["16bit", "preview"], help="16-bit RGB PNG or stretched 8-bit preview")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("segment", help="two-class k-means++ thresholding of an RGB image")
    p.add_argument("input", help="RGB PNG (8 or 16 bit)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="label PNG (0/128/255); centroids go to a .txt sidecar")

    p = sub.add_parser("histogram", help="per-channel Bayer-site intensity histogram")
    p.add_argument("input", help="raw 16-bit grayscale PNG")
    p.add_argument("--channel", default="g", choices=["r", "g", "b"])
    p.add_argument("--bins", type=_positive_int, default=256)
    p.add_argument("--pattern", default="rggb", choices=sorted(mosaic.BAYER_PATTERNS))
    p.add_argument("-o", "--output", required=True, help="CSV of bin_start,count")
    p.add_argument("--svg", help="optional SVG bar chart")

    p = sub.add_parser("simulate", help="render synthetic frames and calibration corpora")
    p.add_argument("--scene", required=True, help="scene description file")
    p.add_argument("--chip", required=True, help="chip description file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corpus", help="also render a calibration corpus, e.g. N=6,parallels=6")

    p = sub.add_parser("preview", help="stretch an image to 8 bits for viewing")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("mask", help="zero out everything outside the given shapes")
    p.add_argument("input")
    p.add_argument("--rect", action="append", default=[], metavar="X,Y,W,H", help="keep this rectangle (repeatable)")
    p.add_argument("--poly", action="append", default=[], metavar="X1,Y1,X2,Y2,...", help="keep this polygon (repeatable)")
    p.add_argument("-o", "--output", required=True)
    return parser


def _read_gray16(path) -> imageio.ImageBuffer:
    buf = imageio.read_png(path)
    if buf.channels != 1 or buf.bit_depth != 16:
        raise FormatError(path, f"expected 16-bit grayscale PNG, got {buf.bit_depth}-bit {buf.channels}-channel")
    return buf


def _collect_pngs(directory) -> list[Path]:
    return sorted(Path(directory).glob("*.png"))


def cmd_calibrate(args) -> int:
    spectra_dir, frames_dir = Path(args.spectra), Path(args.frames)
    if args.manifest:
        pairs = []
        for line in Path(args.manifest).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 2:
                raise FormatError(args.manifest, f"expected `spectrum_csv frames_subdir`, got {line!r}")
            pairs.append((spectra_dir / fields[0], frames_dir / fields[1]))
        spectrum_paths = [p[0] for p in pairs]
        stack_dirs = [p[1] for p in pairs]
    else:
        spectrum_paths = sorted(spectra_dir.glob("*.csv"))
        stack_dirs = sorted(d for d in frames_dir.iterdir() if d.is_dir())
    if len(spectrum_paths) < 2:
        raise UsageError(f"need at least 2 filter spectra, found {len(spectrum_paths)} in {spectra_dir}")
    if len(spectrum_paths) != len(stack_dirs):
        raise FormatError(
            str(frames_dir),
            f"{len(spectrum_paths)} spectra but {len(stack_dirs)} frame stacks; these must match",
        )

    spectra = [imageio.read_spectrum_csv(p) for p in spectrum_paths]
    for path, s in zip(spectrum_paths, spectra):
        if s.clamped_count:
            print(f"note: clamped {s.clamped_count} negative samples in {path}")

    stacks = []
    for d in stack_dirs:
        paths = _collect_pngs(d)
        if not paths:
            raise FormatError(str(d), "no replicate PNGs found")
        stacks.append(np.stack([_read_gray16(p).data for p in paths]))
    means = [calibration.mean_frame(s) for s in stacks]

    qe_curves = [imageio.read_spectrum_csv(p) for p in (args.qe_r, args.qe_g, args.qe_b)]
    totals = []
    for name, qe in zip("RGB", qe_curves):
        result = calibration.photon_totals(spectra, qe)
        totals.append(result.values)
        print(f"photon totals {name}: " + " ".join(f"{v:.6g}" for v in result.values))
        if not result.monotone:
            print(f"warning: {name} photon totals are not non-decreasing; check the filter order")
    table = calibration.build_table(np.stack(totals), means, args.pattern)
    calibration.save_table(table, args.output)
    counts = table.validity_counts()
    print(f"pixels: {counts['valid']} valid, {counts['repaired']} repaired, {counts['dead']} dead")
    print(f"wrote {args.output} ({table.width}x{table.height}, {table.n_points} points, pattern {args.pattern})")
    return EXIT_OK


def cmd_correct(args) -> int:
    table = calibration.load_table(args.calibration)
    buf = _read_gray16(args.input)
    workers = args.workers or os.cpu_count() or 1
    pmap = correction.correct(buf.data, table, workers=workers)
    scale = "auto" if args.scale == "auto" else float(args.scale)
    img, used = correction.quantize_12bit(pmap, scale)
    imageio.write_png(img, args.output, text={imageio.PHOTON_SCALE_KEY: repr(used)})
    if args.dump_pmap:
        imageio.write_pmap(pmap.photons, args.dump_pmap)
    counts = pmap.flag_counts()
    print(f"scale {used:.9g}; {counts['ok']} ok, {counts['clamped']} clamped, {counts['dead_source']} dead-source")
    return EXIT_OK


def cmd_demosaic(args) -> int:
    buf = _read_gray16(args.input)
    rgb = mosaic.demosaic(buf.data, args.pattern)
    if args.mode == "16bit":
        out = np.clip(np.floor(rgb.data + 0.5), 0, 0xFFFF).astype(np.uint16)
    else:
        out = correction.preview_8bit(rgb.data)
    imageio.write_png(out, args.output)
    return EXIT_OK


def cmd_segment(args) -> int:
    buf = imageio.read_png(args.input)
    if buf.channels != 3:
        raise FormatError(args.input, f"expected an RGB PNG, got {buf.channels}-channel")
    label_map = segmentation.binarize(buf.data.astype(np.float64), seed=args.seed)
    imageio.write_png(segmentation.labels_to_image(label_map), args.output)
    sidecar = Path(args.output).with_suffix(".txt")
    dark, bright = label_map.centroids
    sidecar.write_text(
        f"seed = {label_map.seed}\n"
        f"centroid_1 = {dark[0]!r} {dark[1]!r} {dark[2]!r}\n"
        f"centroid_2 = {bright[0]!r} {bright[1]!r} {bright[2]!r}\n",
        encoding="utf-8",
    )
    sizes = [int(np.count_nonzero(label_map.labels == v)) for v in (0, 1, 2)]
    print(f"labels: {sizes[0]} excluded, {sizes[1]} class 1, {sizes[2]} class 2; sidecar {sidecar}")
    return EXIT_OK


def cmd_histogram(args) -> int:
    buf = _read_gray16(args.input)
    edges, counts = mosaic.channel_histogram(buf.data, args.channel, args.bins, pattern=args.pattern)
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("bin_start,count\n")
        for start, count in zip(edges[:-1], counts):
            fh.write(f"{float(start)!r},{int(count)}\n")
    if args.svg:
        _write_histogram_svg(edges, counts, args.svg, args.channel)
    print(f"{int(counts.sum())} pixels in {args.bins} bins -> {args.output}")
    return EXIT_OK


def _write_histogram_svg(edges, counts, path, channel) -> None:
    width, height, pad = 640, 240, 10
    peak = max(int(counts.max()), 1)
    n = len(counts)
    bar_w = (width - 2 * pad) / n
    color = {"r": "#c0392b", "g": "#27ae60", "b": "#2980b9"}[channel]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for i, count in enumerate(counts):
        h = (height - 2 * pad) * (int(count) / peak)
        x = pad + i * bar_w
        parts.append(
            f'<rect x="{x:.2f}" y="{height - pad - h:.2f}" width="{bar_w:.2f}" height="{h:.2f}" fill="{color}"/>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts), encoding="utf-8")


def _parse_corpus_option(value) -> dict:
    out = {"n": None, "parallels": 6}
    for item in value.split(","):
        key, _, raw = item.partition("=")
        key = key.strip().lower()
        if key in ("n",):
            out["n"] = int(raw)
        elif key == "parallels":
            out["parallels"] = int(raw)
        else:
            raise UsageError(f"unknown corpus option {key!r}; expected N=...,parallels=...")
    return out


def cmd_simulate(args) -> int:
    chip = simchip.parse_chip_file(args.chip)
    scene = simchip.parse_scene_file(args.scene)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    result = simchip.render(chip, scene, scene.n_settings - 1, seed=args.seed)
    imageio.write_png(result.frame.intensities, out / "frame.png")
    imageio.write_pmap(result.photons.photons, out / "truth.pmap")
    print(f"rendered {chip.width}x{chip.height} frame through open filter -> {out / 'frame.png'}")

    if args.corpus:
        options = _parse_corpus_option(args.corpus)
        corpus = simchip.calibration_corpus(
            chip, scene, options["n"], parallels=options["parallels"], seed=args.seed
        )
        spectra_dir = out / "spectra"
        frames_dir = out / "frames"
        qe_dir = out / "qe"
        for d in (spectra_dir, frames_dir, qe_dir):
            d.mkdir(exist_ok=True)
        for i, spectrum in enumerate(corpus.spectra):
            imageio.write_spectrum_csv(spectrum, spectra_dir / f"ft{i:02d}.csv")
            stack_dir = frames_dir / f"ft{i:02d}"
            stack_dir.mkdir(exist_ok=True)
            for p in range(corpus.frames.stacks[i].shape[0]):
                imageio.write_png(corpus.frames.stacks[i][p], stack_dir / f"rep{p:02d}.png")
        for name, qe in zip(("qe_r", "qe_g", "qe_b"), corpus.qe_curves):
            imageio.write_spectrum_csv(qe, qe_dir / f"{name}.csv")
        n = len(corpus.spectra)
        parallels = corpus.frames.stacks[0].shape[0]
        print(f"corpus: {n} settings x {parallels} parallels -> {frames_dir}, spectra -> {spectra_dir}")
    return EXIT_OK


def cmd_preview(args) -> int:
    buf = imageio.read_png(args.input)
    imageio.write_png(correction.preview_8bit(buf.data), args.output)
    return EXIT_OK


def _parse_floats(raw, what, count=None) -> list[float]:
    try:
        values = [float(v) for v in raw.split(",")]
    except ValueError:
        raise UsageError(f"{what} must be comma-separated numbers, got {raw!r}") from None
    if count is not None and len(values) != count:
        raise UsageError(f"{what} takes {count} numbers, got {len(values)}")
    return values


def cmd_mask(args) -> int:
    if not args.rect and not args.poly:
        raise UsageError("mask needs at least one --rect or --poly")
    buf = imageio.read_png(args.input)
    h, w = buf.data.shape[:2]
    keep = np.zeros((h, w), dtype=bool)
    for raw in args.rect:
        x, y, rw, rh = _parse_floats(raw, "--rect", 4)
        keep[int(y) : int(y + rh), int(x) : int(x + rw)] = True
    for raw in args.poly:
        flat = _parse_floats(raw, "--poly")
        if len(flat) < 6 or len(flat) % 2:
            raise UsageError("--poly needs at least 3 x,y pairs")
        keep |= _polygon_mask((h, w), flat)
    out = buf.data.copy()
    out[~keep] = 0
    imageio.write_png(imageio.ImageBuffer(out, dict(buf.text)), args.output)
    print(f"kept {int(keep.sum())} of {h * w} pixels")
    return EXIT_OK


def _polygon_mask(shape, flat) -> np.ndarray:
    """Even-odd rasterization of a polygon given as x1,y1,x2,y2,..."""
    xs = np.array(flat[0::2])
    ys = np.array(flat[1::2])
    h, w = shape
    px = np.arange(w)[None, :] + 0.0
    py = np.arange(h)[:, None] + 0.0
    inside = np.zeros(shape, dtype=bool)
    n = len(xs)
    for i in range(n):
        x0, y0 = xs[i], ys[i]
        x1, y1 = xs[(i + 1) % n], ys[(i + 1) % n]
        if y0 == y1:
            continue
        crosses = ((py >= min(y0, y1)) & (py < max(y0, y1)))
        x_at = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (px < x_at)
    return inside


_COMMANDS = {
    "calibrate": cmd_calibrate,
    "correct": cmd_correct,
    "demosaic": cmd_demosaic,
    "segment": cmd_segment,
    "histogram": cmd_histogram,
    "simulate": cmd_simulate,
    "preview": cmd_preview,
    "mask": cmd_mask,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CalibrationQualityError as exc:
        print(f"calibration quality error: {exc}", file=sys.stderr)
        return EXIT_QUALITY
    except (FormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
