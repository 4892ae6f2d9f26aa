"""Command-line interface: scene validation, mask filtering, single-image
transmission, grid sweeps, metric computation, and fixture generation."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .filtering import Mask
from .formats import (
    format_cell,
    parse_criteria,
    read_mask,
    read_ppm,
    read_segmentation,
    write_mask,
    write_ppm,
)
from .metrics import psnr, tc_psnr
from .pipeline import (
    SCHEMES,
    image_id_for,
    load_annotation,
    load_manifest,
    load_scene,
    load_sweep_config,
    render_rd_svg,
    run_trial,
)
from .scene import validate_scene
from .synth import gen_synthetic, parse_synthetic_spec

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def _cmd_validate(args) -> int:
    any_invalid = False
    for ann_path in load_manifest(args.manifest):
        try:
            record = load_annotation(ann_path)
            img = read_ppm(ann_path.parent / record.image_path)
            seg = read_segmentation(ann_path.parent / record.seg_path, record.class_table)
            report = validate_scene(record.to_scene_graph(), seg, img)
            if (record.width, record.height) != (img.width, img.height):
                print(
                    f"{ann_path}: INVALID dimension-mismatch: annotation declares "
                    f"{record.width}x{record.height}, image is {img.width}x{img.height}"
                )
                any_invalid = True
            elif report.ok:
                print(f"{ann_path}: OK")
            else:
                for issue in report.issues:
                    print(f"{ann_path}: INVALID {issue.kind}: {issue.detail}")
                any_invalid = True
        except ValueError as exc:
            print(f"{ann_path}: INVALID {exc}")
            any_invalid = True
    return EXIT_VALIDATION if any_invalid else EXIT_OK


def _cmd_filter(args) -> int:
    record = load_annotation(Path(args.annotation))
    criteria = parse_criteria(Path(args.criteria).read_text(encoding="utf-8"))
    img, seg, sg = load_scene(record, Path(args.annotation).parent)
    masked, m_t = pipeline.build_task_mask(img, seg, sg, criteria)
    if args.out_mask:
        write_mask(m_t, args.out_mask)
    if args.out_image:
        write_ppm(masked, args.out_image)
    print(f"task mask covers {m_t.popcount} of {img.width * img.height} pixels")
    return EXIT_OK


def _cmd_transmit(args) -> int:
    record = load_annotation(Path(args.annotation))
    criteria = parse_criteria(Path(args.criteria).read_text(encoding="utf-8"))
    img, seg, sg = load_scene(record, Path(args.annotation).parent)
    result, recon = run_trial(
        img,
        seg,
        sg,
        criteria,
        image_id_for(record),
        args.scheme,
        args.eta,
        args.snr,
        args.seed,
    )
    if args.out:
        write_ppm(recon, args.out)
    print(
        f"image_id={result.image_id} scheme={result.scheme} eta={result.eta:g} "
        f"snr_db={result.snr_db:g} payload_symbols={result.payload_symbols} "
        f"side_symbol_equiv={result.side_symbol_equiv} cbr={format_cell(result.cbr)} "
        f"psnr_db={format_cell(result.psnr_db)} tc_psnr_db={format_cell(result.tc_psnr_db)}"
    )
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = load_sweep_config(args.config)
    rows = pipeline.sweep(cfg)
    failures = sum(1 for row in rows if row.get("error"))
    print(f"wrote {len(rows)} rows to {cfg.output_path} ({failures} failed trials)")
    if args.svg:
        render_rd_svg(rows, args.svg)
        print(f"wrote chart to {args.svg}")
    return EXIT_OK


def _cmd_metrics(args) -> int:
    ref = read_ppm(args.reference)
    rec = read_ppm(args.reconstruction)
    print(f"psnr_db={format_cell(psnr(ref, rec))}")
    if args.mask:
        mask: Mask = read_mask(args.mask)
        print(f"tc_psnr_db={format_cell(tc_psnr(ref, rec, mask))}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    spec = parse_synthetic_spec(Path(args.spec).read_text(encoding="utf-8"))
    generated = gen_synthetic(spec, args.out_dir)
    print(f"wrote {generated.image_path}, {generated.seg_path}, {generated.annotation_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inscomsim",
        description=(
            "Simulate instance-filtered image transmission over a noisy channel "
            "and measure rate--distortion performance."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate every annotation in a manifest")
    p.add_argument("manifest", help="JSON array of annotation paths")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("filter", help="write the task mask and masked image")
    p.add_argument("annotation")
    p.add_argument("criteria")
    p.add_argument("--out-mask", metavar="PGM")
    p.add_argument("--out-image", metavar="PPM")
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("transmit", help="run one end-to-end trial")
    p.add_argument("annotation")
    p.add_argument("criteria")
    p.add_argument("--scheme", choices=SCHEMES, default="inscom")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="PPM", help="write the reconstruction here")
    p.set_defaults(func=_cmd_transmit)

    p = sub.add_parser("sweep", help="run a trial grid from a JSON config")
    p.add_argument("config")
    p.add_argument("--svg", metavar="SVG", help="also write a rate-distortion chart")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("metrics", help="compare two images")
    p.add_argument("reference")
    p.add_argument("reconstruction")
    p.add_argument("--mask", metavar="PGM", help="restrict a second PSNR to these pixels")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("synth", help="generate a synthetic fixture scene")
    p.add_argument("spec")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
