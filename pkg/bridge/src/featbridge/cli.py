"""Command-line interface.

One verb: extract. Converts a directory of images into binary feature
files plus a manifest (a loadable map by default, a shift-evaluation
dataset with --dataset-layout 9view). Prints one line per image with its
feature count; per-image failures go to stderr and turn the exit status
nonzero while the remaining images are still processed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .detector import DetectorConfig
from .extract import ExtractConfig, extract_directory


def _cmd_extract(args) -> int:
    config = ExtractConfig(
        resize_px=args.resize,
        model=args.model,
        layout="9view" if args.dataset_layout else "sequence",
        focal_length_px=args.focal_px,
        spacing_m=args.spacing,
        lateral_step_m=args.lateral_step,
        yaw_step_deg=args.yaw_step_deg,
        detector=DetectorConfig(max_features=args.max_features),
    )
    report = extract_directory(args.input, args.out, config)
    for record in report.records:
        print(f"{record.image}: {record.feature_count} features "
              f"-> {record.feature_file}")
    print(f"manifest: {report.manifest_path}")
    for err in report.errors:
        print(f"error: {err}", file=sys.stderr)
    return 0 if report.complete else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featbridge",
        description="Extract image features into repeatnav-compatible "
                    "feature files and manifests.")
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract",
                        help="convert a directory of images to feature files")
    ex.add_argument("--input", type=Path, required=True,
                    help="directory of images")
    ex.add_argument("--out", type=Path, required=True,
                    help="output directory for feature files and manifest")
    ex.add_argument("--resize", type=int, default=336,
                    help="square resize applied before extraction (px)")
    ex.add_argument("--dataset-layout", choices=("9view",), default=None,
                    help="treat input stems as pos_<P>_view_<V> and emit "
                         "a shift-evaluation dataset manifest")
    ex.add_argument("--model", default="dog",
                    help="'dog' or an external 'module:function' detector")
    ex.add_argument("--max-features", type=int, default=500,
                    help="cap on keypoints kept per image")
    ex.add_argument("--focal-px", type=float, default=400.0,
                    help="focal length recorded in the manifest (px)")
    ex.add_argument("--spacing", type=float, default=1.0,
                    help="nominal arc length between map keyframes (m)")
    ex.add_argument("--lateral-step", type=float, default=0.36,
                    help="9view lateral grid step (m)")
    ex.add_argument("--yaw-step-deg", type=float, default=15.0,
                    help="9view yaw grid step (degrees)")
    ex.set_defaults(func=_cmd_extract)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
