"""Command-line interface.

    anchorhdr gen-data --config <file> --out <dir>
    anchorhdr train    --config <file> [--seed N]
    anchorhdr eval     --ckpt <file> --data <manifest> --out <dir> [--config <file>]
    anchorhdr infer    --ckpt <file> --frames <dir> --out <dir> [--format hdr|raw]
    anchorhdr plot     --reports <glob> --out <dir>
"""

from __future__ import annotations

import argparse
import glob
import sys

from .config import load_config


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anchorhdr",
        description="Anchored-exposure HDR video reconstruction toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override train.seed")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset manifest")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True, help="dataset manifest file")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--config", default=None, help="override the embedded config")

    p = sub.add_parser("infer", help="reconstruct HDR frames from a capture directory")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--frames", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", default="hdr", choices=("hdr", "raw"))

    p = sub.add_parser("gen-data", help="render a procedural synthetic dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("plot", help="render figures from evaluation reports")
    p.add_argument("--reports", required=True, help="glob of report.tsv files")
    p.add_argument("--out", required=True)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "train":
        from .training import train

        config = load_config(args.config)
        if args.seed is not None:
            config.train.seed = args.seed
        result = train(config)
        print(result.final_checkpoint)
        return 0

    if args.command == "eval":
        from .evaluation import evaluate_checkpoint

        override = load_config(args.config) if args.config else None
        report_path, _ = evaluate_checkpoint(args.ckpt, args.data, args.out, config=override)
        print(report_path)
        return 0

    if args.command == "infer":
        from .inference import run_inference

        written = run_inference(args.ckpt, args.frames, args.out, fmt=args.format)
        print(f"wrote {len(written)} frames to {args.out}")
        return 0

    if args.command == "gen-data":
        from .datagen import generate_dataset

        config = load_config(args.config)
        manifest = generate_dataset(config, args.out)
        print(manifest)
        return 0

    if args.command == "plot":
        from .plotting import plot_reports

        paths = sorted(glob.glob(args.reports))
        if not paths:
            print(f"no reports match {args.reports!r}", file=sys.stderr)
            return 1
        written = plot_reports(paths, args.out)
        print(f"wrote {len(written)} figures to {args.out}")
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())
