"""Command-line entry point: `pydegrade <command> ...`."""
import argparse
import logging
import sys
from typing import List, Optional

from pydegrade import interfaces


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pydegrade")
    parser.add_argument("--verbose", action="store_true", help="Log at INFO level")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="Train the networks from a config file")
    train.add_argument("--config", required=True)

    pool = commands.add_parser("extract-pool", help="Build a representation pool from face pairs")
    pool.add_argument("--pairs", required=True, help="Folder with lq/ and hq/ subfolders")
    pool.add_argument("--ckpt", required=True)
    pool.add_argument("--out", required=True)
    pool.add_argument("--augment", type=int, default=0, help="Augmented copies per pair")
    pool.add_argument("--seed", type=int, default=0)

    synth = commands.add_parser("synth-pairs", help="Export degradation-transferred pairs")
    synth.add_argument("--hq", required=True, help="Folder of clean natural PNGs")
    synth.add_argument("--pool", required=True)
    synth.add_argument("--ckpt", required=True)
    synth.add_argument("--scale", type=int, default=1, choices=(1, 2, 4))
    synth.add_argument("--count", type=int, default=100)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--strategy", default="uniform", choices=("uniform", "by_label"))
    synth.add_argument("--out", required=True)

    scenario = commands.add_parser(
        "scenario-pairs", help="Export pairs carrying the degradation of one face region"
    )
    scenario.add_argument("--face-lq", required=True)
    scenario.add_argument("--face-hq", required=True)
    scenario.add_argument("--hq", required=True)
    scenario.add_argument("--ckpt", required=True)
    scenario.add_argument("--copies", type=int, default=16)
    scenario.add_argument("--scale", type=int, default=1, choices=(1, 2, 4))
    scenario.add_argument("--count", type=int, default=100)
    scenario.add_argument("--seed", type=int, default=0)
    scenario.add_argument("--out", required=True)

    clusters = commands.add_parser("cluster-report", help="Fit a linear classifier on a labelled pool")
    clusters.add_argument("--pool", required=True)
    clusters.add_argument("--seed", type=int, default=0)

    evaluate = commands.add_parser("eval", help="PSNR/SSIM of a folder of pairs")
    evaluate.add_argument("--pairs", required=True)
    evaluate.add_argument("--metrics", default="psnr,ssim")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    if args.command == "train":
        result = interfaces.train(args.config, verbose=args.verbose)
        print(f"checkpoint: {result['checkpoint']}")
        print(f"final lr: {result['lr']:g}")
    elif args.command == "extract-pool":
        pool = interfaces.extract_pool(
            args.pairs, args.ckpt, args.out, augment_copies=args.augment, seed=args.seed
        )
        print(f"wrote {len(pool)} representations to {args.out}")
    elif args.command == "synth-pairs":
        manifest = interfaces.synth_pairs(
            args.hq,
            args.pool,
            args.ckpt,
            args.out,
            scale=args.scale,
            count=args.count,
            seed=args.seed,
            strategy=args.strategy,
        )
        print(f"wrote {len(manifest)} pairs to {args.out}")
    elif args.command == "scenario-pairs":
        manifest = interfaces.scenario_pairs(
            args.face_lq,
            args.face_hq,
            args.hq,
            args.ckpt,
            args.out,
            copies=args.copies,
            count=args.count,
            scale=args.scale,
            seed=args.seed,
        )
        print(f"wrote {len(manifest)} pairs to {args.out}")
    elif args.command == "cluster-report":
        result = interfaces.cluster_report(args.pool, seed=args.seed)
        print(f"classifier accuracy: {result.accuracy:.4f}")
        print(f"silhouette: {result.silhouette:.4f}")
        print(result.confusion.to_string())
    elif args.command == "eval":
        metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
        table = interfaces.evaluate(args.pairs, metrics)
        print(table.to_string(index=False))
        if len(table):
            print(table[metrics].mean().to_string())
    return 0


if __name__ == "__main__":
    sys.exit(main())
