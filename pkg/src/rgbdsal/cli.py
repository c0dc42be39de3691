"""Command-line entry points for the full pipeline."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import config as config_mod
from . import metrics, pipeline, toydata
from .data import IMAGE_EXTS


def _add_common(parser):
    parser.add_argument("--config", type=Path, default=None,
                        help="YAML config file (sections merged over defaults)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--device", type=str, default=None)
    parser.add_argument("--out", type=Path, default=Path("runs"),
                        help="output directory")


def _run_config(args, stage, **extra):
    raw = config_mod.load_config(args.config)
    overrides = {"stage": stage}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.device is not None:
        overrides["device"] = args.device
    if getattr(args, "max_iter", None) is not None:
        overrides["max_iter"] = args.max_iter
    if getattr(args, "ablate", None):
        overrides["ablations"] = tuple(args.ablate)
    overrides.update(extra)
    return config_mod.make_run_config(raw, **overrides)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rgbdsal",
        description="Semi-supervised RGB-D salient object detection")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-toy-data", help="generate a synthetic dataset")
    _add_common(p)
    p.add_argument("--n-labeled", type=int, default=16)
    p.add_argument("--n-unlabeled", type=int, default=16)
    p.add_argument("--size", type=int, default=64)

    p = sub.add_parser("train-depth", help="stage 1: pretrain the depth branch")
    _add_common(p)
    p.add_argument("--data", type=Path, required=True,
                   help="labeled dataset root (rgb/ depth/ gt/)")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--ablate", action="append", default=None)

    p = sub.add_parser("gen-pseudo-depth",
                       help="stage 2: write pseudo depth for unlabeled RGB")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True,
                   help="unlabeled root (rgb/) or a bare image directory")

    p = sub.add_parser("train-semi", help="stage 3: mean-teacher training")
    _add_common(p)
    p.add_argument("--labeled", type=Path, required=True)
    p.add_argument("--unlabeled", type=Path, required=True,
                   help="unlabeled root with rgb/ and pseudo depth/")
    p.add_argument("--init", type=Path, default=None,
                   help="stage-1 checkpoint for initialization")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--ablate", action="append", default=None)

    p = sub.add_parser("train-supervised",
                       help="labeled-only baseline training")
    _add_common(p)
    p.add_argument("--labeled", type=Path, required=True)
    p.add_argument("--init", type=Path, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--ablate", action="append", default=None)

    p = sub.add_parser("infer", help="predict saliency for images")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--rgb", type=Path, required=True,
                   help="an image file or a directory of images")
    p.add_argument("--depth", type=Path, default=None,
                   help="matching depth file/directory (pseudo depth if absent)")

    p = sub.add_parser("eval", help="score predictions against ground truth")
    _add_common(p)
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)

    args = parser.parse_args(argv)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)

    if args.command == "make-toy-data":
        seed = args.seed if args.seed is not None else 0
        counts = toydata.make_toy_data(out, args.n_labeled, args.n_unlabeled,
                                       seed=seed, size=args.size)
        print(f"wrote {counts['labeled']} labeled + "
              f"{counts['unlabeled']} unlabeled scenes under {out}")
        return 0

    if args.command == "train-depth":
        cfg = _run_config(args, "depth_pretrain")
        result = pipeline.train_depth(cfg, args.data, out_dir=out)
        print(f"stage-1 done: final mse={result.trace[-1]:.5f}, "
              f"checkpoint={result.checkpoint}")
        return 0

    if args.command == "gen-pseudo-depth":
        count = pipeline.generate_pseudo_depth(args.checkpoint, args.data, out)
        print(f"wrote {count} pseudo depth maps under {out}")
        return 0

    if args.command == "train-semi":
        cfg = _run_config(args, "semi")
        result = pipeline.train_semi(cfg, args.labeled, args.unlabeled,
                                     out_dir=out, init_from=args.init)
        print(f"stage-3 done: final loss={result.trace[-1]:.5f}, "
              f"checkpoint={result.checkpoint}")
        return 0

    if args.command == "train-supervised":
        cfg = _run_config(args, "supervised_only")
        result = pipeline.train_supervised(cfg, args.labeled, out_dir=out,
                                           init_from=args.init)
        print(f"supervised done: final loss={result.trace[-1]:.5f}, "
              f"checkpoint={result.checkpoint}")
        return 0

    if args.command == "infer":
        rgb = args.rgb
        if rgb.is_dir():
            files = [p for p in sorted(rgb.iterdir())
                     if p.suffix.lower() in IMAGE_EXTS]
            for f in files:
                depth = None
                if args.depth is not None:
                    cand = args.depth / f.name
                    depth = cand if cand.is_file() else None
                pipeline.infer(args.checkpoint, f, depth,
                               out_path=out / f"{f.stem}.png")
            print(f"wrote {len(files)} saliency maps under {out}")
        else:
            pipeline.infer(args.checkpoint, rgb, args.depth,
                           out_path=out / f"{rgb.stem}.png")
            print(f"wrote {out / (rgb.stem + '.png')}")
        return 0

    if args.command == "eval":
        report = metrics.evaluate_dir(args.pred, args.gt,
                                      out_csv=out / "report.csv")
        print(report.table)
        print(f"csv: {out / 'report.csv'}")
        return 0

    parser.error(f"unknown command {args.command!r}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
