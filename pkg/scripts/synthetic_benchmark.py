"""Run the synthetic direction benchmark for the 3D and 2D networks and compare them.

    python3 scripts/synthetic_benchmark.py [--runs N] [--seed S] [--out DIR]
"""

import argparse
from pathlib import Path

from stdpvideo.config import parse_config, with_overrides
from stdpvideo.experiment import run_experiment

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/synthetic_benchmark")
    args = ap.parse_args()
    means = {}
    for kind in ("3d", "2d"):
        cfg = parse_config(CONFIGS / f"synthetic_{kind}.ini")
        out = Path(args.out) / kind
        cfg = with_overrides(cfg, seed=args.seed, runs=args.runs, out=str(out))
        report = run_experiment(cfg, out)
        print(f"== {kind} ==")
        print(report.table(), end="")
        means[kind] = report.mean(report.layers[-1])
    print(f"final-layer mean test accuracy: 3D {means['3d']:.2f}%  2D {means['2d']:.2f}%")


if __name__ == "__main__":
    main()
