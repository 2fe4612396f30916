"""Command line entry point.

    stdpvideo train --config C [--runs N] [--out D] [--seed S] [--parallel P] [--dump-spikes]
    stdpvideo evaluate --config C --snapshot RUN_DIR [--out D] [--parallel P]
    stdpvideo export-features --config C --snapshot RUN_DIR [--sample I] [--out D]
    stdpvideo generate-synthetic --config C [--out D] [--seed S]

Failures print a message, write ``error.json`` to the output directory and
exit with status 1 (2 for usage errors).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path

from . import classifier
from .config import ExperimentConfig, parse_config, with_overrides


def _common(p: argparse.ArgumentParser, snapshot: bool = False) -> None:
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--out", help="output directory (default: [run] out)")
    p.add_argument("--seed", type=int, help="override [run] seed")
    p.add_argument("--parallel", type=int, help="worker processes for read-only phases")
    if snapshot:
        p.add_argument("--snapshot", required=True,
                       help="run directory written by train (holds network/)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stdpvideo",
                                     description="STDP-trained spiking networks for video")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("train", help="train, extract features and classify")
    _common(p)
    p.add_argument("--runs", type=int, help="independent runs with seeds seed..seed+N-1")
    p.add_argument("--dump-spikes", action="store_true",
                   help="write every encoded sample to OUT/spikes/")
    p = sub.add_parser("evaluate", help="evaluate a trained snapshot")
    _common(p, snapshot=True)
    p = sub.add_parser("export-features", help="write feature-map and filter images")
    _common(p, snapshot=True)
    p.add_argument("--sample", type=int, default=0, help="index into the test split")
    p = sub.add_parser("generate-synthetic", help="write the synthetic dataset as PGM frames")
    _common(p)
    return parser


def _config(args) -> ExperimentConfig:
    cfg = parse_config(args.config)
    return with_overrides(cfg, seed=args.seed, runs=getattr(args, "runs", None),
                          out=args.out, parallel=args.parallel)


def cmd_train(args) -> int:
    from .experiment import run_experiment

    cfg = _config(args)
    out = Path(cfg.run.out)
    report = run_experiment(cfg, out, out / "spikes" if args.dump_spikes else None)
    sys.stdout.write(report.table())
    return 0


def cmd_evaluate(args) -> int:
    from .experiment import Report, _write_confusion, features, prepare_folds
    from .network import load_network

    cfg = _config(args)
    snap = Path(args.snapshot)
    net = load_network(snap / "network")
    classes, _, folds = prepare_folds(cfg)
    out = Path(cfg.run.out)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for fold in folds:
        evals = {s.name: features(net, s.samples, cfg.run.parallel) for s in fold.evals}
        for l in range(len(net.layers)):
            path = snap / f"classifier_layer{l}.txt"
            if not path.exists():
                continue
            model = classifier.load_model(path)
            for split in fold.evals:
                acc, cm = classifier.evaluate(model, evals[split.name][l], split.labels,
                                              len(classes))
                _write_confusion(out / f"confusion_layer{l}_{split.name}.txt", cm, classes)
                records.append({"run": 0, "layer": l + 1, "split": split.name,
                                "accuracy": acc, "n_samples": int(len(split.labels))})
    if not records:
        raise FileNotFoundError(f"no classifier_layer*.txt files in {snap}")
    with open(out / "metrics.jsonl", "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    report = Report(records, tuple(classes))
    (out / "metrics.txt").write_text(report.table())
    sys.stdout.write(report.table())
    return 0


def cmd_export_features(args) -> int:
    from .experiment import export_feature_maps, prepare_folds
    from .layers import export_filter_images
    from .network import load_network

    cfg = _config(args)
    net = load_network(Path(args.snapshot) / "network")
    _, _, folds = prepare_folds(cfg)
    test = folds[0].evals[-1]
    if not 0 <= args.sample < len(test.samples):
        raise IndexError(f"sample {args.sample} outside test split of {len(test.samples)}")
    out = Path(cfg.run.out)
    maps = export_feature_maps(net, test.samples[args.sample], out / "feature_maps")
    filters = []
    for i, layer in enumerate(net.layers):
        filters += export_filter_images(layer, out / "filters", prefix=f"layer{i + 1}")
    print(f"wrote {len(maps)} feature maps and {len(filters)} filter images to {out}")
    return 0


def cmd_generate_synthetic(args) -> int:
    from .datasets import generate_synthetic, materialize, write_manifest
    from .experiment import synthetic_spec

    cfg = _config(args)
    if cfg.dataset.kind != "synthetic":
        raise ValueError("generate-synthetic needs [dataset] kind = synthetic")
    data = generate_synthetic(synthetic_spec(cfg))
    per = cfg.dataset.train_per_class + cfg.dataset.test_per_class
    split = ["train" if i % per < cfg.dataset.train_per_class else "test"
             for i in range(len(data))]
    # subject directories carry the split so the tree loads with a fixed protocol
    subjects = ["01" if s == "train" else "02" for s in split]
    out = Path(cfg.run.out)
    materialize(data, out, subjects)
    write_manifest(out / "manifest.csv",
                   [(f"{subj}/{data.classes[lab]}/{vid}", subj, data.classes[lab], s)
                    for vid, lab, subj, s in zip(data.ids, data.labels, subjects, split)])
    print(f"wrote {len(data)} videos to {out}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "export-features": cmd_export_features,
    "generate-synthetic": cmd_generate_synthetic,
}


def _error_dir(args) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    try:
        return Path(parse_config(args.config).run.out)
    except Exception:
        return Path(".")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except Exception as e:  # every failure leaves a structured record
        record = {"command": args.command, "error": type(e).__name__, "message": str(e),
                  "traceback": traceback.format_exc()}
        line = getattr(e, "line", None)
        if line is not None:
            record["line"] = line
        try:
            d = _error_dir(args)
            d.mkdir(parents=True, exist_ok=True)
            (d / "error.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
        except OSError:
            pass
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
