"""Experiment runner: data, encoding, layer-wise training, features, classifier, artifacts.

Output directory layout::

    out/config.ini                 resolved config (every default written)
    out/metrics.jsonl              one record per (run, layer, split)
    out/metrics.txt                the same as a table plus per-layer means
    out/run{r}/network/            layer snapshots and manifest
    out/run{r}/confusion_layer{l}_{split}.txt
    out/run{r}/classifier_layer{l}.txt
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import classifier
from .config import ExperimentConfig, dumps_config
from .datasets import (LabeledVideos, SplitProtocol, SyntheticSpec, generate_synthetic,
                       load_frame_dataset, split_manifest_rows, write_manifest)
from .encoding import encode_sample
from .events import SpikeTensor, dump_spikes
from .layers import conv_forward, output_shape, pool_forward
from .network import (Network, NetworkSpec, TrainPlan, block_features, build_spec,
                      network_inputs, save_network, train_layerwise)
from .pgm import write_pgm
from .plasticity import StdpParams, ThresholdParams

log = logging.getLogger(__name__)


@dataclass
class Split:
    """Encoded samples of one split with their labels."""
    name: str
    samples: list[SpikeTensor]
    labels: np.ndarray
    ids: list[str] = field(default_factory=list)


@dataclass
class Fold:
    name: str  # "" for a single train/test split, "fold07" for leave-one-out
    train: Split
    evals: list[Split]  # evaluated splits, test last


# -- data ---------------------------------------------------------------------

def synthetic_spec(cfg: ExperimentConfig) -> SyntheticSpec:
    d = cfg.dataset
    return SyntheticSpec(d.classes, d.width, d.height, d.frames, d.thickness, d.speed,
                         d.noise, d.train_per_class + d.test_per_class, d.seed)


def load_videos(cfg: ExperimentConfig):
    """Raw videos grouped per fold: ``(classes, [(fold_name, {split: LabeledVideos})])``."""
    d, e = cfg.dataset, cfg.encoding
    if d.kind == "synthetic":
        data = generate_synthetic(synthetic_spec(cfg))
        per = d.train_per_class + d.test_per_class
        pos = np.arange(len(data)) % per
        splits = {"train": data.subset(np.flatnonzero(pos < d.train_per_class)),
                  "test": data.subset(np.flatnonzero(pos >= d.train_per_class))}
        return data.classes, [("", splits)]
    if d.protocol == "kth":
        protocol = SplitProtocol("fixed", d.train_subjects, d.val_subjects, d.test_subjects)
    else:
        protocol = SplitProtocol("leave-one-out", (), (), ())
    loaded = load_frame_dataset(d.root, protocol, e.frames_per_video, e.skip, e.half_scale)
    if isinstance(loaded, dict):
        return loaded["train"].classes, [("", loaded)]
    return (loaded[0]["train"].classes,
            [(f"fold{f['subject']:02d}", {"train": f["train"], "test": f["test"]})
             for f in loaded])


def _encode_one(args):
    video, dog, coding, bs = args
    return encode_sample(video, dog, coding, bs)


def _pmap(fn, items: Sequence, parallel: int) -> list:
    if parallel <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=parallel) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * parallel))))


def encode_videos(cfg: ExperimentConfig, data: LabeledVideos, name: str) -> Split:
    e = cfg.encoding
    args = [(v, e.dog, e.coding, e.background_subtraction) for v in data.videos]
    return Split(name, _pmap(_encode_one, args, cfg.run.parallel), np.asarray(data.labels),
                 list(data.ids))


def prepare_folds(cfg: ExperimentConfig):
    classes, groups = load_videos(cfg)
    folds = []
    for name, splits in groups:
        train = encode_videos(cfg, splits["train"], "train")
        evals = [encode_videos(cfg, splits[s], s) for s in ("val", "test") if s in splits]
        folds.append(Fold(name, train, evals))
    return classes, groups, folds


# -- network ------------------------------------------------------------------

def network_spec(cfg: ExperimentConfig, sample_shape) -> NetworkSpec:
    """Network spec for encoded samples of shape ``sample_shape`` (w, h, td, c)."""
    a, p = cfg.architecture, cfg.plasticity
    in_shape = tuple(sample_shape)
    if a.kind == "2d":
        in_shape = (in_shape[0], in_shape[1], 1, in_shape[3])
    pools = list(zip(a.per_layer("pool"), a.per_layer("pool_stride")))
    stdp = StdpParams(p.eta_w, p.tau_stdp, absent_pre=p.absent_pre)
    th = ThresholdParams(a.t_obj[0], p.eta_th, p.th_min, p.th_init_mean, p.th_init_std)
    return build_spec(a.kind, in_shape, a.filters, a.per_layer("kernel"),
                      a.per_layer("conv_stride"), pools, a.t_obj, stdp, th,
                      a.feature_grid, a.inference_wta, a.wta_rule)


_WORKER_NET: Optional[Network] = None


def _init_worker(net):
    global _WORKER_NET
    _WORKER_NET = net


def _features_one(sample):
    return block_features(_WORKER_NET, sample)


def features(net: Network, samples: Sequence[SpikeTensor], parallel: int = 1) -> list[np.ndarray]:
    """Per-layer feature matrices ``(n_samples, dim_l)``."""
    if parallel <= 1 or len(samples) < 2:
        per_sample = [block_features(net, s) for s in samples]
    else:
        with ProcessPoolExecutor(max_workers=parallel, initializer=_init_worker,
                                 initargs=(net,)) as ex:
            per_sample = list(ex.map(_features_one, samples,
                                     chunksize=max(1, len(samples) // (4 * parallel))))
    n_layers = len(net.layers)
    return [np.array([f[l] for f in per_sample], dtype=np.float64) for l in range(n_layers)]


# -- runs ---------------------------------------------------------------------

def _write_confusion(path: Path, cm: np.ndarray, classes: Sequence[str]) -> None:
    lines = ["true\\pred " + " ".join(classes)]
    for name, row in zip(classes, cm):
        lines.append(name + " " + " ".join(str(int(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")


def run_once(cfg: ExperimentConfig, fold: Fold, classes, run: int, out_dir: Path) -> list[dict]:
    """Train one network on ``fold`` and evaluate every requested layer."""
    seed = cfg.run.seed + run
    spec = network_spec(cfg, fold.train.samples[0].shape)
    plan = TrainPlan(cfg.architecture.epochs, True, seed)
    net = train_layerwise(spec, network_inputs(spec.kind, fold.train.samples), plan)
    run_dir = out_dir / (f"run{run}" + (f"_{fold.name}" if fold.name else ""))
    save_network(net, run_dir / "network")
    par = cfg.run.parallel
    f_train = features(net, fold.train.samples, par)
    f_eval = {s.name: features(net, s.samples, par) for s in fold.evals}
    layers = range(len(net.layers)) if cfg.run.report_each_layer else [len(net.layers) - 1]
    svm_cfg = classifier.SvmTrainConfig(cfg.classifier.lam, cfg.classifier.epochs,
                                        cfg.classifier.eta0, seed)
    records = []
    for l in layers:
        model = classifier.fit(f_train[l], fold.train.labels, svm_cfg, n_classes=len(classes))
        classifier.save_model(model, run_dir / f"classifier_layer{l}.txt")
        for split in fold.evals:
            acc, cm = classifier.evaluate(model, f_eval[split.name][l], split.labels, len(classes))
            _write_confusion(run_dir / f"confusion_layer{l}_{split.name}.txt", cm, classes)
            rec = {"run": run, "layer": l + 1, "split": split.name, "accuracy": acc,
                   "n_samples": int(len(split.labels))}
            if fold.name:
                rec["fold"] = fold.name
            records.append(rec)
            log.info("run %d %s layer %d %s: %.2f%%", run, fold.name, l + 1, split.name, acc)
    return records


@dataclass
class Report:
    records: list[dict]
    classes: tuple[str, ...]

    def accuracies(self, layer: int, split: str = "test") -> list[float]:
        """Per-run accuracy (averaged over folds for leave-one-out)."""
        by_run: dict[int, list[float]] = {}
        for r in self.records:
            if r["layer"] == layer and r["split"] == split:
                by_run.setdefault(r["run"], []).append(r["accuracy"])
        return [float(np.mean(v)) for _, v in sorted(by_run.items())]

    def mean(self, layer: int, split: str = "test") -> float:
        return float(np.mean(self.accuracies(layer, split)))

    @property
    def layers(self) -> list[int]:
        return sorted({r["layer"] for r in self.records})

    @property
    def splits(self) -> list[str]:
        return sorted({r["split"] for r in self.records})

    def table(self) -> str:
        runs = sorted({r["run"] for r in self.records})
        head = ["split", "layer"] + [f"run{r}" for r in runs] + ["mean"]
        rows = [head]
        for split in self.splits:
            for layer in self.layers:
                accs = self.accuracies(layer, split)
                rows.append([split, f"Cnv{layer}"] + [f"{a:.2f}" for a in accs]
                            + [f"{np.mean(accs):.2f}"])
        widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
        return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
                         for r in rows) + "\n"


def run_experiment(cfg: ExperimentConfig, out_dir=None, dump_spikes_dir=None) -> Report:
    out = Path(out_dir if out_dir is not None else cfg.run.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(dumps_config(cfg))
    classes, groups, folds = prepare_folds(cfg)
    if cfg.dataset.kind == "frames":
        rows = split_manifest_rows(groups[0][1] if len(groups) == 1 else
                                   [{"subject": int(n[4:]), "test": s["test"]} for n, s in groups])
        write_manifest(out / "splits.csv", rows)
    if dump_spikes_dir is not None:
        write_spike_dumps(folds, Path(dump_spikes_dir))
    records = []
    for run in range(cfg.run.runs):
        for fold in folds:
            records.extend(run_once(cfg, fold, classes, run, out))
    report = Report(records, tuple(classes))
    with open(out / "metrics.jsonl", "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    (out / "metrics.txt").write_text(report.table())
    return report


def write_spike_dumps(folds: Sequence[Fold], out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for fold in folds:
        for split in [fold.train] + fold.evals:
            for i, s in enumerate(split.samples):
                name = split.ids[i].replace("/", "_") if split.ids else f"{i:05d}"
                prefix = f"{fold.name}_" if fold.name else ""
                with open(out / f"{prefix}{split.name}_{name}.txt", "w") as fh:
                    dump_spikes(s, fh)


# -- feature maps ---------------------------------------------------------------

def count_map(x: SpikeTensor) -> np.ndarray:
    """Spike counts per (x, y, channel), summed over time."""
    w, h, _, c = x.shape
    m = np.zeros((w, h, c), dtype=np.int64)
    np.add.at(m, (x.x, x.y, x.k), 1)
    return m


def conv_outputs(net: Network, sample: SpikeTensor) -> list[SpikeTensor]:
    """Convolution output of every layer (before pooling) for a 3D network input."""
    outs = []
    x = sample
    for i, layer in enumerate(net.layers):
        y = conv_forward(layer, x, "infer", wta=net.spec.inference_wta,
                         wta_rule=net.spec.wta_rule)
        outs.append(y)
        pool = net.spec.blocks[i].pool
        x = pool_forward(pool, y) if pool is not None else y
    return outs


def feature_maps(net: Network, sample: SpikeTensor) -> list[np.ndarray]:
    """Per-layer ``(w, h, c)`` spike-count maps; 2D networks accumulate over frames."""
    if net.kind == "2d":
        total = None
        for f in sample.frames():
            maps = [count_map(o) for o in conv_outputs(net, f)]
            total = maps if total is None else [a + b for a, b in zip(total, maps)]
        if total is None:
            total = []
            for g, s in zip(net.spec.geometries(), net.spec.shapes()):
                o = output_shape(g, s)
                total.append(np.zeros((o[0], o[1], o[3]), dtype=np.int64))
        return total
    return [count_map(o) for o in conv_outputs(net, sample)]


def export_feature_maps(net: Network, sample: SpikeTensor, out_dir) -> list[Path]:
    """One PGM per (layer, channel); counts scaled linearly so the image max is 255."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for l, m in enumerate(feature_maps(net, sample)):
        for c in range(m.shape[2]):
            img = m[:, :, c].astype(np.float64)
            peak = img.max()
            if peak > 0:
                img = img * (255.0 / peak)
            p = out_dir / f"layer{l + 1}_ch{c:03d}.pgm"
            write_pgm(p, np.rint(img).astype(np.uint8))
            paths.append(p)
    return paths
