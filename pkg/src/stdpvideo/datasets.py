"""Synthetic motion videos and on-disk frame datasets with subject splits.

On-disk layout: ``root/<subject>/<action>/<video_id>/NNNN.pgm``. Frames are
read in lexicographic filename order.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .encoding import InsufficientFramesError, downscale_half, sample_frames
from .pgm import read_pgm, write_pgm

SYNTHETIC_CLASSES = ("bar-left", "bar-right", "bar-up", "bar-down", "static-bar", "blink")

KTH_TRAIN = (11, 12, 13, 14, 15, 16, 17, 18)
KTH_VAL = (19, 20, 21, 23, 24, 25, 1, 4)
KTH_TEST = (2, 3, 5, 6, 7, 8, 9, 10, 22)


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    classes: tuple[str, ...] = ("bar-left", "bar-right", "bar-up", "bar-down")
    width: int = 32
    height: int = 32
    td: int = 8
    thickness: int = 2
    speed: int = 1
    noise: float = 0.02
    count: int = 10
    seed: int = 0

    def __post_init__(self):
        if len(self.classes) < 2:
            raise ValueError("need at least two classes")
        unknown = set(self.classes) - set(SYNTHETIC_CLASSES)
        if unknown:
            raise ValueError(f"unknown synthetic classes {sorted(unknown)}")
        if self.speed < 1:
            raise ValueError("speed must be >= 1")
        if not 0 <= self.noise < 0.5:
            raise ValueError("noise must lie in [0, 0.5)")


@dataclass
class LabeledVideos:
    videos: list[np.ndarray]  # each (w, h, td)
    labels: np.ndarray
    classes: tuple[str, ...]
    ids: list[str] = field(default_factory=list)
    subjects: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.videos)

    def subset(self, idx) -> "LabeledVideos":
        idx = list(idx)
        return LabeledVideos([self.videos[i] for i in idx], self.labels[idx], self.classes,
                             [self.ids[i] for i in idx] if self.ids else [],
                             [self.subjects[i] for i in idx] if self.subjects else [])


def render_bar(kind: str, start: int, width: int, height: int, td: int,
               thickness: int, speed: int) -> np.ndarray:
    """Noise-free bar video, values in {0, 1}, indexed ``[x, y, z]``."""
    frames = np.zeros((width, height, td))
    vertical = kind in ("bar-left", "bar-right", "static-bar-v", "blink-v")
    step = {"bar-right": speed, "bar-down": speed, "bar-left": -speed, "bar-up": -speed}.get(kind, 0)
    extent = width if vertical else height
    for z in range(td):
        if kind.startswith("blink") and z % 2 == 1:
            continue
        pos = (start + step * z + np.arange(thickness)) % extent
        if vertical:
            frames[pos, :, z] = 1.0
        else:
            frames[:, pos, z] = 1.0
    return frames


def _sample(kind: str, spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    if kind in ("static-bar", "blink"):
        kind = kind + ("-v" if rng.random() < 0.5 else "-h")
    vertical = kind in ("bar-left", "bar-right", "static-bar-v", "blink-v")
    start = int(rng.integers(spec.width if vertical else spec.height))
    frames = render_bar(kind, start, spec.width, spec.height, spec.td, spec.thickness, spec.speed)
    if spec.noise > 0:
        flip = rng.random(frames.shape) < spec.noise
        frames = np.where(flip, 1.0 - frames, frames)
    return frames


def generate_synthetic(spec: SyntheticSpec) -> LabeledVideos:
    """``spec.count`` videos per class, class-major order, deterministic in ``spec.seed``."""
    videos, labels, ids = [], [], []
    for ci, kind in enumerate(spec.classes):
        cls_id = SYNTHETIC_CLASSES.index(kind)
        for i in range(spec.count):
            rng = np.random.default_rng([spec.seed, cls_id, i])
            videos.append(_sample(kind, spec, rng))
            labels.append(ci)
            ids.append(f"{kind}_{i:04d}")
    return LabeledVideos(videos, np.array(labels, dtype=np.int64), tuple(spec.classes), ids)


def boxing_like_sample(width: int = 32, height: int = 32, td: int = 8,
                       seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """A static "body" block with a small "hand" moving back and forth beside it.

    Returns the frames and a boolean ``[x, y]`` mask of every pixel the hand
    covers during the clip.
    """
    rng = np.random.default_rng(seed)
    frames = np.zeros((width, height, td))
    bx0, by0 = width // 4, height // 4
    frames[bx0: bx0 + width // 4, by0: by0 + height // 2, :] = 0.6
    hand = max(2, width // 10)
    hx0 = bx0 + width // 4 + 1
    hy0 = int(rng.integers(by0, by0 + height // 2 - hand))
    reach = max(1, width // 4)
    mask = np.zeros((width, height), dtype=bool)
    for z in range(td):
        phase = z % (2 * reach)
        dx = phase if phase < reach else 2 * reach - phase
        x0 = min(hx0 + dx, width - hand)
        frames[x0: x0 + hand, hy0: hy0 + hand, z] = 1.0
        mask[x0: x0 + hand, hy0: hy0 + hand] = True
    return frames, mask


# -- on-disk datasets ----------------------------------------------------------

@dataclass(frozen=True)
class SplitProtocol:
    kind: str = "fixed"  # "fixed" | "leave-one-out"
    train: tuple[int, ...] = KTH_TRAIN
    val: tuple[int, ...] = KTH_VAL
    test: tuple[int, ...] = KTH_TEST

    def __post_init__(self):
        if self.kind not in ("fixed", "leave-one-out"):
            raise ValueError(f"unknown protocol {self.kind!r}")
        if self.kind == "fixed":
            sets = [set(self.train), set(self.val), set(self.test)]
            if (sets[0] & sets[1]) or (sets[0] & sets[2]) or (sets[1] & sets[2]):
                raise ValueError("train/val/test subject sets overlap")


KTH_PROTOCOL = SplitProtocol("fixed")
LEAVE_ONE_OUT = SplitProtocol("leave-one-out", (), (), ())


def subject_id(name: str) -> int:
    m = re.search(r"(\d+)$", name)
    if m is None:
        raise DatasetError(f"unknown subject id {name!r}")
    return int(m.group(1))


@dataclass
class VideoRecord:
    video_id: str
    subject: int
    action: str
    path: Path


def scan_frame_dataset(root) -> list[VideoRecord]:
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"missing dataset directory {root}")
    records = []
    for sdir in sorted(p for p in root.iterdir() if p.is_dir()):
        sid = subject_id(sdir.name)
        for adir in sorted(p for p in sdir.iterdir() if p.is_dir()):
            for vdir in sorted(p for p in adir.iterdir() if p.is_dir()):
                records.append(VideoRecord(f"{sdir.name}/{adir.name}/{vdir.name}", sid,
                                           adir.name, vdir))
    if not records:
        raise DatasetError(f"no videos found under {root}")
    return records


def load_video(record: VideoRecord, frames_per_video: int, skip: int,
               half_scale: bool = True) -> np.ndarray:
    files = sorted(record.path.glob("*.pgm"))
    try:
        stack = np.stack([read_pgm(f) for f in files], axis=2) if files else np.zeros((1, 1, 0))
    except OSError as e:
        raise DatasetError(f"unreadable frame in video {record.video_id}: {e}") from e
    try:
        stack = sample_frames(stack, frames_per_video, skip)
    except InsufficientFramesError as e:
        raise InsufficientFramesError(f"video {record.video_id}: {e}") from e
    return downscale_half(stack) if half_scale else stack


def _collect(records: Sequence[VideoRecord], classes, frames_per_video, skip, half_scale):
    videos = [load_video(r, frames_per_video, skip, half_scale) for r in records]
    labels = np.array([classes.index(r.action) for r in records], dtype=np.int64)
    return LabeledVideos(videos, labels, classes, [r.video_id for r in records],
                         [f"{r.subject:02d}" for r in records])


def load_frame_dataset(root, protocol: SplitProtocol = KTH_PROTOCOL, frames_per_video: int = 8,
                       skip: int = 1, half_scale: bool = True):
    """Load and split a frame dataset.

    Returns ``{"train", "val", "test"}`` for the fixed protocol and a list of
    ``{"subject", "train", "test"}`` folds for leave-one-out.
    """
    records = scan_frame_dataset(root)
    classes = tuple(sorted({r.action for r in records}))
    if protocol.kind == "fixed":
        assigned = set(protocol.train) | set(protocol.val) | set(protocol.test)
        for r in records:
            if r.subject not in assigned:
                raise DatasetError(f"unknown subject id {r.subject} in {r.video_id}")
        out = {}
        for split, subjects in (("train", protocol.train), ("val", protocol.val),
                                ("test", protocol.test)):
            sel = [r for r in records if r.subject in subjects]
            out[split] = _collect(sel, classes, frames_per_video, skip, half_scale)
        return out
    data = _collect(records, classes, frames_per_video, skip, half_scale)
    folds = []
    for s in sorted({r.subject for r in records}):
        test = [i for i, r in enumerate(records) if r.subject == s]
        train = [i for i, r in enumerate(records) if r.subject != s]
        folds.append({"subject": s, "train": data.subset(train), "test": data.subset(test)})
    return folds


def write_manifest(path, rows: Sequence[tuple[str, str, str, str]]) -> None:
    """CSV with columns video_id, subject, action, split."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["video_id", "subject", "action", "split"])
        w.writerows(rows)


def split_manifest_rows(splits) -> list[tuple[str, str, str, str]]:
    rows = []
    if isinstance(splits, dict):
        for name, data in splits.items():
            for vid, subj, lab in zip(data.ids, data.subjects, data.labels):
                rows.append((vid, subj, data.classes[lab], name))
    else:
        for fold in splits:
            data = fold["test"]
            for vid, subj, lab in zip(data.ids, data.subjects, data.labels):
                rows.append((vid, subj, data.classes[lab], f"fold{fold['subject']:02d}"))
    return rows


def materialize(data: LabeledVideos, root, subjects: Optional[Sequence[str]] = None) -> None:
    """Write videos to the on-disk layout as 8-bit PGM frames."""
    root = Path(root)
    for i, (v, lab) in enumerate(zip(data.videos, data.labels)):
        subj = subjects[i] if subjects is not None else "01"
        vid = data.ids[i] if data.ids else f"v{i:04d}"
        d = root / subj / data.classes[lab] / vid
        d.mkdir(parents=True, exist_ok=True)
        for z in range(v.shape[2]):
            write_pgm(d / f"{z:04d}.pgm", np.rint(v[:, :, z] * 255.0))
