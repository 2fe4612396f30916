"""Spiking 2D/3D convolution, earliest-spike pooling and sum-pooled features.

A 2D layer is a 3D layer whose temporal filter size is 1; both kinds run
through the same event loops.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import _kernels
from .events import SpikeTensor
from .plasticity import IFParams, StdpParams, ThresholdParams

WTA_RULES = ("first", "margin")


class ShapeError(ValueError):
    pass


class FrozenLayerError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConvGeometry:
    f_w: int
    f_h: int
    f_td: int
    c_in: int
    n_filters: int
    stride_w: int = 1
    stride_h: int = 1
    stride_td: int = 1

    def __post_init__(self):
        if min(self.f_w, self.f_h, self.f_td, self.c_in, self.n_filters) < 1:
            raise ValueError("filter sizes, channels and filter count must be >= 1")
        if min(self.strides) < 1:
            raise ValueError("strides must be >= 1")

    @property
    def is_2d(self) -> bool:
        return self.f_td == 1

    @property
    def size(self) -> tuple[int, int, int]:
        return (self.f_w, self.f_h, self.f_td)

    @property
    def strides(self) -> tuple[int, int, int]:
        return (self.stride_w, self.stride_h, self.stride_td)


@dataclass(frozen=True)
class PoolGeometry:
    p_w: int = 2
    p_h: int = 2
    p_td: int = 1
    stride_w: int = 2
    stride_h: int = 2
    stride_td: int = 1

    def __post_init__(self):
        if min(self.size + self.strides) < 1:
            raise ValueError("pool sizes and strides must be >= 1")

    @property
    def size(self) -> tuple[int, int, int]:
        return (self.p_w, self.p_h, self.p_td)

    @property
    def strides(self) -> tuple[int, int, int]:
        return (self.stride_w, self.stride_h, self.stride_td)


def output_shape(geometry: Union[ConvGeometry, PoolGeometry], in_shape) -> tuple[int, int, int, int]:
    """Valid (unpadded) output shape ``(w, h, td, c)``."""
    w, h, td = in_shape[:3]
    c = in_shape[3] if len(in_shape) > 3 else 1
    out = []
    for n, f, s in zip((w, h, td), geometry.size, geometry.strides):
        if n < f:
            raise ShapeError(f"filter {geometry.size} larger than input {tuple(in_shape)}")
        out.append((n - f) // s + 1)
    if isinstance(geometry, ConvGeometry):
        if c != geometry.c_in:
            raise ShapeError(f"layer expects {geometry.c_in} channels, input has {c}")
        return (*out, geometry.n_filters)
    return (*out, c)


@dataclass
class ConvLayer:
    geometry: ConvGeometry
    weights: np.ndarray  # (k, c_in, f_w, f_h, f_td)
    thresholds: np.ndarray  # (k,)
    stdp: StdpParams = field(default_factory=StdpParams)
    threshold: ThresholdParams = field(default_factory=ThresholdParams)
    neuron: IFParams = field(default_factory=IFParams)
    frozen: bool = False

    @classmethod
    def create(cls, geometry: ConvGeometry, rng: np.random.Generator,
               stdp: StdpParams = StdpParams(),
               threshold: ThresholdParams = ThresholdParams()) -> "ConvLayer":
        """Weights ~ U(0, 1), thresholds ~ N(init_mean, init_std) floored at th_min."""
        g = geometry
        w = rng.uniform(0.0, 1.0, size=(g.n_filters, g.c_in, g.f_w, g.f_h, g.f_td))
        th = rng.normal(threshold.init_mean, threshold.init_std, size=g.n_filters)
        th = np.maximum(th, threshold.th_min)
        return cls(g, w, th, stdp, threshold)

    @property
    def kind(self) -> str:
        return "2d" if self.geometry.is_2d else "3d"


def _check_input(layer: ConvLayer, x: SpikeTensor):
    return output_shape(layer.geometry, x.shape)


def conv_forward(layer: ConvLayer, x: SpikeTensor, mode: str = "infer",
                 sampled: Optional[np.ndarray] = None, wta: bool = False,
                 learn_weights: bool = True, learn_thresholds: bool = True,
                 wta_rule: str = "first", return_potentials: bool = False):
    """Event-driven convolution.

    In ``"infer"`` mode every output location is simulated and each neuron
    fires at most once; with ``wta`` only the winning filter of a location
    fires. In ``"train"`` mode only locations flagged in ``sampled`` (a
    boolean ``(w, h, td)`` mask over output positions) are simulated, WTA is
    always on, and the winner updates weights and thresholds in place.

    Inputs sharing a timestamp are integrated together before any threshold
    test. When several filters of a location cross threshold at the same
    time, ``wta_rule="first"`` picks the smallest index and ``"margin"`` the
    largest ``v - v_th`` (smallest index among equal margins).
    """
    if wta_rule not in WTA_RULES:
        raise ValueError(f"unknown wta_rule {wta_rule!r}")
    out_shape = _check_input(layer, x)
    g = layer.geometry
    if mode == "train":
        if layer.frozen:
            raise FrozenLayerError("cannot train a frozen layer")
        wta = True
    elif mode == "infer":
        sampled = None
        learn_weights = learn_thresholds = False
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if sampled is None:
        sampled = np.ones(out_shape[:3], dtype=bool)
    if sampled.shape != tuple(out_shape[:3]):
        raise ShapeError(f"sampling mask {sampled.shape} != output {out_shape[:3]}")
    in_times = x.to_dense() if learn_weights else np.zeros((1, 1, 1, 1))
    s, th = layer.stdp, layer.threshold
    res = _kernels.conv_run(
        x.x, x.y, x.z, x.k, x.t, in_times, layer.weights, layer.thresholds,
        np.ascontiguousarray(sampled, dtype=np.bool_), np.array(g.strides, dtype=np.int64),
        np.array(out_shape[:3], dtype=np.int64), layer.neuron.c_m, wta, wta_rule == "margin",
        learn_weights, learn_thresholds, s.eta_w, s.tau_stdp, s.w_min, s.w_max,
        th.t_obj, th.eta_th, th.th_min,
        1.0 if s.absent_pre == "depress" else np.inf)
    out = SpikeTensor.build(out_shape, *res[:5])
    if return_potentials:
        return out, res[5]
    return out


def pool_forward(geometry: PoolGeometry, x: SpikeTensor) -> SpikeTensor:
    """Propagate the earliest spike of each pooling window and channel."""
    out_shape = output_shape(geometry, x.shape)
    res = _kernels.pool_earliest(x.x, x.y, x.z, x.k, x.t,
                                 np.array(geometry.size, dtype=np.int64),
                                 np.array(geometry.strides, dtype=np.int64),
                                 np.array(out_shape[:3], dtype=np.int64), out_shape[3])
    return SpikeTensor.build(out_shape, *res)


def sum_pool_features(x: SpikeTensor, grid=(1, 1, 1)) -> np.ndarray:
    """Spike counts per (grid cell, channel), cell-major.

    Cell index along each axis is ``floor(coord * g / extent)``; cells are
    flattened in (x, y, z) order, channels vary fastest.
    """
    grid = tuple(grid) + (1,) * (3 - len(grid))
    w, h, td, c = x.shape
    gw, gh, gtd = (min(g, n) for g, n in zip(grid, (w, h, td)))
    cx = x.x * gw // w
    cy = x.y * gh // h
    cz = x.z * gtd // td
    feat = np.zeros((grid[0], grid[1], grid[2], c), dtype=np.int64)
    np.add.at(feat, (cx, cy, cz, x.k), 1)
    return feat.ravel()


# -- snapshots --------------------------------------------------------------

_HEADER = "stdpvideo-conv-layer 1"


def dumps_layer(layer: ConvLayer) -> str:
    """Text snapshot: header, geometry, weights in (k, c_in, x, y, z) order, thresholds."""
    g = layer.geometry
    buf = io.StringIO()
    buf.write(_HEADER + "\n")
    buf.write(f"kind {layer.kind}\n")
    buf.write("geometry %d %d %d %d %d %d %d %d\n" % (
        g.f_w, g.f_h, g.f_td, g.c_in, g.n_filters, g.stride_w, g.stride_h, g.stride_td))
    s, th = layer.stdp, layer.threshold
    buf.write(f"stdp {s.eta_w!r} {s.tau_stdp!r} {s.w_min!r} {s.w_max!r} {s.absent_pre}\n")
    buf.write(f"homeostasis {th.t_obj!r} {th.eta_th!r} {th.th_min!r} "
              f"{th.init_mean!r} {th.init_std!r}\n")
    buf.write(f"frozen {int(layer.frozen)}\n")
    buf.write(f"weights {layer.weights.size}\n")
    for v in layer.weights.ravel(order="C"):
        buf.write(f"{v:.17g}\n")
    buf.write(f"thresholds {layer.thresholds.size}\n")
    for v in layer.thresholds:
        buf.write(f"{v:.17g}\n")
    return buf.getvalue()


def loads_layer(text: str) -> ConvLayer:
    lines = text.splitlines()
    if not lines or lines[0] != _HEADER:
        raise ValueError("not a layer snapshot")
    it = iter(lines[1:])
    kv = {}
    for _ in range(5):
        key, *vals = next(it).split()
        kv[key] = vals
    geo = ConvGeometry(*(int(v) for v in kv["geometry"]))
    stdp = StdpParams(*(float(v) for v in kv["stdp"][:4]), *kv["stdp"][4:])
    th = ThresholdParams(*(float(v) for v in kv["homeostasis"]))
    key, n = next(it).split()
    assert key == "weights"
    w = np.array([float(next(it)) for _ in range(int(n))])
    key, n = next(it).split()
    assert key == "thresholds"
    thr = np.array([float(next(it)) for _ in range(int(n))])
    w = w.reshape(geo.n_filters, geo.c_in, geo.f_w, geo.f_h, geo.f_td)
    return ConvLayer(geo, w, thr, stdp, th, frozen=bool(int(kv["frozen"][0])))


def save_layer(layer: ConvLayer, path) -> None:
    Path(path).write_text(dumps_layer(layer))


def load_layer(path) -> ConvLayer:
    return loads_layer(Path(path).read_text())


def export_filter_images(layer: ConvLayer, out_dir, prefix: str = "filter") -> list[Path]:
    """One PGM per (filter, input channel, temporal slice), weights scaled to [0, 255]."""
    from .pgm import write_pgm

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    w = layer.weights
    for k in range(w.shape[0]):
        for c in range(w.shape[1]):
            for z in range(w.shape[4]):
                p = out_dir / f"{prefix}_k{k:03d}_c{c:03d}_z{z:02d}.pgm"
                write_pgm(p, np.rint(w[k, c, :, :, z] * 255.0).astype(np.uint8))
                paths.append(p)
    return paths
