"""Layer-wise STDP training and 2D/3D feature extraction."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .events import SpikeTensor
from .layers import (ConvGeometry, ConvLayer, PoolGeometry, ShapeError, conv_forward,
                     WTA_RULES, load_layer, output_shape, pool_forward, save_layer, sum_pool_features)
from .plasticity import StdpParams, ThresholdParams

log = logging.getLogger(__name__)


class KindError(ValueError):
    pass


@dataclass(frozen=True)
class ConvBlockSpec:
    n_filters: int
    kernel: tuple[int, int, int]
    stride: tuple[int, int, int] = (1, 1, 1)
    pool: Optional[PoolGeometry] = None


@dataclass(frozen=True)
class NetworkSpec:
    kind: str  # "2d" | "3d"
    input_shape: tuple[int, int, int, int]  # per frame for 2D (td = 1)
    blocks: tuple[ConvBlockSpec, ...]
    t_obj: tuple[float, ...]
    stdp: StdpParams = StdpParams()
    threshold: ThresholdParams = ThresholdParams()
    feature_grid: tuple[int, int, int] = (1, 1, 1)
    # per-location WTA during feature extraction as well as training
    inference_wta: bool = True
    wta_rule: str = "first"

    def __post_init__(self):
        if self.wta_rule not in WTA_RULES:
            raise ValueError(f"unknown wta_rule {self.wta_rule!r}")
        if self.kind not in ("2d", "3d"):
            raise KindError(f"unknown architecture kind {self.kind!r}")
        if not self.blocks:
            raise ValueError("network needs at least one conv block")
        if len(self.t_obj) != len(self.blocks):
            raise ValueError(f"t_obj schedule has {len(self.t_obj)} entries for "
                             f"{len(self.blocks)} conv layers")
        if self.kind == "2d":
            if self.input_shape[2] != 1:
                raise ShapeError("2D networks take single-frame inputs (td = 1)")
            if any(b.kernel[2] != 1 for b in self.blocks):
                raise ShapeError("2D networks need f_td = 1 kernels")
        self.shapes()  # raises on incompatible geometry

    def geometries(self) -> list[ConvGeometry]:
        out, c = [], self.input_shape[3]
        for b in self.blocks:
            out.append(ConvGeometry(*b.kernel, c_in=c, n_filters=b.n_filters,
                                    stride_w=b.stride[0], stride_h=b.stride[1],
                                    stride_td=b.stride[2]))
            c = b.n_filters
        return out

    def shapes(self) -> list[tuple]:
        """Input shape of every conv layer followed by the final output shape."""
        shapes = [tuple(self.input_shape)]
        s = tuple(self.input_shape)
        for g, b in zip(self.geometries(), self.blocks):
            s = output_shape(g, s)
            if b.pool is not None:
                s = output_shape(b.pool, s)
            shapes.append(s)
        return shapes


def build_spec(kind: str, input_shape, filters: Sequence[int], kernels, strides, pools,
               t_obj: Sequence[float], stdp=StdpParams(), threshold=ThresholdParams(),
               feature_grid=(1, 1, 1), inference_wta: bool = True,
               wta_rule: str = "first") -> NetworkSpec:
    """Assemble a :class:`NetworkSpec`, shrinking temporal extents that exceed their input.

    ``kernels``, ``strides`` and ``pools`` are per-block lists of 3-tuples
    (``pools`` entries may be ``None``). A kernel or pool whose temporal size
    is larger than the remaining temporal depth is cut down to that depth
    (kernels only in 3D networks), so deep 3D stacks still run on short clips.
    """
    blocks = []
    s = tuple(input_shape)
    for n, kern, st, pool in zip(filters, kernels, strides, pools):
        if kind == "3d":
            kern = (kern[0], kern[1], min(kern[2], s[2]))
        g = ConvGeometry(*kern, c_in=s[3], n_filters=n, stride_w=st[0], stride_h=st[1],
                         stride_td=st[2])
        s = output_shape(g, s)
        pg = None
        if pool is not None:
            size, pstride = pool
            ptd = min(size[2], s[2])
            pg = PoolGeometry(size[0], size[1], ptd, pstride[0], pstride[1],
                              min(pstride[2], max(ptd, 1)))
            s = output_shape(pg, s)
        blocks.append(ConvBlockSpec(n, tuple(kern), tuple(st), pg))
    return NetworkSpec(kind, tuple(input_shape), tuple(blocks), tuple(t_obj), stdp,
                       threshold, tuple(feature_grid), inference_wta, wta_rule)


@dataclass(frozen=True)
class TrainPlan:
    epochs: int = 1
    shuffle: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class Network:
    spec: NetworkSpec
    layers: list[ConvLayer]
    seed: int = 0

    @classmethod
    def initialize(cls, spec: NetworkSpec, rng: np.random.Generator, seed: int = 0) -> "Network":
        layers = []
        for g, t_obj in zip(spec.geometries(), spec.t_obj):
            th = replace(spec.threshold, t_obj=t_obj)
            layers.append(ConvLayer.create(g, rng, spec.stdp, th))
        return cls(spec, layers, seed)

    @property
    def kind(self) -> str:
        return self.spec.kind

    def run_block(self, i: int, x: SpikeTensor) -> SpikeTensor:
        y = conv_forward(self.layers[i], x, "infer", wta=self.spec.inference_wta,
                         wta_rule=self.spec.wta_rule)
        pool = self.spec.blocks[i].pool
        return pool_forward(pool, y) if pool is not None else y

    def forward(self, x: SpikeTensor, n_blocks: Optional[int] = None) -> list[SpikeTensor]:
        """Outputs after each of the first ``n_blocks`` conv blocks (inference mode)."""
        outs = []
        for i in range(len(self.layers) if n_blocks is None else n_blocks):
            x = self.run_block(i, x)
            outs.append(x)
        return outs


def _clamped(n: int, n_valid: int) -> int:
    return max(0, min(n, n_valid))


def n_sampling_2d(l_w: int, l_h: int, f_w: int, f_h: int, clamp: bool = True) -> int:
    """Sampled training locations per 2D input, ``floor(2 l_w l_h / (f_w f_h))``.

    With ``clamp`` the count is capped at the number of valid positions.
    """
    n = (2 * l_w * l_h) // (f_w * f_h)
    if not clamp:
        return n
    n_valid = max(0, l_w - f_w + 1) * max(0, l_h - f_h + 1)
    return _clamped(n, n_valid)


def n_sampling_3d(l_w: int, l_h: int, l_td: int, f_w: int, f_h: int, f_td: int,
                  clamp: bool = True) -> int:
    n = (3 * l_w * l_h * l_td) // (f_w * f_h * f_td)
    if not clamp:
        return n
    n_valid = (max(0, l_w - f_w + 1) * max(0, l_h - f_h + 1) * max(0, l_td - f_td + 1))
    return _clamped(n, n_valid)


def sample_locations(rng: np.random.Generator, out_shape, n: int) -> np.ndarray:
    """Pick ``n`` distinct output positions uniformly; returns sorted ``(n, 3)`` rows."""
    out_shape = tuple(out_shape[:3])
    total = int(np.prod(out_shape))
    if n > total:
        raise ValueError(f"cannot sample {n} of {total} locations")
    flat = np.sort(rng.choice(total, size=n, replace=False))
    return np.stack(np.unravel_index(flat, out_shape), axis=1).astype(np.int64)


def _sampling_count(kind: str, in_shape, geometry: ConvGeometry, out_shape) -> int:
    w, h, td = in_shape[:3]
    if kind == "2d":
        n = (2 * w * h) // (geometry.f_w * geometry.f_h)
    else:
        n = (3 * w * h * td) // (geometry.f_w * geometry.f_h * geometry.f_td)
    # strided layers have fewer valid positions than the unit-stride formula assumes
    return _clamped(n, int(np.prod(out_shape[:3])))


def train_layerwise(spec: NetworkSpec, data: Sequence[SpikeTensor], plan: TrainPlan = TrainPlan(),
                    progress: Optional[Callable[[int, int], None]] = None) -> Network:
    """Train each conv layer in turn on the frozen outputs of the layers before it.

    ``data`` holds network inputs of shape ``spec.input_shape`` (single frames
    for a 2D network). Returns a network with every layer frozen.
    """
    if not data:
        raise ValueError("empty training set")
    for s in data:
        if tuple(s.shape) != tuple(spec.input_shape):
            raise ShapeError(f"sample shape {s.shape} != network input {spec.input_shape}")
    rng = np.random.default_rng(plan.seed)
    net = Network.initialize(spec, rng, plan.seed)
    inputs = list(data)
    for i, layer in enumerate(net.layers):
        if i > 0:
            inputs = [net.run_block(i - 1, x) for x in inputs]
        in_shape = inputs[0].shape
        out_shape = output_shape(layer.geometry, in_shape)
        n = _sampling_count(spec.kind, in_shape, layer.geometry, out_shape)
        log.info("training layer %d: %d samples, %d sampled locations", i, len(inputs), n)
        for epoch in range(plan.epochs):
            order = rng.permutation(len(inputs)) if plan.shuffle else np.arange(len(inputs))
            for step, j in enumerate(order):
                locs = sample_locations(rng, out_shape, n)
                mask = np.zeros(out_shape[:3], dtype=bool)
                mask[locs[:, 0], locs[:, 1], locs[:, 2]] = True
                conv_forward(layer, inputs[j], "train", sampled=mask, wta_rule=spec.wta_rule)
                if progress is not None:
                    progress(i, step)
        layer.frozen = True
    return net


def _block_features_3d(net: Network, sample: SpikeTensor) -> list[np.ndarray]:
    grid = net.spec.feature_grid
    return [sum_pool_features(o, grid) for o in net.forward(sample)]


def _block_features_2d(net: Network, frames: Sequence[SpikeTensor]) -> list[np.ndarray]:
    grid = net.spec.feature_grid[:2] + (1,)
    total = None
    for f in frames:
        vecs = [sum_pool_features(o, grid) for o in net.forward(f)]
        total = vecs if total is None else [a + b for a, b in zip(total, vecs)]
    if total is None:
        shapes = net.spec.shapes()[1:]
        total = [np.zeros(grid[0] * grid[1] * s[3], dtype=np.int64) for s in shapes]
    return total


def extract_features_2d(net: Network, frames: Sequence[SpikeTensor]) -> np.ndarray:
    """Run each frame through the 2D stack and sum the per-frame count vectors."""
    if net.kind != "2d":
        raise KindError("extract_features_2d needs a 2D network")
    return _block_features_2d(net, frames)[-1]


def extract_features_3d(net: Network, sample: SpikeTensor) -> np.ndarray:
    if net.kind != "3d":
        raise KindError("extract_features_3d needs a 3D network")
    return _block_features_3d(net, sample)[-1]


def block_features(net: Network, sample) -> list[np.ndarray]:
    """Feature vector after every conv block; ``sample`` is a video tensor.

    For a 2D network the video is split into frames first.
    """
    if net.kind == "2d":
        frames = sample.frames() if isinstance(sample, SpikeTensor) else sample
        return _block_features_2d(net, frames)
    return _block_features_3d(net, sample)


def network_inputs(kind: str, videos: Sequence[SpikeTensor]) -> list[SpikeTensor]:
    """Training inputs for a network kind: whole videos (3D) or all frames (2D)."""
    if kind == "2d":
        return [f for v in videos for f in v.frames()]
    return list(videos)


# -- snapshot directory -----------------------------------------------------

def _pool_dict(p: Optional[PoolGeometry]):
    return None if p is None else asdict(p)


def save_network(net: Network, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    s = net.spec
    manifest = {
        "kind": s.kind,
        "input_shape": list(s.input_shape),
        "blocks": [{"n_filters": b.n_filters, "kernel": list(b.kernel),
                    "stride": list(b.stride), "pool": _pool_dict(b.pool)} for b in s.blocks],
        "t_obj": list(s.t_obj),
        "stdp": asdict(s.stdp),
        "threshold": asdict(s.threshold),
        "feature_grid": list(s.feature_grid),
        "inference_wta": s.inference_wta,
        "wta_rule": s.wta_rule,
        "seed": net.seed,
        "layers": [f"layer{i}.txt" for i in range(len(net.layers))],
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for i, layer in enumerate(net.layers):
        save_layer(layer, out_dir / f"layer{i}.txt")


def load_network(out_dir) -> Network:
    out_dir = Path(out_dir)
    m = json.loads((out_dir / "manifest.json").read_text())
    blocks = tuple(
        ConvBlockSpec(b["n_filters"], tuple(b["kernel"]), tuple(b["stride"]),
                      None if b["pool"] is None else PoolGeometry(**b["pool"]))
        for b in m["blocks"])
    spec = NetworkSpec(m["kind"], tuple(m["input_shape"]), blocks, tuple(m["t_obj"]),
                       StdpParams(**m["stdp"]), ThresholdParams(**m["threshold"]),
                       tuple(m["feature_grid"]), m["inference_wta"], m["wta_rule"])
    layers = [load_layer(out_dir / name) for name in m["layers"]]
    return Network(spec, layers, m["seed"])
