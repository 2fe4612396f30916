"""Sparse single-spike event tensors.

A coded sample is a set of spikes, each carrying integer coordinates
``(x, y, z, k)`` and a latency ``t`` in the unit window ``[0, 1]``.
Events are stored column-wise (one numpy array per field) and kept in the
canonical order ``(t, z, y, x, k)`` so that every consumer can replay them
as a time-ordered stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable, Iterator, NamedTuple, Optional, Sequence

import numpy as np

Shape = tuple[int, int, int, int]


class SpikeEvent(NamedTuple):
    x: int
    y: int
    z: int
    k: int
    t: float


def _order(x, y, z, k, t) -> np.ndarray:
    # np.lexsort uses the last key as the primary one
    return np.lexsort((k, x, y, z, t))


def sort_events(events: Sequence[SpikeEvent]) -> list[SpikeEvent]:
    """Return events in the canonical (t, z, y, x, k) order."""
    return sorted(events, key=lambda e: (e.t, e.z, e.y, e.x, e.k))


@dataclass(frozen=True, eq=False)
class SpikeTensor:
    """Column-wise spike storage with a declared ``(l_w, l_h, l_td, c)`` shape.

    Use :meth:`build` to construct a sorted tensor; the raw constructor keeps
    the arrays exactly as given (useful for validation tests).
    """

    shape: Shape
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    k: np.ndarray
    t: np.ndarray

    @classmethod
    def build(cls, shape, x, y, z, k, t) -> "SpikeTensor":
        x = np.asarray(x, dtype=np.int64).ravel()
        y = np.asarray(y, dtype=np.int64).ravel()
        z = np.asarray(z, dtype=np.int64).ravel()
        k = np.asarray(k, dtype=np.int64).ravel()
        t = np.asarray(t, dtype=np.float64).ravel()
        idx = _order(x, y, z, k, t)
        arrays = [a[idx] for a in (x, y, z, k, t)]
        for a in arrays:
            a.setflags(write=False)
        return cls(tuple(int(s) for s in shape), *arrays)

    @classmethod
    def empty(cls, shape) -> "SpikeTensor":
        z = np.zeros(0, dtype=np.int64)
        return cls.build(shape, z, z, z, z, np.zeros(0))

    @classmethod
    def from_events(cls, shape, events: Iterable[SpikeEvent]) -> "SpikeTensor":
        events = list(events)
        if not events:
            return cls.empty(shape)
        cols = list(zip(*events))
        return cls.build(shape, *cols)

    @classmethod
    def from_dense(cls, times: np.ndarray) -> "SpikeTensor":
        """Build from a dense ``(l_w, l_h, l_td, c)`` array; ``inf`` marks no spike."""
        x, y, z, k = np.nonzero(np.isfinite(times))
        return cls.build(times.shape, x, y, z, k, times[x, y, z, k])

    def __len__(self) -> int:
        return int(self.t.shape[0])

    def __iter__(self) -> Iterator[SpikeEvent]:
        for row in zip(self.x.tolist(), self.y.tolist(), self.z.tolist(),
                       self.k.tolist(), self.t.tolist()):
            yield SpikeEvent(*row)

    @property
    def events(self) -> list[SpikeEvent]:
        return list(self)

    def to_dense(self) -> np.ndarray:
        """Dense spike-time array, ``inf`` where nothing fired."""
        out = np.full(self.shape, np.inf)
        out[self.x, self.y, self.z, self.k] = self.t
        return out

    def counts(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.int64)
        np.add.at(out, (self.x, self.y, self.z, self.k), 1)
        return out

    def frame(self, z: int) -> "SpikeTensor":
        """Single temporal slice as a ``(l_w, l_h, 1, c)`` tensor."""
        m = self.z == z
        w, h, _, c = self.shape
        return SpikeTensor.build((w, h, 1, c), self.x[m], self.y[m],
                                 np.zeros(int(m.sum()), dtype=np.int64),
                                 self.k[m], self.t[m])

    def frames(self) -> list["SpikeTensor"]:
        return [self.frame(z) for z in range(self.shape[2])]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpikeTensor):
            return NotImplemented
        return self.shape == other.shape and all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("x", "y", "z", "k", "t"))


class Violation(NamedTuple):
    kind: str  # "out-of-range" | "duplicate" | "time-range" | "order"
    index: int
    message: str


def validate_tensor(tensor: SpikeTensor) -> Optional[Violation]:
    """Return the first violated invariant of ``tensor``, or ``None`` if it is valid."""
    coords = (tensor.x, tensor.y, tensor.z, tensor.k)
    for name, col, bound in zip("xyzk", coords, tensor.shape):
        bad = np.nonzero((col < 0) | (col >= bound))[0]
        if bad.size:
            i = int(bad[0])
            return Violation("out-of-range", i,
                             f"event {i}: {name}={int(col[i])} outside [0, {bound})")
    bad = np.nonzero(~((tensor.t >= 0.0) & (tensor.t <= 1.0)))[0]
    if bad.size:
        i = int(bad[0])
        return Violation("time-range", i, f"event {i}: t={tensor.t[i]!r} outside [0, 1]")
    if len(tensor):
        flat = np.ravel_multi_index(coords, tensor.shape)
        _, first, cnt = np.unique(flat, return_index=True, return_counts=True)
        if (cnt > 1).any():
            dup = flat[first[cnt > 1]]
            i = int(min(np.nonzero(flat == d)[0][1] for d in dup))
            return Violation("duplicate", i, f"event {i}: coordinate already spiked")
    idx = _order(*coords, tensor.t)
    bad = np.nonzero(idx != np.arange(len(tensor)))[0]
    if bad.size:
        i = int(bad[0])
        return Violation("order", i, f"event {i} breaks (t, z, y, x, k) ordering")
    return None


def dump_spikes(tensor: SpikeTensor, fh: IO[str]) -> None:
    """Write one ``x y z k t`` line per event, preceded by a shape comment."""
    fh.write("# shape %d %d %d %d\n" % tensor.shape)
    for e in tensor:
        fh.write(f"{e.x} {e.y} {e.z} {e.k} {e.t:.9g}\n")


def load_spikes(fh: IO[str]) -> SpikeTensor:
    shape = None
    rows = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0] == "shape":
                shape = tuple(int(p) for p in parts[1:5])
            continue
        x, y, z, k, t = line.split()
        rows.append(SpikeEvent(int(x), int(y), int(z), int(k), float(t)))
    if shape is None:
        raise ValueError("spike dump has no '# shape' header")
    return SpikeTensor.from_events(shape, rows)
