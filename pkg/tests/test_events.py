import io

import numpy as np
from hypothesis import given, strategies as st

from stdpvideo.events import (SpikeEvent, SpikeTensor, dump_spikes, load_spikes, sort_events,
                              validate_tensor)

SHAPE = (4, 3, 2, 2)

events_st = st.lists(st.builds(SpikeEvent, st.integers(0, 3), st.integers(0, 2),
                               st.integers(0, 1), st.integers(0, 1),
                               st.sampled_from([0.0, 0.1, 0.25, 0.5, 1.0])), max_size=30)


def test_sort_empty():
    assert sort_events([]) == []


def test_sort_ties_use_zyxk():
    a = SpikeEvent(2, 0, 0, 0, 0.5)
    b = SpikeEvent(1, 0, 1, 0, 0.1)
    c = SpikeEvent(3, 0, 0, 1, 0.1)
    assert sort_events([a, b, c]) == [c, b, a]


@given(events_st)
def test_sort_idempotent(evs):
    once = sort_events(evs)
    assert sort_events(once) == once


@given(events_st)
def test_build_matches_sort_events(evs):
    # distinct coordinates only, as a tensor would hold
    seen, uniq = set(), []
    for e in evs:
        if e[:4] not in seen:
            seen.add(e[:4])
            uniq.append(e)
    tensor = SpikeTensor.from_events(SHAPE, uniq)
    assert tensor.events == sort_events(uniq)
    assert validate_tensor(tensor) is None
    assert np.all(np.diff(tensor.t) >= 0)
    assert len(tensor) <= int(np.prod(SHAPE))


def test_validate_empty_ok():
    assert validate_tensor(SpikeTensor.empty((7, 1, 3, 2))) is None


def test_validate_duplicate():
    t = SpikeTensor.from_events(SHAPE, [SpikeEvent(1, 1, 0, 0, 0.2), SpikeEvent(1, 1, 0, 0, 0.3)])
    v = validate_tensor(t)
    assert v is not None and v.kind == "duplicate"


def test_validate_out_of_range():
    t = SpikeTensor.from_events(SHAPE, [SpikeEvent(SHAPE[0], 0, 0, 0, 0.2)])
    assert validate_tensor(t).kind == "out-of-range"


def test_validate_time_and_order():
    bad_t = SpikeTensor.from_events(SHAPE, [SpikeEvent(0, 0, 0, 0, 1.5)])
    assert validate_tensor(bad_t).kind == "time-range"
    cols = [np.array(v) for v in ([0, 1], [0, 0], [0, 0], [0, 0])]
    unordered = SpikeTensor(SHAPE, *cols, np.array([0.5, 0.1]))
    assert validate_tensor(unordered).kind == "order"


def test_dense_roundtrip(rng):
    dense = np.where(rng.random(SHAPE) < 0.4, rng.random(SHAPE), np.inf)
    t = SpikeTensor.from_dense(dense)
    np.testing.assert_array_equal(t.to_dense(), dense)
    assert t.counts().sum() == np.isfinite(dense).sum()


def test_frames_split_by_z(rng):
    dense = np.where(rng.random(SHAPE) < 0.5, rng.random(SHAPE), np.inf)
    t = SpikeTensor.from_dense(dense)
    frames = t.frames()
    assert [f.shape for f in frames] == [(4, 3, 1, 2)] * 2
    for z, f in enumerate(frames):
        np.testing.assert_array_equal(f.to_dense()[:, :, 0], dense[:, :, z])


def test_dump_format_and_roundtrip():
    t = SpikeTensor.from_events(SHAPE, [SpikeEvent(1, 2, 0, 1, 1 / 3), SpikeEvent(0, 0, 1, 0, 0.0)])
    buf = io.StringIO()
    dump_spikes(t, buf)
    assert buf.getvalue() == "# shape 4 3 2 2\n0 0 1 0 0\n1 2 0 1 0.333333333\n"
    back = load_spikes(io.StringIO(buf.getvalue()))
    assert back.shape == SHAPE
    assert back.events[1].t == 0.333333333
