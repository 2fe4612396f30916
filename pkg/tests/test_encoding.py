import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import dog_response, latency_events
from stdpvideo.encoding import (CodingParams, DegenerateSizeError, DogParams, FrameTooSmallError,
                                InsufficientFramesError, background_subtract, dog_filter,
                                downscale_half, encode_sample, latency_encode, sample_frames)


def stack(n, w=3, h=2):
    return np.stack([np.full((w, h), float(i)) for i in range(n)], axis=2)


def test_sample_frames_skip_one():
    out = sample_frames(stack(16), 8, 1)
    assert out[0, 0].tolist() == [0, 2, 4, 6, 8, 10, 12, 14]


def test_sample_frames_identity():
    s = stack(5)
    np.testing.assert_array_equal(sample_frames(s, 5, 0), s)


def test_sample_frames_insufficient():
    with pytest.raises(InsufficientFramesError, match="need 15"):
        sample_frames(stack(10), 8, 1)


def test_downscale_constant_kth_geometry():
    out = downscale_half(np.full((160, 120, 2), 0.6))
    assert out.shape == (80, 60, 2)
    np.testing.assert_allclose(out, 0.6, rtol=0, atol=1e-15)


def test_downscale_block_mean():
    f = np.array([[0.0, 0.0], [1.0, 1.0]])[:, :, None]
    assert downscale_half(f)[0, 0, 0] == 0.5


def test_downscale_degenerate():
    with pytest.raises(DegenerateSizeError):
        downscale_half(np.zeros((1, 4, 1)))


def test_background_subtract_static_and_shape():
    f = np.repeat(np.random.default_rng(0).random((5, 5, 1)), 8, axis=2)
    out = background_subtract(f)
    assert out.shape == (5, 5, 7)
    assert not out.any()


def test_background_subtract_moving_pixel():
    f = np.zeros((5, 5, 4))
    for z in range(4):
        f[z, 2, z] = 1.0
    out = background_subtract(f)
    for z in range(3):
        nz = {tuple(p) for p in np.argwhere(out[:, :, z] > 0)}
        assert nz == {(z, 2), (z + 1, 2)}


def test_background_subtract_single_frame():
    with pytest.raises(DegenerateSizeError):
        background_subtract(np.zeros((4, 4, 1)))


def test_dog_constant_frame_zero():
    assert not dog_filter(np.full((12, 10), 0.7), DogParams()).any()


def test_dog_point_source_matches_oracle():
    frame = np.zeros((13, 13))
    frame[6, 6] = 1.0
    got = dog_filter(frame, DogParams())
    want = dog_response(frame)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)
    # centre positive, surrounding ring negative
    assert got[3, 3] > 0
    assert got[3, 3 + 2] < 0 and got[3 - 2, 3] < 0


def test_dog_random_frame_matches_oracle(rng):
    frame = rng.random((11, 9))
    np.testing.assert_allclose(dog_filter(frame, DogParams()), dog_response(frame),
                               rtol=0, atol=1e-12)


def test_dog_frame_too_small():
    with pytest.raises(FrameTooSmallError):
        dog_filter(np.zeros((5, 5)), DogParams(size=7))


def test_dog_params_validation():
    with pytest.raises(ValueError):
        DogParams(size=6)
    with pytest.raises(ValueError):
        DogParams(sigma_in=2.0, sigma_out=1.0)


def test_latency_zero_responses_empty():
    assert len(latency_encode(np.zeros((3, 3, 2)))) == 0


def test_latency_max_and_half():
    r = np.zeros((2, 1, 1))
    r[0, 0, 0] = 4.0
    r[1, 0, 0] = -2.0
    ev = latency_encode(r).events
    assert (ev[0].x, ev[0].k, ev[0].t) == (0, 0, 0.0)
    assert (ev[1].x, ev[1].k, ev[1].t) == (1, 1, 0.5)


@given(arrays(np.float64, (4, 3, 2), elements=st.floats(-1, 1, allow_nan=False)))
def test_latency_matches_oracle(r):
    got = {(e.x, e.y, e.z, e.k): e.t for e in latency_encode(r)}
    want = latency_events(r)
    assert got.keys() == want.keys()
    for key in got:
        assert got[key] == pytest.approx(want[key], abs=1e-12)


@given(arrays(np.float64, (5, 4, 2), elements=st.floats(-1, 1, allow_nan=False)))
def test_latency_monotone_in_magnitude(r):
    ev = latency_encode(r).events
    m = np.abs(r).max()
    mags = [abs(r[e.x, e.y, e.z]) for e in ev]
    for i in range(len(ev)):
        for j in range(len(ev)):
            if mags[i] > mags[j]:
                assert ev[i].t <= ev[j].t
                # strict once the gap survives rounding of 1 - |r|/M
                if (mags[i] - mags[j]) / m > 1e-12:
                    assert ev[i].t < ev[j].t


def test_frame_normalization_scales_per_frame():
    r = np.zeros((1, 1, 2))
    r[0, 0, 0], r[0, 0, 1] = 1.0, 0.25
    t = latency_encode(r, CodingParams(normalization="frame")).to_dense()
    assert t[0, 0, 0, 0] == 0.0 and t[0, 0, 1, 0] == 0.0


def test_encode_sample_shapes():
    rng = np.random.default_rng(2)
    v = rng.random((12, 10, 5))
    assert encode_sample(v).shape == (6, 4, 5, 2)
    assert encode_sample(v, bs=True).shape == (6, 4, 4, 2)
    assert len(encode_sample(np.zeros((12, 10, 3)))) == 0


def test_encode_kth_like_shape():
    raw = np.random.default_rng(3).random((160, 120, 16))
    frames = downscale_half(sample_frames(raw, 8, 1))
    assert encode_sample(frames).shape == (74, 54, 8, 2)


def test_encode_deterministic_and_channels(rng):
    v = rng.random((10, 9, 3))
    a, b = encode_sample(v), encode_sample(v)
    assert a == b
    resp = np.stack([dog_response(v[:, :, z]) for z in range(3)], axis=2)
    for e in a:
        r = resp[e.x, e.y, e.z]
        assert (r > 0) if e.k == 0 else (r < 0)
