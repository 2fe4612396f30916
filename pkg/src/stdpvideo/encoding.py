"""Frame preprocessing and on/off latency coding.

Frame stacks are dense float arrays indexed ``[x, y, z]`` (width, height,
temporal depth) with intensities in ``[0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import correlate2d

from .events import SpikeTensor

# responses this small are rounding residue of the unit-sum kernels
_ZERO_RESPONSE = 1e-9


class EncodingError(ValueError):
    pass


class InsufficientFramesError(EncodingError):
    pass


class DegenerateSizeError(EncodingError):
    pass


class FrameTooSmallError(EncodingError):
    pass


@dataclass(frozen=True)
class DogParams:
    """Difference-of-Gaussians filter. Sigmas are standard deviations."""

    size: int = 7
    sigma_in: float = 1.0
    sigma_out: float = 2.0  # variance 4.0

    def __post_init__(self):
        if self.size < 3 or self.size % 2 == 0:
            raise ValueError(f"DoG size must be odd and >= 3, got {self.size}")
        if not 0 < self.sigma_in < self.sigma_out:
            raise ValueError("need 0 < sigma_in < sigma_out")


@dataclass(frozen=True)
class CodingParams:
    on_off: bool = True
    normalization: str = "sample"  # "sample" | "frame"

    def __post_init__(self):
        if self.normalization not in ("sample", "frame"):
            raise ValueError(f"unknown normalization {self.normalization!r}")


def sample_frames(frames: np.ndarray, target_len: int, skip: int) -> np.ndarray:
    """Take ``target_len`` frames, leaving ``skip`` frames out between each."""
    need = target_len * (skip + 1) - skip
    if frames.shape[2] < need:
        raise InsufficientFramesError(
            f"need {need} frames for target_len={target_len}, skip={skip}; "
            f"got {frames.shape[2]}")
    return frames[:, :, : need : skip + 1]


def downscale_half(frames: np.ndarray) -> np.ndarray:
    w, h = frames.shape[:2]
    if w < 2 or h < 2:
        raise DegenerateSizeError(f"cannot halve a {w}x{h} frame")
    w2, h2 = w // 2, h // 2
    f = frames[: 2 * w2, : 2 * h2]
    return f.reshape(w2, 2, h2, 2, -1).mean(axis=(1, 3))


def background_subtract(frames: np.ndarray) -> np.ndarray:
    if frames.shape[2] < 2:
        raise DegenerateSizeError("background subtraction needs at least 2 frames")
    return np.abs(np.diff(frames, axis=2))


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - size // 2
    g = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2.0 * sigma**2))
    return g / g.sum()


def dog_kernel(params: DogParams) -> np.ndarray:
    return (gaussian_kernel(params.size, params.sigma_in)
            - gaussian_kernel(params.size, params.sigma_out))


def dog_filter(frame: np.ndarray, params: DogParams) -> np.ndarray:
    """Valid-region DoG response of a single 2D frame."""
    if frame.shape[0] < params.size or frame.shape[1] < params.size:
        raise FrameTooSmallError(
            f"frame {frame.shape} smaller than DoG kernel {params.size}")
    out = correlate2d(frame, dog_kernel(params), mode="valid")
    out[np.abs(out) < _ZERO_RESPONSE] = 0.0
    return out


def latency_encode(responses: np.ndarray, params: CodingParams = CodingParams()) -> SpikeTensor:
    """Map signed responses ``[x, y, z]`` to single spikes, strongest first.

    Spike time is ``1 - |r| / M`` with ``M`` the largest magnitude of the
    normalization scope. Positive responses go to channel 0, negative ones
    to channel 1 (or everything to channel 0 when ``on_off`` is off).
    """
    r = np.asarray(responses, dtype=np.float64)
    w, h, td = r.shape
    c = 2 if params.on_off else 1
    mag = np.abs(r)
    if params.normalization == "sample":
        m = np.full(td, mag.max() if mag.size else 0.0)
    else:
        m = mag.reshape(-1, td).max(axis=0) if mag.size else np.zeros(td)
    times = np.full((w, h, td, c), np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = 1.0 - mag / m[None, None, :]
    t = np.clip(t, 0.0, 1.0)
    active = mag > 0
    if params.on_off:
        times[..., 0] = np.where(active & (r > 0), t, np.inf)
        times[..., 1] = np.where(active & (r < 0), t, np.inf)
    else:
        times[..., 0] = np.where(active, t, np.inf)
    return SpikeTensor.from_dense(times)


def encode_sample(frames: np.ndarray, dog: DogParams = DogParams(),
                  coding: CodingParams = CodingParams(), bs: bool = False) -> SpikeTensor:
    """Background subtraction (optional), per-frame DoG, then latency coding."""
    frames = np.asarray(frames, dtype=np.float64)
    if bs:
        frames = background_subtract(frames)
    responses = np.stack([dog_filter(frames[:, :, z], dog)
                          for z in range(frames.shape[2])], axis=2)
    return latency_encode(responses, coding)
