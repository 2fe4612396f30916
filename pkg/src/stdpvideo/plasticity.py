"""IF integration, biological STDP, threshold homeostasis and WTA selection.

The scalar rules are written as plain numeric functions (leading
underscore) so the compiled event loops in :mod:`stdpvideo._kernels` reuse
exactly the same arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class IFParams:
    v_rest: float = 0.0
    c_m: float = 1.0

    def __post_init__(self):
        if self.c_m <= 0:
            raise ValueError("c_m must be positive")


@dataclass(frozen=True)
class StdpParams:
    eta_w: float = 0.1
    tau_stdp: float = 0.1
    w_min: float = 0.0
    w_max: float = 1.0
    # what a synapse whose input never spiked does when its filter wins:
    # "depress" treats it as t_pre = 1, "skip" leaves it unchanged
    absent_pre: str = "skip"

    def __post_init__(self):
        if self.absent_pre not in ("depress", "skip"):
            raise ValueError(f"absent_pre must be 'depress' or 'skip', got {self.absent_pre!r}")
        if self.eta_w <= 0 or self.tau_stdp <= 0:
            raise ValueError("eta_w and tau_stdp must be positive")
        if not self.w_min < self.w_max:
            raise ValueError("w_min must be below w_max")


@dataclass(frozen=True)
class ThresholdParams:
    t_obj: float = 0.65
    eta_th: float = 1.0
    th_min: float = 1.0
    init_mean: float = 5.0
    init_std: float = 1.0

    def __post_init__(self):
        if not 0 < self.t_obj < 1:
            raise ValueError(f"t_obj must lie in (0, 1), got {self.t_obj}")
        if self.eta_th <= 0 or self.th_min <= 0:
            raise ValueError("eta_th and th_min must be positive")


def _integrate(v, w, c_m):
    return v + w / c_m


def _stdp_delta(t_pre, t_post, eta_w, tau):
    d = math.exp(-abs(t_pre - t_post) / tau)
    if t_pre <= t_post:
        return eta_w * d
    return -eta_w * d


def _threshold_delta(is_winner, t, t_obj, eta_th, l_d):
    d1 = -eta_th * (t - t_obj)
    d2 = eta_th if is_winner else -eta_th / l_d
    return d1 + d2


def integrate(v: float, w: float, params: IFParams = IFParams()) -> float:
    """Add one incoming spike of voltage ``w`` to the membrane potential."""
    return _integrate(v, w, params.c_m)


def stdp_delta(t_pre: Optional[float], t_post: float,
               params: StdpParams = StdpParams()) -> float:
    """Weight change for one synapse; a missing presynaptic spike counts as ``t_pre = 1``.

    This is the raw pairing rule. Whether absent synapses are updated at all
    is decided by ``params.absent_pre`` in :func:`apply_stdp`.
    """
    if t_pre is None or not math.isfinite(t_pre):
        t_pre = 1.0
    return _stdp_delta(t_pre, t_post, params.eta_w, params.tau_stdp)


def apply_stdp(weights: np.ndarray, pre_times: np.ndarray, t_post: float,
               params: StdpParams = StdpParams()) -> np.ndarray:
    """Update every synapse of a winning filter and clamp to ``[w_min, w_max]``.

    ``pre_times`` has the shape of ``weights``; ``inf`` or ``nan`` marks a
    synapse whose input never spiked, handled per ``params.absent_pre``.
    """
    pre = np.asarray(pre_times, dtype=np.float64)
    absent = ~np.isfinite(pre)
    pre = np.where(absent, 1.0, pre)
    mag = params.eta_w * np.exp(-np.abs(pre - t_post) / params.tau_stdp)
    delta = np.where(pre <= t_post, mag, -mag)
    if params.absent_pre == "skip":
        delta = np.where(absent, 0.0, delta)
    return np.clip(weights + delta, params.w_min, params.w_max)


def threshold_update(thresholds: np.ndarray, winner: int, t: float, l_d: int,
                     params: ThresholdParams = ThresholdParams()) -> np.ndarray:
    if l_d < 1 or not 0 <= winner < len(thresholds):
        raise ValueError("invalid competitor count or winner index")
    th = np.asarray(thresholds, dtype=np.float64)
    delta = np.full(th.shape, -params.eta_th * (t - params.t_obj) - params.eta_th / l_d)
    delta[winner] = -params.eta_th * (t - params.t_obj) + params.eta_th
    return np.maximum(params.th_min, th + delta)


def wta_select(candidates: Sequence[tuple[float, int]]) -> tuple[float, int]:
    """Pick the earliest ``(t, k)`` firing at one location; ties go to the smallest k."""
    if not candidates:
        raise ValueError("wta_select needs at least one candidate")
    return min(candidates, key=lambda c: (c[0], c[1]))
