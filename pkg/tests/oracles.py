"""Slow, independent reference implementations used as test oracles.

Nothing here imports the package's numeric code; each function restates
the rule it checks in plain Python/numpy so the two can disagree.
"""

import math

import numpy as np


# -- closed forms ---------------------------------------------------------------

def stdp_closed_form(t_pre, t_post, eta=0.1, tau=0.1):
    mag = eta * math.exp(-abs(t_pre - t_post) / tau)
    return mag if t_pre <= t_post else -mag


def threshold_closed_form(v_th, winner, t, t_obj, eta, l_d, th_min):
    d = -eta * (t - t_obj) + (eta if winner else -eta / l_d)
    return max(th_min, v_th + d)


# -- encoding -------------------------------------------------------------------

def gaussian(size, sigma):
    c = size // 2
    g = [[math.exp(-((i - c) ** 2 + (j - c) ** 2) / (2 * sigma * sigma))
          for j in range(size)] for i in range(size)]
    s = sum(map(sum, g))
    return [[v / s for v in row] for row in g]


def dog_response(frame, size=7, sigma_in=1.0, sigma_out=2.0):
    """Valid-mode cross-correlation written as explicit loops."""
    gi, go = gaussian(size, sigma_in), gaussian(size, sigma_out)
    w, h = frame.shape
    out = np.zeros((w - size + 1, h - size + 1))
    for x in range(out.shape[0]):
        for y in range(out.shape[1]):
            acc = 0.0
            for i in range(size):
                for j in range(size):
                    acc += (gi[i][j] - go[i][j]) * frame[x + i, y + j]
            out[x, y] = acc
    return out


def latency_events(responses):
    """{(x, y, z, k): t} for on/off coding with per-sample max normalization."""
    m = float(np.max(np.abs(responses))) if responses.size else 0.0
    out = {}
    if m == 0:
        return out
    for (x, y, z), r in np.ndenumerate(responses):
        if r > 0:
            out[(x, y, z, 0)] = 1 - r / m
        elif r < 0:
            out[(x, y, z, 1)] = 1 - (-r) / m
    return out


# -- convolution ----------------------------------------------------------------

def dense_potentials(indicator, W, strides=(1, 1, 1)):
    """Cross-correlate a binary ``(w, h, td, c)`` indicator with ``W`` (k, c, fw, fh, ftd).

    Returns ``(ow, oh, otd, k)``; every term is an explicit multiply-add.
    """
    k, c, fw, fh, ftd = W.shape
    w, h, td, _ = indicator.shape
    sw, sh, st = strides
    ow, oh, otd = (w - fw) // sw + 1, (h - fh) // sh + 1, (td - ftd) // st + 1
    out = np.zeros((ow, oh, otd, k))
    for ox in range(ow):
        for oy in range(oh):
            for oz in range(otd):
                patch = indicator[ox * sw: ox * sw + fw, oy * sh: oy * sh + fh,
                                  oz * st: oz * st + ftd, :]
                for f in range(k):
                    acc = 0.0
                    for (i, j, m, ch), v in np.ndenumerate(patch):
                        if v:
                            acc += W[f, ch, i, j, m]
                    out[ox, oy, oz, f] = acc
    return out


def _rf_events(events, ox, oy, oz, size, strides):
    fw, fh, ftd = size
    sw, sh, st = strides
    return [e for e in events
            if ox * sw <= e[0] < ox * sw + fw and oy * sh <= e[1] < oy * sh + fh
            and oz * st <= e[2] < oz * st + ftd]


def infer_reference(events, shape, W, th, strides=(1, 1, 1), wta=False, rule="first"):
    """Inference output as a set of ``(x, y, z, k, t)``.

    Works location by location: a filter's potential after the inputs of
    time ``t`` is the weight sum of all receptive-field inputs with time
    ``<= t``; it fires at the first input time where that sum reaches its
    threshold. With ``wta`` only the earliest firer of a location is kept
    (ties: smallest k, or largest overshoot for ``rule="margin"``).
    """
    k, c, fw, fh, ftd = W.shape
    w, h, td, _ = shape
    sw, sh, st = strides
    ow, oh, otd = (w - fw) // sw + 1, (h - fh) // sh + 1, (td - ftd) // st + 1
    out = set()
    for ox in range(ow):
        for oy in range(oh):
            for oz in range(otd):
                rf = _rf_events(events, ox, oy, oz, (fw, fh, ftd), strides)
                times = sorted({e[4] for e in rf})
                fire = {}
                for f in range(k):
                    for t in times:
                        v = sum(W[f, e[3], e[0] - ox * sw, e[1] - oy * sh, e[2] - oz * st]
                                for e in rf if e[4] <= t)
                        if v >= th[f]:
                            fire[f] = (t, v - th[f])
                            break
                if not fire:
                    continue
                if not wta:
                    out |= {(ox, oy, oz, f, t) for f, (t, _) in fire.items()}
                    continue
                t0 = min(t for t, _ in fire.values())
                cands = [f for f, (t, _) in fire.items() if t == t0]
                if rule == "margin":
                    best = max(fire[f][1] for f in cands)
                    win = min(f for f in cands if fire[f][1] == best)
                else:
                    win = min(cands)
                out.add((ox, oy, oz, win, t0))
    return out


def train_reference(events, shape, W, th, sampled, strides, eta_w=0.1, tau=0.1,
                    t_obj=0.65, eta_th=1.0, th_min=1.0, absent="skip", rule="first"):
    """Sequential pure-Python training pass over one sample; updates ``W`` and ``th`` in place.

    Inputs sharing a timestamp are added first; then every touched sampled
    location is checked in flat ``(z, y, x)`` order. The first crossing at a
    location is its WTA winner; it learns and the location closes.
    Returns the list of ``(x, y, z, k, t)`` winners.
    """
    k, c, fw, fh, ftd = W.shape
    w, h, td, _ = shape
    sw, sh, st = strides
    ow, oh, otd = (w - fw) // sw + 1, (h - fh) // sh + 1, (td - ftd) // st + 1
    pre = {(e[0], e[1], e[2], e[3]): e[4] for e in events}
    v = {}
    done = set()
    winners = []
    groups = {}
    for e in events:
        groups.setdefault(e[4], []).append(e)
    for t in sorted(groups):
        touched = set()
        for (x, y, z, ch, _) in groups[t]:
            for ox in range(ow):
                for oy in range(oh):
                    for oz in range(otd):
                        i, j, m = x - ox * sw, y - oy * sh, z - oz * st
                        if not (0 <= i < fw and 0 <= j < fh and 0 <= m < ftd):
                            continue
                        if not sampled[ox, oy, oz] or (ox, oy, oz) in done:
                            continue
                        pot = v.setdefault((ox, oy, oz), [0.0] * k)
                        for f in range(k):
                            pot[f] += W[f, ch, i, j, m]
                        touched.add((oz, oy, ox))
        for (oz, oy, ox) in sorted(touched):
            pot = v[(ox, oy, oz)]
            over = [(pot[f] - th[f], f) for f in range(k) if pot[f] >= th[f]]
            if not over:
                continue
            if rule == "margin":
                best = max(d for d, _ in over)
                win = min(f for d, f in over if d == best)
            else:
                win = min(f for _, f in over)
            done.add((ox, oy, oz))
            winners.append((ox, oy, oz, win, t))
            for ch in range(c):
                for i in range(fw):
                    for j in range(fh):
                        for m in range(ftd):
                            tp = pre.get((ox * sw + i, oy * sh + j, oz * st + m, ch))
                            if tp is None:
                                if absent == "skip":
                                    continue
                                tp = 1.0
                            nw = W[win, ch, i, j, m] + stdp_closed_form(tp, t, eta_w, tau)
                            W[win, ch, i, j, m] = min(1.0, max(0.0, nw))
            for f in range(k):
                th[f] = threshold_closed_form(th[f], f == win, t, t_obj, eta_th, k, th_min)
    return winners


def earliest_pool_reference(events, shape, size, strides):
    pw, ph, pt = size
    sw, sh, st = strides
    w, h, td, c = shape
    ow, oh, otd = (w - pw) // sw + 1, (h - ph) // sh + 1, (td - pt) // st + 1
    best = {}
    for (x, y, z, ch, t) in events:
        for ox in range(ow):
            for oy in range(oh):
                for oz in range(otd):
                    if (ox * sw <= x < ox * sw + pw and oy * sh <= y < oy * sh + ph
                            and oz * st <= z < oz * st + pt):
                        key = (ox, oy, oz, ch)
                        if key not in best or t < best[key]:
                            best[key] = t
    return {(*key, t) for key, t in best.items()}


# -- classifier -------------------------------------------------------------------

def hinge_objective(W, b, X, y, lam):
    """Mean over samples of the one-vs-rest hinge sum, plus (lam/2)|W|^2."""
    n_classes = W.shape[0]
    total = 0.0
    for x, label in zip(X, y):
        for c in range(n_classes):
            target = 1.0 if c == label else -1.0
            total += max(0.0, 1.0 - target * (float(np.dot(W[c], x)) + b[c]))
    return 0.5 * lam * float(np.sum(W * W)) + total / len(y)
