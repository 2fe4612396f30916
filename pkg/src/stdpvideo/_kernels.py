"""Compiled event loops for spiking convolution and pooling."""

import numpy as np
from numba import njit

from .plasticity import _integrate, _stdp_delta, _threshold_delta

_stdp_delta_nb = njit(cache=True)(_stdp_delta)
_threshold_delta_nb = njit(cache=True)(_threshold_delta)
_integrate_nb = njit(cache=True)(_integrate)


@njit(cache=True)
def _span(x, f, s, n_out):
    # output indices o with o*s <= x < o*s + f
    a = x - f + 1
    lo = -((-a) // s)
    if lo < 0:
        lo = 0
    hi = x // s
    if hi > n_out - 1:
        hi = n_out - 1
    return lo, hi


@njit(cache=True)
def conv_run(xs, ys, zs, cs, ts, in_times, W, th, sampled, strides, out_shape, c_m,
             wta, tie_max, learn_w, learn_th, eta_w, tau, w_min, w_max, t_obj, eta_th, th_min,
             absent_pre):
    """Event loop shared by inference and training.

    Events with equal timestamps are integrated together before any
    threshold test. With ``wta`` a location emits at most one spike (the
    winner) and is closed afterwards; the winner then drives STDP and
    threshold adaptation when learning is enabled. ``W`` and ``th`` are
    updated in place.
    """
    nf, cin, fw, fh, ftd = W.shape
    sw, sh, std = strides[0], strides[1], strides[2]
    ow, oh, otd = out_shape[0], out_shape[1], out_shape[2]
    n_loc = ow * oh * otd
    v = np.zeros((ow, oh, otd, nf))
    done = np.zeros((ow, oh, otd), dtype=np.bool_)
    fired = np.zeros((ow, oh, otd, nf), dtype=np.bool_)
    stamp = np.full(n_loc, -1, dtype=np.int64)
    touched = np.empty(n_loc, dtype=np.int64)
    cap = n_loc * nf
    ox_out = np.empty(cap, dtype=np.int64)
    oy_out = np.empty(cap, dtype=np.int64)
    oz_out = np.empty(cap, dtype=np.int64)
    of_out = np.empty(cap, dtype=np.int64)
    ot_out = np.empty(cap)
    n = 0
    n_ev = xs.shape[0]
    e = 0
    group = 0
    while e < n_ev:
        t = ts[e]
        g_end = e
        while g_end < n_ev and ts[g_end] == t:
            g_end += 1
        n_touched = 0
        for ev in range(e, g_end):
            x, y, z, c = xs[ev], ys[ev], zs[ev], cs[ev]
            x0, x1 = _span(x, fw, sw, ow)
            y0, y1 = _span(y, fh, sh, oh)
            z0, z1 = _span(z, ftd, std, otd)
            for oz in range(z0, z1 + 1):
                m = z - oz * std
                for oy in range(y0, y1 + 1):
                    j = y - oy * sh
                    for ox in range(x0, x1 + 1):
                        if not sampled[ox, oy, oz] or done[ox, oy, oz]:
                            continue
                        i = x - ox * sw
                        for f in range(nf):
                            v[ox, oy, oz, f] = _integrate_nb(v[ox, oy, oz, f], W[f, c, i, j, m], c_m)
                        flat = (oz * oh + oy) * ow + ox
                        if stamp[flat] != group:
                            stamp[flat] = group
                            touched[n_touched] = flat
                            n_touched += 1
        group += 1
        e = g_end
        locs = np.sort(touched[:n_touched])
        for q in range(n_touched):
            flat = locs[q]
            ox = flat % ow
            oy = (flat // ow) % oh
            oz = flat // (ow * oh)
            if done[ox, oy, oz]:
                continue
            if not wta:
                for f in range(nf):
                    if not fired[ox, oy, oz, f] and v[ox, oy, oz, f] >= th[f]:
                        fired[ox, oy, oz, f] = True
                        v[ox, oy, oz, f] = 0.0
                        ox_out[n] = ox
                        oy_out[n] = oy
                        oz_out[n] = oz
                        of_out[n] = f
                        ot_out[n] = t
                        n += 1
                continue
            win = -1
            best = 0.0
            for f in range(nf):
                d = v[ox, oy, oz, f] - th[f]
                if d >= 0.0:
                    if win < 0 or (tie_max and d > best):
                        win = f
                        best = d
                    if not tie_max:
                        break
            if win < 0:
                continue
            done[ox, oy, oz] = True
            v[ox, oy, oz, win] = 0.0
            ox_out[n] = ox
            oy_out[n] = oy
            oz_out[n] = oz
            of_out[n] = win
            ot_out[n] = t
            n += 1
            if learn_w:
                bx, by, bz = ox * sw, oy * sh, oz * std
                for cc in range(cin):
                    for ii in range(fw):
                        for jj in range(fh):
                            for mm in range(ftd):
                                tp = in_times[bx + ii, by + jj, bz + mm, cc]
                                if not np.isfinite(tp):
                                    if not np.isfinite(absent_pre):
                                        continue
                                    tp = absent_pre
                                wv = W[win, cc, ii, jj, mm] + _stdp_delta_nb(tp, t, eta_w, tau)
                                if wv < w_min:
                                    wv = w_min
                                elif wv > w_max:
                                    wv = w_max
                                W[win, cc, ii, jj, mm] = wv
            if learn_th:
                for f in range(nf):
                    nt = th[f] + _threshold_delta_nb(f == win, t, t_obj, eta_th, nf)
                    th[f] = nt if nt > th_min else th_min
    return ox_out[:n], oy_out[:n], oz_out[:n], of_out[:n], ot_out[:n], v


@njit(cache=True)
def pool_earliest(xs, ys, zs, cs, ts, size, strides, out_shape, n_ch):
    pw, ph, ptd = size[0], size[1], size[2]
    sw, sh, std = strides[0], strides[1], strides[2]
    ow, oh, otd = out_shape[0], out_shape[1], out_shape[2]
    seen = np.zeros((ow, oh, otd, n_ch), dtype=np.bool_)
    cap = ow * oh * otd * n_ch
    ox_out = np.empty(cap, dtype=np.int64)
    oy_out = np.empty(cap, dtype=np.int64)
    oz_out = np.empty(cap, dtype=np.int64)
    oc_out = np.empty(cap, dtype=np.int64)
    ot_out = np.empty(cap)
    n = 0
    for e in range(xs.shape[0]):
        x, y, z, c, t = xs[e], ys[e], zs[e], cs[e], ts[e]
        x0, x1 = _span(x, pw, sw, ow)
        y0, y1 = _span(y, ph, sh, oh)
        z0, z1 = _span(z, ptd, std, otd)
        for oz in range(z0, z1 + 1):
            for oy in range(y0, y1 + 1):
                for ox in range(x0, x1 + 1):
                    if seen[ox, oy, oz, c]:
                        continue
                    seen[ox, oy, oz, c] = True
                    ox_out[n] = ox
                    oy_out[n] = oy
                    oz_out[n] = oz
                    oc_out[n] = c
                    ot_out[n] = t
                    n += 1
    return ox_out[:n], oy_out[:n], oz_out[:n], oc_out[:n], ot_out[:n]
