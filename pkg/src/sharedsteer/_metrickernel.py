"""Time-to-lane-crossing propagation kernel."""

import math

import numpy as np

from sharedsteer import _geometry as geo
from sharedsteer._jit import kernel


@kernel
def _lane_distance(segs, qx, qy):
    # distance to the centerline with the first and last segments extended
    n = segs.shape[0]
    best = math.inf
    for k in range(n):
        u, _, _ = geo.seg_project(segs, k, qx, qy)
        if u < 0.0 and k > 0:
            u = 0.0
        elif u > segs[k, geo.LEN] and k < n - 1:
            u = segs[k, geo.LEN]
        px, py, _ = geo.seg_pose(segs, k, u)
        d = math.hypot(qx - px, qy - py)
        if d < best:
            best = d
    return best


@kernel
def _path_point(x0, y0, h0, kap, s):
    if abs(kap) < 1e-12:
        return x0 + s * math.cos(h0), y0 + s * math.sin(h0)
    h = h0 + kap * s
    return x0 + (math.sin(h) - math.sin(h0)) / kap, y0 - (math.cos(h) - math.cos(h0)) / kap


@kernel
def dlc_path(segs, x0, y0, h0, kap, half_width, threshold, step, max_len):
    """Path length until the lane margin drops below ``threshold``.

    Samples the predictive path every ``step`` metres and linearly
    interpolates the margin between the last safe and the first crossing
    sample. Returns NaN when no crossing occurs within ``max_len``. Samples
    that cannot cross (the margin is 1-Lipschitz in path length) are skipped.
    """
    g_prev = half_width - _lane_distance(segs, x0, y0) - threshold
    if g_prev < 0.0:
        return 0.0
    n_max = int(math.floor(max_len / step + 1e-9))
    i = 0
    while i < n_max:
        skip = int(math.floor(g_prev / step))
        if skip > 1:
            j = i + skip - 1
            if j >= n_max:
                return math.nan
            px, py = _path_point(x0, y0, h0, kap, j * step)
            g_j = half_width - _lane_distance(segs, px, py) - threshold
            if g_j >= 0.0:
                i = j
                g_prev = g_j
                continue
        px, py = _path_point(x0, y0, h0, kap, (i + 1) * step)
        g = half_width - _lane_distance(segs, px, py) - threshold
        if g < 0.0:
            return (i + g_prev / (g_prev - g)) * step
        i += 1
        g_prev = g
    return math.nan


@kernel
def dlc_series(segs, xs, ys, hs, rs, v, half_width, threshold, step, max_len):
    n = xs.shape[0]
    out = np.empty(n)
    for i in range(n):
        kap = rs[i] / v
        if abs(rs[i]) < 1e-6:
            kap = 0.0
        out[i] = dlc_path(segs, xs[i], ys[i], hs[i], kap, half_width, threshold, step, max_len)
    return out


def _lane_distance_np(segs, qx, qy):
    n = segs.shape[0]
    best = np.full(qx.shape, np.inf)
    for k in range(n):
        x0, y0, h0, kap, length = segs[k, geo.X0], segs[k, geo.Y0], segs[k, geo.H0], segs[k, geo.KAPPA], segs[k, geo.LEN]
        if kap == 0.0:
            u = (qx - x0) * math.cos(h0) + (qy - y0) * math.sin(h0)
        else:
            rho = 1.0 / kap
            cx, cy = x0 - rho * math.sin(h0), y0 + rho * math.cos(h0)
            alpha = np.arctan2(qy - cy, qx - cx)
            h = alpha + (0.5 * math.pi if kap > 0 else -0.5 * math.pi)
            half = 0.5 * kap * length
            delta = h - h0 - half
            delta = delta - 2 * math.pi * np.ceil((delta - math.pi) / (2 * math.pi)) + half
            u = delta / kap
        lo = -np.inf if k == 0 else 0.0
        hi = np.inf if k == n - 1 else length
        u = np.clip(u, lo, hi)
        if kap == 0.0:
            px, py = x0 + u * math.cos(h0), y0 + u * math.sin(h0)
        else:
            hh = h0 + kap * u
            px = x0 + (np.sin(hh) - math.sin(h0)) / kap
            py = y0 - (np.cos(hh) - math.cos(h0)) / kap
        best = np.minimum(best, np.hypot(qx - px, qy - py))
    return best


def _path_points_np(x0, y0, h0, kap, s):
    straight = kap == 0.0
    ks = np.where(straight, 1.0, kap)
    h = h0 + kap * s
    px = np.where(straight, x0 + s * np.cos(h0), x0 + (np.sin(h) - np.sin(h0)) / ks)
    py = np.where(straight, y0 + s * np.sin(h0), y0 - (np.cos(h) - np.cos(h0)) / ks)
    return px, py


def dlc_series_numpy(segs, xs, ys, hs, rs, v, half_width, threshold, step, max_len):
    """Vectorized twin of :func:`dlc_series`, advancing all samples together."""
    kap = np.where(np.abs(rs) < 1e-6, 0.0, rs / v)
    n_max = int(math.floor(max_len / step + 1e-9))
    out = np.full(xs.shape, np.nan)
    g_prev = half_width - _lane_distance_np(segs, xs, ys) - threshold
    out[g_prev < 0.0] = 0.0
    idx = np.zeros(xs.shape, dtype=np.int64)
    act = np.flatnonzero(g_prev >= 0.0)
    while act.size:
        gp = g_prev[act]
        i = idx[act]
        skip = np.floor(gp / step).astype(np.int64)
        # samples up to i + skip cannot cross; test the one after them
        j = np.where(skip > 1, i + skip - 1, i)
        j = np.minimum(j, n_max)
        done = j >= n_max
        px, py = _path_points_np(xs[act], ys[act], hs[act], kap[act], j * step)
        gj = half_width - _lane_distance_np(segs, px, py) - threshold
        gj = np.where(skip > 1, gj, gp)
        px, py = _path_points_np(xs[act], ys[act], hs[act], kap[act], (j + 1) * step)
        g = half_width - _lane_distance_np(segs, px, py) - threshold
        cross = (g < 0.0) & ~done
        out[act[cross]] = (j[cross] + gj[cross] / (gj[cross] - g[cross])) * step
        nxt = ~cross & ~done & (j + 1 < n_max)
        idx[act[nxt]] = j[nxt] + 1
        g_prev[act[nxt]] = g[nxt]
        act = act[nxt]
    return out
