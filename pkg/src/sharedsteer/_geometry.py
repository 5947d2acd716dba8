"""Scalar geometry kernels over a packed segment table.

A course is packed into a float array of shape (n, 6) whose rows are
``(s0, length, x0, y0, heading0, curvature)``. Every function below treats a
segment as *extended* beyond its ends (a straight as an infinite line, an arc
as its full circle), which lets the simulator keep using one segment until an
event moves it to the next.
"""

import math

from sharedsteer._jit import kernel

S0, LEN, X0, Y0, H0, KAPPA = 0, 1, 2, 3, 4, 5

TWO_PI = 2.0 * math.pi


@kernel
def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    return a - TWO_PI * math.ceil((a - math.pi) / TWO_PI)


@kernel
def seg_pose(segs, k, u):
    """Position and heading at local arc length ``u`` on segment ``k``."""
    x0 = segs[k, X0]
    y0 = segs[k, Y0]
    h0 = segs[k, H0]
    kap = segs[k, KAPPA]
    if kap == 0.0:
        return x0 + u * math.cos(h0), y0 + u * math.sin(h0), h0
    rho = 1.0 / kap
    h = h0 + kap * u
    x = x0 + rho * (math.sin(h) - math.sin(h0))
    y = y0 - rho * (math.cos(h) - math.cos(h0))
    return x, y, h


@kernel
def seg_project(segs, k, qx, qy):
    """Project a point onto extended segment ``k``.

    Returns ``(u, d, heading)``: local arc length of the foot point, signed
    lateral offset (left of the tangent positive) and tangent heading there.
    """
    x0 = segs[k, X0]
    y0 = segs[k, Y0]
    h0 = segs[k, H0]
    kap = segs[k, KAPPA]
    if kap == 0.0:
        c = math.cos(h0)
        s = math.sin(h0)
        dx = qx - x0
        dy = qy - y0
        return dx * c + dy * s, -dx * s + dy * c, h0
    rho = 1.0 / kap
    cx = x0 - rho * math.sin(h0)
    cy = y0 + rho * math.cos(h0)
    wx = qx - cx
    wy = qy - cy
    dist = math.hypot(wx, wy)
    alpha = math.atan2(wy, wx)
    if kap > 0.0:
        h = alpha + 0.5 * math.pi
        d = rho - dist
    else:
        h = alpha - 0.5 * math.pi
        d = dist + rho
    # unwrap around the segment midpoint so arcs up to a full turn resolve
    half = 0.5 * kap * segs[k, LEN]
    delta = wrap_angle(h - h0 - half) + half
    u = delta / kap
    return u, d, h0 + delta


@kernel
def seg_contains(segs, k, s):
    """Whether global arc length ``s`` belongs to segment ``k``.

    The first segment extends to -inf and the last to +inf.
    """
    n = segs.shape[0]
    if k > 0 and s < segs[k, S0]:
        return False
    if k < n - 1 and s > segs[k, S0] + segs[k, LEN]:
        return False
    return True


@kernel
def segment_index(segs, s):
    """Segment holding arc length ``s``; interior joints go to the later one."""
    n = segs.shape[0]
    k = 0
    while k < n - 1 and s >= segs[k + 1, S0]:
        k += 1
    return k


@kernel
def heading_at(segs, k, s):
    return segs[k, H0] + segs[k, KAPPA] * (s - segs[k, S0])


@kernel
def closest_point(segs, qx, qy):
    """Global closest centerline point, clamped to the course.

    Returns ``(s, distance, k)``; ties resolve toward smaller ``s``.
    """
    n = segs.shape[0]
    best_s = 0.0
    best_d = math.inf
    best_k = 0
    for k in range(n):
        length = segs[k, LEN]
        u, _, _ = seg_project(segs, k, qx, qy)
        if u < 0.0:
            u = 0.0
        elif u > length:
            u = length
        px, py, _ = seg_pose(segs, k, u)
        dist = math.hypot(qx - px, qy - py)
        if dist < best_d - 1e-12:
            best_d = dist
            best_s = segs[k, S0] + u
            best_k = k
    return best_s, best_d, best_k
