"""Closed-loop right-hand side and event-aware fixed-step RK4 integration.

Everything here works on packed float arrays so the same code runs under
numba and as plain Python.
"""

import math

import numpy as np

from sharedsteer import _geometry as geo
from sharedsteer._jit import kernel

# parameter vector layout
M, IZ, LF, LR, KF, KR, V, ET, KS, KT, JS, BS = range(12)
A1, A2, A3, A4, TN, TF, TP, FAR = range(12, 20)
KD, KHF, KNMS, TNMS = range(20, 24)
HA1, HA2, HA3, HA4, K1, HTN, HTF, HLIM = range(24, 32)
NPARAM = 32

# state vector layout
SX, SY, SPSI, SBETA, SR, SPHI, SPHID, SINT, SPADE, SNMS = range(10)
NSTATE = 10

# algebraic signals produced alongside the derivative
(
    G_EY, G_ETH, G_TH, G_TA, G_PHIT, G_SFOOT, G_LAT, G_DELTA,
    G_UPRE, G_EYDOT, G_EYH, G_ETHH, G_EYHDOT, G_ETHHDOT,
) = range(14)
NSIG = 14

# preview queries tracked against course segments
Q_FOOT, Q_NEAR, Q_FAR, Q_HNEAR, Q_HFAR = range(5)
NQUERY = 5

STATUS_OK, STATUS_BETA, STATUS_CORRIDOR, STATUS_NONFINITE = 0, 1, 2, 3
CORRIDOR_M = 50.0
MAX_EVENTS_PER_STEP = 32
BISECT_ITERS = 64


@kernel
def aligning_coefficient(p):
    return 2.0 * p[ET] * p[KF] * p[KT] / (1.0 + 2.0 * p[ET] * p[KF] / p[KS])


@kernel
def plant_rhs(p, x, torque, dx):
    """Column, bicycle and pose derivatives; returns the aligning torque.

    ``torque`` is the sum of driver, guidance and external torques on the
    steering wheel.
    """
    v = p[V]
    psi = x[SPSI]
    beta = x[SBETA]
    r = x[SR]
    delta = p[KT] * x[SPHI]
    cf = p[KF]
    cr = p[KR]
    lf = p[LF]
    lr = p[LR]
    t_a = aligning_coefficient(p) * (beta + lf * r / v - delta)

    mv = p[M] * v
    dx[SBETA] = (2.0 * cf * delta - 2.0 * (cf + cr) * beta
                 - (mv + 2.0 / v * (lf * cf - lr * cr)) * r) / mv
    dx[SR] = (2.0 * lf * cf * delta - 2.0 * (lf * cf - lr * cr) * beta
              - 2.0 * (lf * lf * cf + lr * lr * cr) / v * r) / p[IZ]
    dx[SPHI] = x[SPHID]
    dx[SPHID] = (torque + t_a - p[BS] * x[SPHID]) / p[JS]
    dx[SX] = v * math.cos(psi + beta)
    dx[SY] = v * math.sin(psi + beta)
    dx[SPSI] = r
    return t_a


@kernel
def haptic_law(p, e_y, e_y_dot, e_theta, e_theta_dot):
    if p[K1] == 0.0:
        return 0.0
    raw = p[K1] * (-p[HA1] * e_y - p[HA2] * e_y_dot
                   + p[HA3] * e_theta + p[HA4] * e_theta_dot)
    lim = p[HLIM]
    if raw > lim:
        return lim
    if raw < -lim:
        return -lim
    return raw


@kernel
def visual_law(p, e_y, x_int, e_y_dot, e_theta):
    u = -(p[A1] * e_y + p[A2] * x_int + p[A3] * e_y_dot)
    if p[FAR] != 0.0:
        u += p[A4] * e_theta
    return u


@kernel
def near_point_error(segs, k, x, y, psi, beta, r, v, t_near):
    """Lateral error of the near point and its exact time derivative."""
    c = math.cos(psi)
    s = math.sin(psi)
    px = x + v * t_near * c
    py = y + v * t_near * s
    vx = v * math.cos(psi + beta) - v * t_near * r * s
    vy = v * math.sin(psi + beta) + v * t_near * r * c
    _, d, h = geo.seg_project(segs, k, px, py)
    return d, -vx * math.sin(h) + vy * math.cos(h)


@kernel
def loop_rhs(p, segs, modes, active, x, t_ext, dx, sig):
    v = p[V]
    px = x[SX]
    py = x[SY]
    psi = x[SPSI]
    beta = x[SBETA]
    r = x[SR]

    k0 = modes[Q_FOOT]
    u0, d0, h0 = geo.seg_project(segs, k0, px, py)
    s_foot = segs[k0, geo.S0] + u0
    s_dot = (v * math.cos(psi + beta - h0)) / (1.0 - segs[k0, geo.KAPPA] * d0)

    e_y, e_y_dot = near_point_error(segs, modes[Q_NEAR], px, py, psi, beta, r, v, p[TN])
    e_theta = 0.0
    if active[Q_FAR]:
        theta = geo.heading_at(segs, modes[Q_FAR], s_foot + v * p[TF])
        e_theta = geo.wrap_angle(theta - psi)

    e_yh = 0.0
    e_yh_dot = 0.0
    e_thh = 0.0
    e_thh_dot = 0.0
    t_h = 0.0
    if active[Q_HNEAR]:
        e_yh, e_yh_dot = near_point_error(segs, modes[Q_HNEAR], px, py, psi, beta, r, v, p[HTN])
        k4 = modes[Q_HFAR]
        theta_h = geo.heading_at(segs, k4, s_foot + v * p[HTF])
        e_thh = geo.wrap_angle(theta_h - psi)
        e_thh_dot = segs[k4, geo.KAPPA] * s_dot - r
        t_h = haptic_law(p, e_yh, e_yh_dot, e_thh, e_thh_dot)

    u_pre = visual_law(p, e_y, x[SINT], e_y_dot, e_theta)
    phi_t = 2.0 * x[SPADE] - u_pre
    t_star = (p[KD] + p[KNMS]) * phi_t - p[KNMS] * x[SPHI] - p[KHF] * t_h
    dx[SINT] = e_y
    dx[SPADE] = 2.0 / p[TP] * (u_pre - x[SPADE])
    dx[SNMS] = (t_star - x[SNMS]) / p[TNMS]

    t_a = plant_rhs(p, x, x[SNMS] + t_h + t_ext, dx)

    sig[G_EY] = e_y
    sig[G_ETH] = e_theta
    sig[G_TH] = t_h
    sig[G_TA] = t_a
    sig[G_PHIT] = phi_t
    sig[G_SFOOT] = s_foot
    sig[G_LAT] = d0
    sig[G_DELTA] = p[KT] * x[SPHI]
    sig[G_UPRE] = u_pre
    sig[G_EYDOT] = e_y_dot
    sig[G_EYH] = e_yh
    sig[G_ETHH] = e_thh
    sig[G_EYHDOT] = e_yh_dot
    sig[G_ETHHDOT] = e_thh_dot


@kernel
def query_positions(p, segs, modes, x, out):
    """Arc length of every preview query under the current segment modes."""
    v = p[V]
    u0, _, _ = geo.seg_project(segs, modes[Q_FOOT], x[SX], x[SY])
    s_foot = segs[modes[Q_FOOT], geo.S0] + u0
    out[Q_FOOT] = s_foot
    c = math.cos(x[SPSI])
    s = math.sin(x[SPSI])
    k = modes[Q_NEAR]
    u, _, _ = geo.seg_project(segs, k, x[SX] + v * p[TN] * c, x[SY] + v * p[TN] * s)
    out[Q_NEAR] = segs[k, geo.S0] + u
    out[Q_FAR] = s_foot + v * p[TF]
    k = modes[Q_HNEAR]
    u, _, _ = geo.seg_project(segs, k, x[SX] + v * p[HTN] * c, x[SY] + v * p[HTN] * s)
    out[Q_HNEAR] = segs[k, geo.S0] + u
    out[Q_HFAR] = s_foot + v * p[HTF]


@kernel
def modes_valid(p, segs, modes, active, x, qs):
    query_positions(p, segs, modes, x, qs)
    for q in range(NQUERY):
        if active[q] and not geo.seg_contains(segs, modes[q], qs[q]):
            return False
    return True


@kernel
def update_modes(p, segs, modes, active, x, qs):
    query_positions(p, segs, modes, x, qs)
    n = segs.shape[0]
    for q in range(NQUERY):
        if not active[q]:
            continue
        # projections are re-evaluated after each move; far queries are
        # plain arc lengths and just walk the table
        for _ in range(n):
            if geo.seg_contains(segs, modes[q], qs[q]):
                break
            if qs[q] > segs[modes[q], geo.S0]:
                modes[q] += 1
            else:
                modes[q] -= 1
            query_positions(p, segs, modes, x, qs)


@kernel
def rk4_step(p, segs, modes, active, x, h, t_ext, out, work, sig):
    k1 = work[0]
    k2 = work[1]
    k3 = work[2]
    k4 = work[3]
    tmp = work[4]
    n = x.shape[0]
    loop_rhs(p, segs, modes, active, x, t_ext, k1, sig)
    for i in range(n):
        tmp[i] = x[i] + 0.5 * h * k1[i]
    loop_rhs(p, segs, modes, active, tmp, t_ext, k2, sig)
    for i in range(n):
        tmp[i] = x[i] + 0.5 * h * k2[i]
    loop_rhs(p, segs, modes, active, tmp, t_ext, k3, sig)
    for i in range(n):
        tmp[i] = x[i] + h * k3[i]
    loop_rhs(p, segs, modes, active, tmp, t_ext, k4, sig)
    for i in range(n):
        out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@kernel
def advance(p, segs, modes, active, x, h, t_ext, work, sig, qs):
    """Integrate ``h`` seconds, splitting the step where a preview query
    crosses a segment joint so no RK4 stage straddles a curvature jump."""
    trial = work[5]
    remaining = h
    for _ in range(MAX_EVENTS_PER_STEP):
        rk4_step(p, segs, modes, active, x, remaining, t_ext, trial, work, sig)
        if modes_valid(p, segs, modes, active, trial, qs):
            x[:] = trial
            return
        lo = 0.0
        hi = remaining
        for _ in range(BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            rk4_step(p, segs, modes, active, x, mid, t_ext, trial, work, sig)
            if modes_valid(p, segs, modes, active, trial, qs):
                lo = mid
            else:
                hi = mid
        rk4_step(p, segs, modes, active, x, hi, t_ext, trial, work, sig)
        x[:] = trial
        update_modes(p, segs, modes, active, x, qs)
        remaining -= hi
        if remaining <= 0.0:
            return
    # pathological event cascade: finish without further splitting
    rk4_step(p, segs, modes, active, x, remaining, t_ext, trial, work, sig)
    x[:] = trial
    update_modes(p, segs, modes, active, x, qs)


@kernel
def record(p, segs, modes, active, x, t, t_ext, row, dx, sig):
    loop_rhs(p, segs, modes, active, x, t_ext, dx, sig)
    row[0] = t
    row[1] = x[SX]
    row[2] = x[SY]
    row[3] = x[SPSI]
    row[4] = x[SBETA]
    row[5] = x[SR]
    row[6] = x[SPHI]
    row[7] = sig[G_DELTA]
    row[8] = x[SNMS]
    row[9] = sig[G_TH]
    row[10] = sig[G_TA]
    row[11] = sig[G_EY]
    row[12] = sig[G_ETH]
    row[13] = sig[G_SFOOT]
    row[14] = sig[G_LAT]
    row[15] = sig[G_PHIT]
    row[16] = sig[G_UPRE]
    row[17] = sig[G_EYDOT]
    row[18] = sig[G_EYH]
    row[19] = sig[G_ETHH]
    row[20] = t_ext
    row[21] = x[SINT]
    row[22] = x[SPHID]


NCOL = 23


@kernel
def pulse_value(t_mid, p_start, p_end, p_mag):
    if p_start <= t_mid < p_end:
        return p_mag
    return 0.0


@kernel
def run_loop(p, segs, modes, active, x0, h, n_steps, steps_per_log, log_rate,
             p_start, p_end, p_mag, out):
    """Run the closed loop; returns (rows written, status, abort time)."""
    x = x0.copy()
    work = np.zeros((6, x.shape[0]))
    sig = np.zeros(NSIG)
    dx = np.zeros(x.shape[0])
    qs = np.zeros(NQUERY)
    edges = np.array([p_start, p_end])
    tol = 1e-9 * h

    record(p, segs, modes, active, x, 0.0, pulse_value(0.0, p_start, p_end, p_mag),
           out[0], dx, sig)
    n_rows = 1
    for i in range(n_steps):
        t0 = i * h
        t1 = (i + 1) * h
        a = t0
        for j in range(2):
            e = edges[j]
            if e - a > tol and t1 - e > tol:
                advance(p, segs, modes, active, x, e - a,
                        pulse_value(0.5 * (a + e), p_start, p_end, p_mag), work, sig, qs)
                a = e
        advance(p, segs, modes, active, x, t1 - a,
                pulse_value(0.5 * (a + t1), p_start, p_end, p_mag), work, sig, qs)

        for k in range(x.shape[0]):
            if not math.isfinite(x[k]):
                return n_rows, STATUS_NONFINITE, t1
        if abs(x[SBETA]) >= 0.5 * math.pi:
            return n_rows, STATUS_BETA, t1
        _, d0, _ = geo.seg_project(segs, modes[Q_FOOT], x[SX], x[SY])
        if abs(d0) > CORRIDOR_M:
            return n_rows, STATUS_CORRIDOR, t1

        if (i + 1) % steps_per_log == 0 and n_rows < out.shape[0]:
            t_log = n_rows / log_rate
            record(p, segs, modes, active, x, t_log,
                   pulse_value(t_log, p_start, p_end, p_mag), out[n_rows], dx, sig)
            n_rows += 1
    return n_rows, STATUS_OK, n_steps * h
