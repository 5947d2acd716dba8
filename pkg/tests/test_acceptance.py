"""Acceptance suite: one test per criterion, one PASS/FAIL line per criterion.

Run under pytest (the lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""

import math
import os
import sys
import time
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))
from conftest import ACCEPTANCE_RESULTS  # noqa: E402

from sharedsteer.course import PreviewErrors, straight_course  # noqa: E402
from sharedsteer.driver import DRIVER_PRESETS, DriverParams, DriverState, NeuromuscularParams  # noqa: E402
from sharedsteer.driver import neuromuscular_step, pade_delay_step  # noqa: E402
from sharedsteer.guidance import HAPTIC_PRESETS, haptic_torque  # noqa: E402
from sharedsteer.ident import DEFAULT_BOUNDS, IdentProblem, pem_fit  # noqa: E402
from sharedsteer.metrics import (  # noqa: E402
    LaneGeometry,
    curve_section,
    perclos_p80,
    sdlp,
    sdlp_var,
    settling_time,
    straight_section,
    swrr,
    tlc_series,
)
from sharedsteer.plant import PlantInputs, PlantState, VehicleParams, aligning_coefficient  # noqa: E402
from sharedsteer.plant import plant_derivative  # noqa: E402
from sharedsteer.simloop import Pulse, Scenario, SimLog, condition_scenario, simulate  # noqa: E402

DEG = math.pi / 180
VP = VehicleParams()
BASE = Scenario(pulse=Pulse())  # default course, 1 N m pulse for 2 s at t = 30 s


def record(n, ok, detail):
    ACCEPTANCE_RESULTS[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    return ok


def curve_mask(log):
    a, b = curve_section(log.course)
    return (log.s_foot >= a) & (log.s_foot <= b)


def entry_mask(log):
    # approaching the curve through the first half of the arc
    j = log.course.junctions[0]
    half = 0.5 * log.course.table[1, 1]
    return (log.s_foot >= j - 50.0) & (log.s_foot <= j + half)


def post_pulse_mask(log):
    _, end = straight_section(log.course)
    return (log.t >= BASE.pulse.start_time) & (log.s_foot < end)


def timed_sim(vision, level):
    t0 = time.perf_counter()
    log = simulate(condition_scenario(BASE, vision, level))
    return log, time.perf_counter() - t0


# -- 1 ------------------------------------------------------------------------

def criterion_1():
    delta = 1.0 * DEG
    t0 = time.perf_counter()
    h, n = 5e-3, 4000  # 20 s
    z = PlantState(phi=delta / VP.K_t).to_array()
    inp = PlantInputs()

    def f(a):
        d = plant_derivative(VP, PlantState.from_array(a), inp).to_array()
        d[5] = d[6] = 0.0  # wheel held at the step
        return d

    for _ in range(n):
        k1 = f(z)
        k2 = f(z + 0.5 * h * k1)
        k3 = f(z + 0.5 * h * k2)
        k4 = f(z + h * k3)
        z = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    runtime = time.perf_counter() - t0
    # steady state of the two lateral equations, solved by hand (Cramer)
    m, v, I = VP.m, VP.v, VP.I
    a11, a12 = 2 * (VP.K_f + VP.K_r), m * v + 2 / v * (VP.l_f * VP.K_f - VP.l_r * VP.K_r)
    a21, a22 = 2 * (VP.l_f * VP.K_f - VP.l_r * VP.K_r), 2 * (VP.l_f**2 * VP.K_f + VP.l_r**2 * VP.K_r) / v
    b1, b2 = 2 * VP.K_f * delta, 2 * VP.l_f * VP.K_f * delta
    det = a11 * a22 - a12 * a21
    beta, r = (b1 * a22 - a12 * b2) / det, (a11 * b2 - a21 * b1) / det
    eb, er = abs(z[3] / beta - 1), abs(z[4] / r - 1)
    ok = eb < 1e-3 and er < 1e-3 and runtime < 1.0
    return ok, f"rel err beta {eb:.2e}, r {er:.2e} (< 1e-3); runtime {runtime:.2f} s (< 1 s)"


# -- 2 ------------------------------------------------------------------------

def criterion_2():
    Et, Kf, Kt, Ks = Fraction("0.026"), Fraction(53300), Fraction(1, 17), Fraction(48510)
    hand = float(2 * Et * Kf * Kt / (1 + 2 * Et * Kf / Ks))
    got = aligning_coefficient(VP)
    ok = f"{got:.6g}" == f"{hand:.6g}" and f"{got:.4g}" == "154.2"
    return ok, f"K_aln = {got:.6g} vs hand {hand:.6g} N m/rad"


# -- 3 ------------------------------------------------------------------------

def criterion_3():
    dp = DriverParams(t_p=0.1)
    dt = 1e-3
    ds = DriverState()
    for _ in range(3000):
        y, ds = pade_delay_step(dp, ds, 1.0, dt)
    dc = y
    y0, _ = pade_delay_step(dp, DriverState(), 1.0, dt)
    w = 1.0
    ds = DriverState()
    n = 60000
    t = np.arange(n) * dt
    ys = np.empty(n)
    for k in range(n):
        ys[k], ds = pade_delay_step(dp, ds, math.sin(w * t[k]), dt)
    m = t > 30
    X = np.column_stack([np.sin(w * t[m]), np.cos(w * t[m])])
    a, b = np.linalg.lstsq(X, ys[m], rcond=None)[0]
    phase_err = abs(math.degrees(math.atan2(b, a) + w * dp.t_p))
    ok = abs(dc - 1) <= 1e-9 and abs(y0 + 1) <= 1e-6 and phase_err < 0.2
    return ok, f"DC {dc:.12f}, initial {y0:.9f}, phase error {phase_err:.4f} deg"


# -- 4 ------------------------------------------------------------------------

def criterion_4():
    hp = HAPTIC_PRESETS["ch4"]
    rng = np.random.default_rng(2024)
    v = rng.standard_normal((10_000, 4)) * [2.0, 2.0, 0.3, 0.5]
    vals = np.array([haptic_torque(hp, PreviewErrors(a, b), c, d) for a, c, b, d in v])
    big = [haptic_torque(hp, PreviewErrors(s * 100.0, 0.0), 0.0, 0.0) for s in (1, -1)]
    ok = np.all(np.abs(vals) <= 5.0) and np.any(np.abs(vals) == 5.0) and big == [-5.0, 5.0]
    return ok, f"max |T_h| {np.max(np.abs(vals)):.6f}, saturated {int(np.sum(np.abs(vals) == 5.0))}/10000"


# -- 5 ------------------------------------------------------------------------

def criterion_5():
    worst = 0.0
    for k_hf in (0.0, 0.25, 0.5, 0.75, 1.0):
        nmp = NeuromuscularParams(K_d=3.2, K_hf=k_hf)
        sums = []
        for th in (0.0, 1.0):
            ds = DriverState()
            for _ in range(1000):
                _, ds = neuromuscular_step(nmp, ds, 0.05, 0.02, th, 0.01)
            sums.append(ds.x_nms + th)
        worst = max(worst, abs((sums[1] - sums[0]) - (1 - k_hf)))
    return worst <= 1e-9, f"max |d(T_d+T_h)/dT_h - (1-K_hf)| = {worst:.2e}"


# -- 6 ------------------------------------------------------------------------

def criterion_6():
    worst = 0.0
    for vision in DRIVER_PRESETS:
        for level in ("none", "normal"):
            sc = condition_scenario(Scenario(course=straight_course(1200), t_end=60.0), vision, level)
            worst = max(worst, float(np.max(np.abs(simulate(sc).lateral_offset))))
    return worst < 1e-9, f"max |lateral_offset| over 60 s, 6 conditions: {worst:.1e} m"


# -- 7 ------------------------------------------------------------------------

def criterion_7():
    normal, t_n = timed_sim("normal", "none")
    low, t_l = timed_sim("low_visibility", "none")
    pk_n = np.max(np.abs(normal.phi[entry_mask(normal)]))
    pk_l = np.max(np.abs(low.phi[entry_mask(low)]))
    cm_n = np.max(np.abs(normal.lateral_offset[curve_mask(normal)]))
    cm_l = np.max(np.abs(low.lateral_offset[curve_mask(low)]))
    ratio = pk_l / pk_n
    ok_a, ok_b, ok_t = ratio >= 1.3, cm_l > cm_n, max(t_n, t_l) < 10
    detail = (f"(a) entry peak ratio {ratio:.3f} (>= 1.3: {'yes' if ok_a else 'NO'}); "
              f"(b) curve max {cm_l:.3f} > {cm_n:.3f} m: {'yes' if ok_b else 'NO'}; "
              f"runtime {max(t_n, t_l):.2f} s")
    return ok_a and ok_b and ok_t, detail


# -- 8 ------------------------------------------------------------------------

def criterion_8():
    manual, _ = timed_sim("low_visibility", "none")
    assisted, _ = timed_sim("low_visibility", "normal")
    cm_m = np.max(np.abs(manual.lateral_offset[curve_mask(manual)]))
    cm_a = np.max(np.abs(assisted.lateral_offset[curve_mask(assisted)]))
    mm, ma = curve_mask(manual), curve_mask(assisted)
    sw_m = swrr(manual.phi[mm], mm.sum() / manual.log_rate)
    sw_a = swrr(assisted.phi[ma], ma.sum() / assisted.log_rate)
    red = 1 - cm_a / cm_m
    ok = red >= 0.2 and sw_a < sw_m
    return ok, f"curve max reduced {100 * red:.1f}% (>= 20%); curve SWRR {sw_m:.2f} -> {sw_a:.2f} /min"


# -- 9 ------------------------------------------------------------------------

def criterion_9():
    manual, _ = timed_sim("declined_attention", "none")
    assisted, _ = timed_sim("declined_attention", "normal")
    out = []
    for log in (manual, assisted):
        m = post_pulse_mask(log)
        out.append((np.max(np.abs(log.lateral_offset[m])),
                    settling_time(log.t[m], log.lateral_offset[m], BASE.pulse.start_time)))
    (pm, sm), (pa, sa) = out
    ok = pa < pm and sa < sm
    return ok, f"post-pulse max {pm:.3f} -> {pa:.3f} m; 5% settling {sm:.2f} -> {sa:.2f} s"


# -- 10 -----------------------------------------------------------------------

def criterion_10():
    t0 = time.perf_counter()
    log = simulate(condition_scenario(BASE, "normal", "normal"))
    truth = {"a1": 0.1, "a4": 3.7, "K_d": 3.2, "K_hf": 0.5}
    # the simulator records the target angle, the model's second output
    clean = pem_fit(IdentProblem.from_log(log, output="phi_target"))
    prob = IdentProblem.from_log(log, output="phi_target")
    rng = np.random.default_rng(10)
    prob.y = prob.y + rng.standard_normal(prob.y.shape) * 0.05 * np.sqrt(np.mean(prob.y**2, axis=0))
    noisy = pem_fit(prob)
    runtime = time.perf_counter() - t0
    errs = {k: abs(noisy.theta_hat[k] - v) / (DEFAULT_BOUNDS[k][1] - DEFAULT_BOUNDS[k][0]) for k, v in truth.items()}
    ok = (clean.fit_Td >= 99.5 and clean.fit_phi >= 99.5 and max(errs.values()) <= 0.1 and runtime < 60)
    worst = max(errs, key=errs.get)
    return ok, (f"noiseless fits {clean.fit_Td:.2f}% / {clean.fit_phi:.2f}%; noisy worst error "
                f"{worst} {100 * errs[worst]:.2f}% of width (<= 10%); runtime {runtime:.1f} s")


# -- 11 -----------------------------------------------------------------------

def criterion_11():
    checks = {}
    checks["sdlp const"] = sdlp(np.full(50, 0.7)) == 0
    x = np.random.default_rng(0).standard_normal(200)
    checks["sdlp shift"] = abs(sdlp(x + 12.5) - sdlp(x)) < 1e-12
    checks["swrr monotone"] = swrr(np.linspace(-0.5, 0.5, 500), 60) == 0
    theta, v, geom = 0.05, 60 / 3.6, LaneGeometry(3.6, 0.1)
    log = SimLog({"t": [0.0], "X": [100.0], "Y": [0.0], "psi": [theta], "r": [0.0]}, 120, straight_course(2000))
    tlc = tlc_series(log, geom, v=v)[0]
    closed = ((3.6 / 2 - 0.1) / math.sin(theta)) / v
    checks["tlc"] = abs(tlc / closed - 1) < 0.01
    minute = np.r_[np.zeros(30 * 60), np.ones(30 * 60)]
    checks["perclos"] = np.allclose(perclos_p80(np.tile(minute, 2), 60), 50.0)
    checks["sdlp_var"] = abs(sdlp_var(0.2, 0.1) + 50) < 1e-12
    bad = [k for k, ok in checks.items() if not ok]
    return not bad, ("all 6 identities hold" if not bad else f"failed: {', '.join(bad)}") + f"; TLC {tlc:.4f} vs {closed:.4f} s"


# -- 12 -----------------------------------------------------------------------

def criterion_12():
    worst_diff = 0.0
    same = True
    for vision in DRIVER_PRESETS:
        sc = condition_scenario(BASE, vision, "normal")
        a, b = simulate(sc), simulate(sc)
        same &= a.to_csv(extra=True) == b.to_csv(extra=True)
        half = simulate(replace(sc, integrator_step=sc.integrator_step / 2))
        for c in a.columns:
            worst_diff = max(worst_diff, float(np.max(np.abs(a.columns[c] - half.columns[c]))))
    ok = same and worst_diff < 1e-6
    return ok, f"repeat runs byte-identical: {same}; step-halving max diff {worst_diff:.2e} (< 1e-6)"


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 13)}


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n):
    ok, detail = CRITERIA[n]()
    record(n, ok, detail)
    print(ACCEPTANCE_RESULTS[n])
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for n, fn in CRITERIA.items():
        ok, detail = fn()
        record(n, ok, detail)
        print(ACCEPTANCE_RESULTS[n], flush=True)
        failed += not ok
    sys.exit(1 if failed else 0)
