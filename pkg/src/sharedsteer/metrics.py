"""Lane-keeping, steering and gaze metrics over simulated or recorded logs."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from sharedsteer import _metrickernel as MK
from sharedsteer._jit import HAVE_NUMBA
from sharedsteer.course import build_thesis_course

DEG = math.pi / 180.0
DEFAULT_ALPHA = 3.0 * DEG
DEFAULT_TURN_THRESHOLD = 3.0 * DEG
TLC_STEP_M = 0.1
CURVE_MARGIN_M = 50.0


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class LaneGeometry:
    lane_width: float = 3.6
    boundary_threshold: float = 0.1

    def __post_init__(self):
        if not self.lane_width > 0:
            raise MetricError("lane_width must be positive")
        if not 0 < self.boundary_threshold < self.lane_width / 2:
            raise MetricError("boundary_threshold must lie in (0, lane_width/2)")


def sdlp(lateral_positions):
    x = np.asarray(lateral_positions, dtype=float)
    if x.size < 2:
        raise MetricError("sdlp needs at least 2 samples")
    # centre on the first sample so a constant series gives exactly 0
    return float(np.std(x - x[0], ddof=1))


def male(lateral_errors):
    e = np.asarray(lateral_errors, dtype=float)
    if e.size == 0:
        raise MetricError("male of an empty series")
    return float(np.mean(np.abs(e)))


def sdlp_var(sdlp_before, sdlp_during):
    if not sdlp_before > 0:
        raise MetricError("sdlp_var needs a positive baseline")
    return (sdlp_during / sdlp_before - 1.0) * 100.0


def _speed(log):
    vx = np.diff(log.X) * log.log_rate
    vy = np.diff(log.Y) * log.log_rate
    return float(np.median(np.hypot(vx, vy)))


def tlc_series(log, geom=LaneGeometry(), horizon=20.0, course=None, v=None):
    """Time to lane crossing per sample (NaN where no crossing within ``horizon``).

    The predictive path starts along the velocity direction (heading plus side
    slip when ``beta`` is logged) and keeps the current yaw rate.
    """
    course = course or log.course or build_thesis_course()
    v = v if v is not None else _speed(log)
    if not v > 0:
        raise MetricError("speed must be positive for TLC")
    heading = log.psi + (log.beta if "beta" in log else 0.0)
    args = (
        course.table,
        np.ascontiguousarray(log.X, dtype=float),
        np.ascontiguousarray(log.Y, dtype=float),
        np.ascontiguousarray(heading, dtype=float),
        np.ascontiguousarray(log.r, dtype=float),
        float(v),
        geom.lane_width / 2.0,
        geom.boundary_threshold,
        TLC_STEP_M,
        horizon * v,
    )
    dlc = MK.dlc_series(*args) if HAVE_NUMBA else MK.dlc_series_numpy(*args)
    return dlc / v


def tlc_low10_mean(tlc):
    """Mean of the lowest 10% of present samples; None with fewer than 10."""
    present = np.sort(np.asarray(tlc, dtype=float)[~np.isnan(tlc)])
    if present.size < 10:
        return None
    return float(np.mean(present[: int(math.ceil(0.1 * present.size))]))


def swrr(steering_angles, duration, alpha=DEFAULT_ALPHA):
    """Steering reversals per minute by the gap (from-extremum) rule."""
    if not duration > 0:
        raise MetricError("duration must be positive")
    x = np.asarray(steering_angles, dtype=float)
    return reversal_count(x, alpha) * 60.0 / duration


def reversal_count(x, alpha):
    if x.size == 0:
        return 0
    direction = 0
    hi = lo = ext = x[0]
    count = 0
    for v in x[1:]:
        if direction == 0:
            hi, lo = max(hi, v), min(lo, v)
            if v - lo >= alpha:
                direction, ext = 1, v
            elif hi - v >= alpha:
                direction, ext = -1, v
        elif direction > 0:
            if v > ext:
                ext = v
            elif ext - v >= alpha:
                direction, ext, count = -1, v, count + 1
        else:
            if v < ext:
                ext = v
            elif v - ext >= alpha:
                direction, ext, count = 1, v, count + 1
    return count


def turn_start(log, junction_s, threshold=DEFAULT_TURN_THRESHOLD, baseline=0.0, window_m=100.0):
    """Signed distance from the junction to the onset of the turning manoeuvre.

    Onset is the first sample with ``s_foot >= junction_s - window_m`` where
    ``|phi - baseline|`` reaches ``threshold``. ``baseline`` lets the same rule
    find the unwinding when leaving a curve.
    """
    s = np.asarray(log.s_foot, dtype=float)
    phi = np.asarray(log.phi, dtype=float)
    if s.size == 0 or s[0] > junction_s or s[-1] < junction_s:
        raise MetricError("log does not span the junction")
    start = np.flatnonzero(s >= junction_s - window_m)[0] if window_m is not None else 0
    hit = np.flatnonzero(np.abs(phi[start:] - baseline) >= threshold)
    if hit.size == 0:
        raise MetricError("no crossing of the turning threshold")
    return float(s[start + hit[0]] - junction_s)


def perclos_p80(openness, rate):
    """Percent of samples with openness <= 0.2 in each 60 s window.

    The final window may be partial.
    """
    if not rate > 0:
        raise MetricError("rate must be positive")
    o = np.asarray(openness, dtype=float)
    if o.size == 0:
        raise MetricError("perclos of an empty series")
    n = int(round(60.0 * rate))
    closed = o <= 0.2
    return np.array([100.0 * np.mean(closed[i : i + n]) for i in range(0, o.size, n)])


def prc(gaze_deg, radius=6.0, bin_deg=0.5):
    """Percent of gaze samples within ``radius`` of the modal gaze direction."""
    g = np.asarray(gaze_deg, dtype=float).reshape(-1, 2)
    if g.shape[0] == 0:
        raise MetricError("prc of an empty series")
    cells = np.floor(g / bin_deg).astype(np.int64)
    uniq, first, inverse, counts = np.unique(cells, axis=0, return_index=True, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    top = np.flatnonzero(counts == counts.max())
    best = top[np.argmin(first[top])]  # first-seen among ties
    center = g[inverse == best].mean(axis=0)
    dist = np.hypot(g[:, 0] - center[0], g[:, 1] - center[1])
    return float(100.0 * np.mean(dist <= radius + 1e-9))


@dataclass
class MetricReport:
    sdlp: float
    male: float
    tlc_low10_mean: Optional[float]
    swrr: float
    sdlp_var: Optional[float]
    turn_start_offsets: list
    perclos: Optional[float] = None
    prc: Optional[float] = None

    def items(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("perclos", "prc") and v is None:
                continue
            if f.name == "turn_start_offsets":
                v = ";".join(_fmt(x) for x in v)
            else:
                v = _fmt(v)
            yield f.name, v

    def to_text(self):
        return "".join(f"{k} = {v}\n" for k, v in self.items())

    def to_csv(self, label=""):
        keys, vals = zip(*self.items())
        return "label," + ",".join(keys) + "\n" + f"{label}," + ",".join(vals) + "\n"


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return f"{float(v):.9g}"


def metric_report(log, geom=LaneGeometry(), course=None, pulse=None, gaze=None, eyelid=None, v=None):
    """Summary metrics for one log.

    ``pulse`` is ``(start_time, duration)``; when given, ``sdlp_var`` compares
    the lateral position during the ten seconds from the pulse onset with the
    ten seconds before it.
    """
    course = course or log.course or build_thesis_course()
    lat = log.lateral_offset
    tlc = None
    if all(c in log for c in ("X", "Y", "psi", "r")):
        tlc = tlc_low10_mean(tlc_series(log, geom, course=course, v=v))
    var = None
    if pulse is not None:
        t0 = pulse[0]
        before = lat[(log.t >= t0 - 10.0) & (log.t < t0)]
        during = lat[(log.t >= t0) & (log.t < t0 + 10.0)]
        # a quiescent baseline leaves the ratio undefined
        if before.size >= 2 and during.size >= 2 and sdlp(before) > 0:
            var = sdlp_var(sdlp(before), sdlp(during))
    offsets = []
    if "s_foot" in log and "phi" in log:
        offsets = turn_offsets(log, course)
    report = MetricReport(
        sdlp=sdlp(lat),
        male=male(lat),
        tlc_low10_mean=tlc,
        swrr=swrr(log.phi, max(log.duration, 1.0 / log.log_rate)),
        sdlp_var=var,
        turn_start_offsets=offsets,
    )
    if eyelid is not None:
        o = np.asarray(eyelid, dtype=float)
        if o.size == 0:
            raise MetricError("perclos of an empty series")
        # whole-record fraction: the sample-weighted mean of the windows
        report.perclos = float(100.0 * np.mean(o <= 0.2))
    if gaze is not None:
        report.prc = prc(gaze)
    return report


def turn_offsets(log, course):
    """Turn-onset offsets at each straight/arc junction the log spans.

    Entering a curve uses a zero baseline; leaving it uses the median wheel
    angle along the curve. Junctions without a crossing give NaN.
    """
    out = []
    table = course.table
    for k in range(1, table.shape[0]):
        js = table[k, 0]
        entering = table[k, 5] != 0.0
        base = 0.0
        if not entering:
            on_arc = (log.s_foot >= table[k - 1, 0]) & (log.s_foot < js)
            if not np.any(on_arc):
                out.append(math.nan)
                continue
            base = float(np.median(log.phi[on_arc]))
        try:
            out.append(turn_start(log, js, baseline=base))
        except MetricError:
            out.append(math.nan)
    return out


def curve_section(course, margin=0.0):
    """Arc-length interval of the first curve, optionally padded."""
    table = course.table
    arcs = np.flatnonzero(table[:, 5] != 0.0)
    if arcs.size == 0:
        raise MetricError("course has no curve")
    k = arcs[0]
    return table[k, 0] - margin, table[k, 0] + table[k, 1] + margin


def straight_section(course, margin=CURVE_MARGIN_M):
    """Lead-in straight, stopping ``margin`` short of the first curve."""
    table = course.table
    arcs = np.flatnonzero(table[:, 5] != 0.0)
    end = table[arcs[0], 0] - margin if arcs.size else table[-1, 0] + table[-1, 1]
    return 0.0, end


def settling_time(t, x, t0, band=0.05):
    """Time from ``t0`` until ``|x|`` stays within ``band`` of its peak after ``t0``.

    Returns ``inf`` when the signal is still outside the band at the last sample.
    """
    t = np.asarray(t, dtype=float)
    x = np.abs(np.asarray(x, dtype=float))
    m = t >= t0
    if not np.any(m):
        raise MetricError("no samples after t0")
    tt, xx = t[m], x[m]
    peak = xx.max()
    if peak == 0.0:
        return 0.0
    out = np.flatnonzero(xx > band * peak)
    if out[-1] == xx.size - 1:
        return math.inf
    return float(tt[out[-1] + 1] - t0)
