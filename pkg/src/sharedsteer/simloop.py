"""Deterministic closed-loop simulation of driver, guidance, column and vehicle."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from sharedsteer import _geometry as geo
from sharedsteer import _simkernel as K
from sharedsteer.course import Course, build_thesis_course
from sharedsteer.driver import (
    DRIVER_PRESETS,
    NEUROMUSCULAR_PRESETS,
    DriverParams,
    NeuromuscularParams,
    pack_driver,
)
from sharedsteer.guidance import HapticParams, guidance_level, pack_haptic
from sharedsteer.plant import VehicleParams, pack_vehicle

LOG_COLUMNS = (
    "t", "X", "Y", "psi", "beta", "r", "phi", "delta", "T_d", "T_h", "T_a",
    "e_y", "e_theta", "s_foot", "lateral_offset",
)
# internal signals kept in memory but not written to log.csv
EXTRA_COLUMNS = (
    "phi_target", "u_pre", "e_y_dot", "e_y_h", "e_theta_h", "T_ext", "x_int", "phi_dot",
)
ALL_COLUMNS = LOG_COLUMNS + EXTRA_COLUMNS

DEFAULT_STEP = 1.0 / 1200.0
DEFAULT_LOG_RATE = 120.0


class ScenarioError(ValueError):
    pass


class SimulationAbort(RuntimeError):
    """The run left the validity envelope of the linear model or the road."""

    def __init__(self, reason, t_abort, log):
        super().__init__(f"{reason} at t={t_abort:.4f} s")
        self.reason = reason
        self.t_abort = t_abort
        self.log = log


@dataclass(frozen=True)
class Pulse:
    start_time: float = 30.0
    duration: float = 2.0
    magnitude: float = 1.0


@dataclass(frozen=True)
class Scenario:
    course: Course = field(default_factory=build_thesis_course)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    driver: DriverParams = field(default_factory=lambda: DRIVER_PRESETS["normal"])
    neuromuscular: NeuromuscularParams = field(default_factory=lambda: NEUROMUSCULAR_PRESETS["manual"])
    haptic: Optional[HapticParams] = None
    pulse: Optional[Pulse] = None
    t_end: float = 100.0
    integrator_step: float = DEFAULT_STEP
    log_rate: float = DEFAULT_LOG_RATE

    def steps_per_log(self):
        ratio = 1.0 / (self.integrator_step * self.log_rate)
        n = round(ratio)
        if n < 1 or abs(ratio - n) > 1e-9 * n:
            raise ScenarioError(
                f"log_rate {self.log_rate} Hz does not divide 1/integrator_step "
                f"({1.0 / self.integrator_step:g} Hz)"
            )
        return n

    def validate(self):
        if not self.t_end > 0:
            raise ScenarioError("t_end must be positive")
        if not self.integrator_step > 0:
            raise ScenarioError("integrator_step must be positive")
        limit = min(self.driver.t_p, self.neuromuscular.t_nms) / 10.0
        if self.integrator_step > limit * (1 + 1e-12):
            raise ScenarioError(f"integrator_step {self.integrator_step} exceeds min(t_p, t_nms)/10 = {limit}")
        self.steps_per_log()
        if self.pulse is not None and not self.pulse.duration >= 0:
            raise ScenarioError("pulse duration must be non-negative")


class SimLog:
    """Fixed-rate signal record. Columns are exposed as attributes."""

    def __init__(self, columns, log_rate, course=None, label=""):
        self.columns = {k: np.asarray(v, dtype=float) for k, v in columns.items()}
        self.log_rate = float(log_rate)
        self.course = course
        self.label = label

    def __getattr__(self, name):
        cols = self.__dict__.get("columns")
        if cols is not None and name in cols:
            return cols[name]
        raise AttributeError(name)

    def __len__(self):
        return len(self.columns["t"])

    def __contains__(self, name):
        return name in self.columns

    def __eq__(self, other):
        if not isinstance(other, SimLog) or self.columns.keys() != other.columns.keys():
            return False
        return all(np.array_equal(v, other.columns[k]) for k, v in self.columns.items())

    @property
    def duration(self):
        return float(self.t[-1] - self.t[0]) if len(self) else 0.0

    def slice(self, mask):
        return SimLog({k: v[mask] for k, v in self.columns.items()}, self.log_rate, self.course, self.label)

    def to_csv(self, path=None, extra=False):
        """Serialize the standard columns; returns the text when ``path`` is None.

        With ``extra`` the internal signals present in the log are appended
        after the standard header.
        """
        cols = list(LOG_COLUMNS)
        if extra:
            cols += [c for c in EXTRA_COLUMNS if c in self.columns]
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        data = np.column_stack([self.columns[c] for c in cols])
        for row in data:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        text = buf.getvalue()
        if path is None:
            return text
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
        return text


def _fmt(v):
    s = "%.9g" % v
    return "0" if s == "-0" else s


class LogFormatError(ValueError):
    pass


def read_log_csv(path, required=("t",)):
    """Load a log CSV. Unknown columns are kept; ``required`` must be present."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise LogFormatError(f"{path}: empty file") from None
        missing = [c for c in required if c not in header]
        if missing:
            raise LogFormatError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise LogFormatError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise LogFormatError(f"{path}: line {lineno}: non-numeric value") from None
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    cols = {h: data[:, i] for i, h in enumerate(header)}
    t = cols["t"]
    rate = DEFAULT_LOG_RATE
    if len(t) > 1 and t[-1] > t[0]:
        rate = (len(t) - 1) / (t[-1] - t[0])
        # timestamps carry 9 significant digits; snap to the intended integer rate
        if abs(rate - round(rate)) < 1e-6 * rate:
            rate = float(round(rate))
    return SimLog(cols, rate, label=os.path.basename(os.path.dirname(os.path.abspath(path))))


def pack_scenario(sc):
    p = np.zeros(K.NPARAM)
    pack_vehicle(sc.vehicle, p)
    pack_driver(sc.driver, sc.neuromuscular, p)
    pack_haptic(sc.haptic, p)
    if sc.haptic is None:
        # keep the unused haptic queries on valid geometry
        p[K.HTN] = sc.driver.t_n
        p[K.HTF] = sc.driver.t_f
    return p


def haptic_active(sc):
    return sc.haptic is not None and sc.haptic.K1 > 0.0


def initial_state(sc):
    x0 = np.zeros(K.NSTATE)
    ox, oy, oh = sc.course.origin
    x0[K.SX], x0[K.SY], x0[K.SPSI] = ox, oy, oh
    return x0


def initial_modes(sc, p, x0):
    segs = sc.course.table
    v = p[K.V]
    s_foot, _, k_foot = geo.closest_point(segs, x0[K.SX], x0[K.SY])
    c, s = math.cos(x0[K.SPSI]), math.sin(x0[K.SPSI])
    _, _, k_near = geo.closest_point(segs, x0[K.SX] + v * p[K.TN] * c, x0[K.SY] + v * p[K.TN] * s)
    _, _, k_hnear = geo.closest_point(segs, x0[K.SX] + v * p[K.HTN] * c, x0[K.SY] + v * p[K.HTN] * s)
    return np.array([
        k_foot,
        k_near,
        geo.segment_index(segs, s_foot + v * p[K.TF]),
        k_hnear,
        geo.segment_index(segs, s_foot + v * p[K.HTF]),
    ], dtype=np.int64)


def simulate(sc, label=""):
    """Integrate the closed loop with fixed-step RK4 and return the log.

    Raises :class:`SimulationAbort` (carrying the partial log) when the side
    slip reaches pi/2 or the vehicle strays more than 50 m from the road.
    """
    sc.validate()
    h = sc.integrator_step
    spl = sc.steps_per_log()
    n_steps = int(round(sc.t_end / h))
    p = pack_scenario(sc)
    x0 = initial_state(sc)
    modes = initial_modes(sc, p, x0)
    hap = haptic_active(sc)
    active = np.array([True, True, sc.driver.far_point_enabled, hap, hap])
    if sc.pulse is not None:
        ps, pe, pm = sc.pulse.start_time, sc.pulse.start_time + sc.pulse.duration, sc.pulse.magnitude
    else:
        ps, pe, pm = math.inf, math.inf, 0.0
    out = np.zeros((n_steps // spl + 1, K.NCOL))
    n_rows, status, t_abort = K.run_loop(
        p, sc.course.table, modes, active, x0, h, n_steps, spl, float(sc.log_rate), ps, pe, pm, out
    )
    data = out[:n_rows]
    log = SimLog({c: data[:, i] for i, c in enumerate(ALL_COLUMNS)}, sc.log_rate, sc.course, label)
    if status == K.STATUS_BETA:
        raise SimulationAbort("side-slip guard |beta| >= pi/2", t_abort, log)
    if status == K.STATUS_CORRIDOR:
        raise SimulationAbort("vehicle left the 50 m course corridor", t_abort, log)
    if status == K.STATUS_NONFINITE:
        raise SimulationAbort("non-finite state", t_abort, log)
    return log


def condition_scenario(base, vision, level):
    """Scenario for one cell of the vision-mode x guidance-level grid.

    Manual cells use the manual neuromuscular preset and no guidance; assisted
    cells use the assisted preset and the base haptic gains at ``level``.
    """
    driver = DRIVER_PRESETS[vision]
    if level == "none":
        return replace(base, driver=driver, neuromuscular=NEUROMUSCULAR_PRESETS["manual"], haptic=None)
    haptic = guidance_level(base.haptic or HapticParams(), level)
    return replace(base, driver=driver, neuromuscular=NEUROMUSCULAR_PRESETS["assisted"], haptic=haptic)


def thread_limit():
    try:
        return max(1, int(os.environ.get("SIM_THREADS", "1")))
    except ValueError:
        return 1


def run_condition_matrix(base, conditions, max_workers=None):
    """Run every ``(vision, level)`` condition from the same initial state.

    Returns ``[(label, SimLog or exception), ...]`` in input order; a failing
    cell does not affect the others.
    """
    cells = [(f"{vision}/{level}", condition_scenario(base, vision, level)) for vision, level in conditions]

    def run(cell):
        label, sc = cell
        try:
            return label, simulate(sc, label=label)
        except (SimulationAbort, ScenarioError) as exc:
            return label, exc

    workers = max_workers or thread_limit()
    if workers <= 1 or len(cells) <= 1:
        return [run(c) for c in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, cells))
