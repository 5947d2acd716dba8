"""Command-line interface: ``sharedsteer <command> ...``.

Exit codes: 0 success, 2 configuration or data error, 3 dynamics abort,
4 identification did not converge.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from sharedsteer import config as cfg
from sharedsteer.course import build_thesis_course
from sharedsteer.driver import VISION_MODES
from sharedsteer.guidance import LEVELS
from sharedsteer.ident import IdentError, IdentProblem, format_result, pem_fit, write_trace
from sharedsteer.metrics import (
    LaneGeometry,
    MetricError,
    curve_section,
    metric_report,
    straight_section,
)
from sharedsteer.simloop import (
    ALL_COLUMNS,
    LogFormatError,
    ScenarioError,
    SimulationAbort,
    read_log_csv,
    run_condition_matrix,
    simulate,
    thread_limit,
)

EXIT_OK, EXIT_DATA, EXIT_ABORT, EXIT_NOCONV = 0, 2, 3, 4


SUMMARY_HEADER = (
    "label", "vision", "guidance", "status", "run_id",
    "curve_max_abs_lateral_offset_m", "straight_sdlp_m", "peak_abs_phi_rad",
)


def _err(msg, *args):
    print("error: " + (msg % args if args else msg), file=sys.stderr)


class UsageError(Exception):
    """Bad input detected by the CLI itself; maps to exit code 2."""


def _atomic_write(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _pulse_window(sc):
    return None if sc.pulse is None else (sc.pulse.start_time, sc.pulse.duration)


def _write_run(outdir, sc, simlog, extra=False):
    outdir.mkdir(parents=True, exist_ok=True)
    _atomic_write(outdir / "params.txt", cfg.snapshot(sc))
    _atomic_write(outdir / "log.csv", simlog.to_csv(extra=extra))
    if len(simlog) >= 2:
        report = metric_report(simlog, LaneGeometry(sc.course.lane_width), sc.course,
                               pulse=_pulse_window(sc), v=sc.vehicle.v)
        _atomic_write(outdir / "metrics.csv", report.to_csv(simlog.label or outdir.name))


def cmd_simulate(args):
    sc = cfg.load_scenario(args.config)
    out = Path(args.out)
    rid = cfg.run_id(sc)
    try:
        simlog = simulate(sc, label=rid)
    except SimulationAbort as exc:
        _write_run(out, sc, exc.log, args.extra_columns)
        _err("dynamics abort: %s (t_abort = %.4f s)", exc.reason, exc.t_abort)
        return EXIT_ABORT
    _write_run(out, sc, simlog, args.extra_columns)
    print(f"run {rid}: {len(simlog)} rows at {sc.log_rate:g} Hz -> {out / 'log.csv'}")
    return EXIT_OK


def _split_list(text, allowed, what):
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise UsageError(f"empty {what} list")
    bad = [t for t in items if t not in allowed]
    if bad:
        raise UsageError(f"unknown {what} {bad[0]!r}; expected one of {list(allowed)}")
    return items


def _summary_values(simlog, course):
    s = simlog.s_foot
    a, b = curve_section(course)
    curve = (s >= a) & (s <= b)
    _, b = straight_section(course)
    straight = s < b
    lat = simlog.lateral_offset
    curve_max = float(np.max(np.abs(lat[curve]))) if curve.any() else math.nan
    sd = float(np.std(lat[straight], ddof=1)) if straight.sum() >= 2 else math.nan
    return curve_max, sd, float(np.max(np.abs(simlog.phi)))


def cmd_matrix(args):
    base = cfg.load_scenario(args.config)
    visions = _split_list(args.vision, VISION_MODES, "vision mode")
    levels = _split_list(args.guidance, tuple(LEVELS), "guidance level")
    conditions = [(v, g) for v in visions for g in levels]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = run_condition_matrix(base, conditions, max_workers=thread_limit())
    from sharedsteer.simloop import condition_scenario

    rows = []
    ok = 0
    for (vision, level), (label, res) in zip(conditions, results):
        sc = condition_scenario(base, vision, level)
        rid = cfg.run_id(sc)
        cell = out / f"{vision}__{level}"
        if isinstance(res, Exception):
            if isinstance(res, SimulationAbort):
                _write_run(cell, sc, res.log)
            status = f"error: {res}".replace(",", ";")
            rows.append((label, vision, level, status, rid, "", "", ""))
            _err("%s: %s", label, res)
            continue
        _write_run(cell, sc, res)
        ok += 1
        vals = _summary_values(res, sc.course)
        rows.append((label, vision, level, "ok", rid) + tuple(f"{v:.9g}" for v in vals))
    text = ",".join(SUMMARY_HEADER) + "\n" + "".join(",".join(r) + "\n" for r in rows)
    _atomic_write(out / "summary.csv", text)
    print(f"{ok}/{len(rows)} cells succeeded -> {out / 'summary.csv'}")
    return EXIT_OK if ok else EXIT_ABORT


def _read_series_csv(path, columns):
    simlog = read_log_csv(path, required=columns)
    return np.column_stack([getattr(simlog, c) for c in columns[1:]]), simlog.log_rate


def cmd_metrics(args):
    simlog = read_log_csv(args.log, required=("t", "phi", "lateral_offset"))
    if len(simlog) < 2:
        raise UsageError(f"{args.log}: need at least 2 samples")
    course = cfg.load_scenario(args.config).course if args.config else build_thesis_course()
    geom = LaneGeometry(args.lane_width if args.lane_width is not None else course.lane_width)
    pulse = (args.pulse_start, args.pulse_duration) if args.pulse_start is not None else None
    gaze = eyelid = None
    if args.gaze:
        gaze, _ = _read_series_csv(args.gaze, ("t", "yaw_deg", "pitch_deg"))
    if args.eyelid:
        eyelid, _ = _read_series_csv(args.eyelid, ("t", "openness"))
        eyelid = eyelid[:, 0]
    report = metric_report(simlog, geom, course, pulse=pulse, gaze=gaze, eyelid=eyelid)
    text = report.to_csv(simlog.label) if str(args.report).endswith(".csv") else report.to_text()
    Path(args.report).parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(args.report, text)
    print(report.to_text(), end="")
    return EXIT_OK


def cmd_identify(args):
    kw, output = cfg.load_ident_init(args.init) if args.init else ({}, None)
    simlog = read_log_csv(args.log, required=("t", "e_y", "e_theta", "phi", "T_h", "T_d"))
    output = args.output or output or ("phi_target" if "phi_target" in simlog else "phi")
    if output not in simlog:
        raise UsageError(f"{args.log}: missing column {output}")
    prob = IdentProblem.from_log(simlog, output=output, **kw)
    result = pem_fit(prob, max_workers=thread_limit())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "params.txt", f"output_channel = {output}\n" + format_result(result))
    write_trace(out / "trace.csv", result)
    print(format_result(result), end="")
    if not result.converged:
        _err("identification stopped at the iteration cap without meeting the stopping rule")
        return EXIT_NOCONV
    return EXIT_OK


def cmd_plotdata(args):
    signals = [s.strip() for s in args.signals.split(",") if s.strip()]
    bad = [s for s in signals if s not in ALL_COLUMNS or s == "t"]
    if bad or not signals:
        valid = ", ".join(c for c in ALL_COLUMNS if c != "t")
        raise UsageError(f"unknown signal {bad[0] if bad else ''!r}; valid names: {valid}")
    logs = []
    for run in args.runs:
        path = Path(run) / "log.csv" if Path(run).is_dir() else Path(run)
        logs.append((Path(run).name if Path(run).is_dir() else path.stem,
                     read_log_csv(path, required=("t", *signals))))
    rates = {round(lg.log_rate, 6) for _, lg in logs}
    if len(rates) > 1:
        raise UsageError(f"runs have different log rates: {sorted(rates)}")
    n = min(len(lg) for _, lg in logs)
    t = logs[0][1].t[:n]
    for name, lg in logs[1:]:
        if not np.allclose(lg.t[:n], t, rtol=0, atol=1e-6):
            raise UsageError(f"run {name} does not share the time base of {logs[0][0]}")
    names = [name for name, _ in logs]
    if len(set(names)) != len(names):
        names = [f"{i}_{nm}" for i, nm in enumerate(names)]
    header = ["t"] + [f"{nm}:{s}" for nm, _ in zip(names, logs) for s in signals]
    cols = [t] + [lg.columns[s][:n] for _, lg in logs for s in signals]
    data = np.column_stack(cols)
    text = ",".join(header) + "\n" + "".join(",".join(f"{v:.9g}" for v in row) + "\n" for row in data)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(args.out, text)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="sharedsteer", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one scenario")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--extra-columns", action="store_true",
                   help="append internal signals (target angle, ...) to log.csv")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("matrix", help="run a vision x guidance grid")
    s.add_argument("--config", required=True)
    s.add_argument("--vision", required=True, help=f"comma list of {', '.join(VISION_MODES)}")
    s.add_argument("--guidance", required=True, help=f"comma list of {', '.join(LEVELS)}")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_matrix)

    s = sub.add_parser("metrics", help="metric report for a log CSV")
    s.add_argument("--log", required=True)
    s.add_argument("--lane-width", type=float, default=None, help="lane width [m]")
    s.add_argument("--report", required=True)
    s.add_argument("--gaze")
    s.add_argument("--eyelid")
    s.add_argument("--config", help="scenario config supplying the course")
    s.add_argument("--pulse-start", type=float, help="pulse onset [s] for sdlp_var")
    s.add_argument("--pulse-duration", type=float, default=2.0)
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("identify", help="fit driver-model parameters to a log")
    s.add_argument("--log", required=True)
    s.add_argument("--init", help="TOML with an [ident] table")
    s.add_argument("--out", required=True)
    s.add_argument("--output", help="column used as the angle output (default phi_target if present, else phi)")
    s.set_defaults(func=cmd_identify)

    s = sub.add_parser("plotdata", help="align signals of several runs in one CSV")
    s.add_argument("--runs", nargs="+", required=True)
    s.add_argument("--signals", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plotdata)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (cfg.ConfigError, LogFormatError, UsageError, ScenarioError, MetricError, IdentError) as exc:
        _err("%s", exc)
        return EXIT_DATA
    except OSError as exc:
        _err("%s: %s", getattr(exc, "filename", "") or "", exc.strerror or exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
