"""Scenario configuration files (TOML).

A config has the sections ``[course]``, ``[vehicle]``, ``[driver]``,
``[neuromuscular]``, ``[haptic]``, ``[pulse]`` and ``[run]``. Any section may be
replaced by a preset reference, e.g. ``driver = "preset:low_visibility"``, or
name a preset inside the table (``preset = "assisted"``) and override fields.
Unknown keys are errors. Keys carrying a physical unit end in it
(``_m``, ``_s``, ``_Nm``, ``_Hz``); vehicle fields keep their symbol names.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import fields, replace

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from sharedsteer.course import Course, CourseError, Segment, build_thesis_course
from sharedsteer.driver import DRIVER_PRESETS, NEUROMUSCULAR_PRESETS, DriverParams, NeuromuscularParams
from sharedsteer.guidance import HAPTIC_PRESETS, LEVELS, HapticParams, guidance_level
from sharedsteer.ident import DEFAULT_BOUNDS, DEFAULT_FIXED, DEFAULT_THETA, PARAM_NAMES
from sharedsteer.plant import ParameterError, VehicleParams
from sharedsteer.simloop import Pulse, Scenario, ScenarioError

SECTIONS = ("course", "vehicle", "driver", "neuromuscular", "haptic", "pulse", "run")


class ConfigError(ValueError):
    pass


# config key -> dataclass field
DRIVER_KEYS = {
    "a1": "a1", "a2": "a2", "a3": "a3", "a4": "a4",
    "t_n_s": "t_n", "t_f_s": "t_f", "t_p_s": "t_p", "far_point_enabled": "far_point_enabled",
}
NMS_KEYS = {"K_d": "K_d", "K_hf": "K_hf", "K_nms": "K_nms", "t_nms_s": "t_nms"}
HAPTIC_KEYS = {
    "a1p": "a1p", "a2p": "a2p", "a3p": "a3p", "a4p": "a4p", "K1": "K1",
    "t_n_h_s": "t_n_h", "t_f_h_s": "t_f_h", "torque_limit_Nm": "torque_limit",
}
VEHICLE_KEYS = {f.name: f.name for f in fields(VehicleParams)}
PULSE_KEYS = {"start_time_s": "start_time", "duration_s": "duration", "magnitude_Nm": "magnitude"}
RUN_KEYS = {"t_end_s": "t_end", "integrator_step_s": "integrator_step", "log_rate_Hz": "log_rate"}

COURSE_PRESETS = {"thesis": build_thesis_course}
VEHICLE_PRESETS = {"default": VehicleParams}


def load_toml(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _preset_ref(value, section):
    if isinstance(value, str):
        if not value.startswith("preset:"):
            raise ConfigError(f"{section}: expected a table or 'preset:<name>', got {value!r}")
        return value[len("preset:"):], {}
    if not isinstance(value, dict):
        raise ConfigError(f"{section}: expected a table")
    body = dict(value)
    return body.pop("preset", None), body


def _lookup(presets, name, section):
    if name not in presets:
        raise ConfigError(f"{section}: unknown preset {name!r}; expected one of {sorted(presets)}")
    return presets[name]


def _overrides(body, keymap, section):
    out = {}
    for key, val in body.items():
        if key not in keymap:
            raise ConfigError(f"{section}.{key}: unknown key; expected one of {sorted(keymap)}")
        if isinstance(val, bool) != (keymap[key] == "far_point_enabled"):
            raise ConfigError(f"{section}.{key}: wrong value type")
        if not isinstance(val, (int, float)):
            raise ConfigError(f"{section}.{key}: expected a number")
        out[keymap[key]] = val if isinstance(val, bool) else float(val)
    return out


def _build(cls, base, overrides, section):
    try:
        return replace(base, **overrides) if base is not None else cls(**overrides)
    except ParameterError as exc:
        raise ConfigError(f"{section}: {exc}") from None


def _course(value):
    name, body = _preset_ref(value, "course")
    if name is not None:
        if body:
            raise ConfigError(f"course: preset {name!r} takes no overrides, got {sorted(body)}")
        return _lookup(COURSE_PRESETS, name, "course")()
    allowed = {"lane_width_m", "segments", "origin"}
    for key in body:
        if key not in allowed:
            raise ConfigError(f"course.{key}: unknown key; expected one of {sorted(allowed)}")
    if "segments" not in body or "lane_width_m" not in body:
        raise ConfigError("course: needs 'segments' and 'lane_width_m'")
    segs = []
    for i, item in enumerate(body["segments"]):
        where = f"course.segments[{i}]"
        if not isinstance(item, dict):
            raise ConfigError(f"{where}: expected a table")
        extra = set(item) - {"kind", "length_m", "radius_m"}
        if extra:
            raise ConfigError(f"{where}.{sorted(extra)[0]}: unknown key")
        try:
            kind = item["kind"]
            if kind == "straight":
                if "radius_m" in item:
                    raise ConfigError(f"{where}.radius_m: not allowed on a straight")
                segs.append(Segment.straight(item["length_m"]))
            elif kind == "arc":
                segs.append(Segment.arc(item["length_m"], item["radius_m"]))
            else:
                raise ConfigError(f"{where}.kind: expected 'straight' or 'arc', got {kind!r}")
        except KeyError as exc:
            raise ConfigError(f"{where}: missing key {exc.args[0]!r}") from None
        except (CourseError, ZeroDivisionError, TypeError) as exc:
            raise ConfigError(f"{where}: {exc}") from None
    origin = tuple(body.get("origin", (0.0, 0.0, 0.0)))
    try:
        return Course(segs, body["lane_width_m"], origin=origin)
    except (CourseError, TypeError, ValueError) as exc:
        raise ConfigError(f"course: {exc}") from None


def scenario_from_dict(doc):
    """Resolve a parsed config document into a :class:`Scenario`."""
    for key in doc:
        if key not in SECTIONS:
            raise ConfigError(f"{key}: unknown section; expected one of {list(SECTIONS)}")
    course = _course(doc.get("course", "preset:thesis"))

    name, body = _preset_ref(doc.get("vehicle", {}), "vehicle")
    base = _lookup(VEHICLE_PRESETS, name, "vehicle")() if name else VehicleParams()
    vehicle = _build(VehicleParams, base, _overrides(body, VEHICLE_KEYS, "vehicle"), "vehicle")

    name, body = _preset_ref(doc.get("driver", {}), "driver")
    base = _lookup(DRIVER_PRESETS, name, "driver") if name else DriverParams()
    driver = _build(DriverParams, base, _overrides(body, DRIVER_KEYS, "driver"), "driver")

    name, body = _preset_ref(doc.get("neuromuscular", {}), "neuromuscular")
    base = _lookup(NEUROMUSCULAR_PRESETS, name, "neuromuscular") if name else NeuromuscularParams()
    nms = _build(NeuromuscularParams, base, _overrides(body, NMS_KEYS, "neuromuscular"), "neuromuscular")

    haptic = None
    raw = doc.get("haptic", "preset:none")
    if raw != "preset:none":
        name, body = _preset_ref(raw, "haptic")
        level = body.pop("level", None)
        base = _lookup(HAPTIC_PRESETS, name, "haptic") if name else HapticParams()
        haptic = _build(HapticParams, base, _overrides(body, HAPTIC_KEYS, "haptic"), "haptic")
        if level is not None:
            if level not in LEVELS:
                raise ConfigError(f"haptic.level: expected one of {list(LEVELS)}, got {level!r}")
            haptic = guidance_level(haptic, level)

    pulse = None
    raw = doc.get("pulse", "preset:none")
    if raw != "preset:none":
        name, body = _preset_ref(raw, "pulse")
        if name not in (None, "default"):
            raise ConfigError(f"pulse: unknown preset {name!r}; expected 'none' or 'default'")
        pulse = Pulse(**_overrides(body, PULSE_KEYS, "pulse"))
        if not (math.isfinite(pulse.duration) and pulse.duration >= 0):
            raise ConfigError("pulse.duration_s must be non-negative")

    run = doc.get("run", {})
    if not isinstance(run, dict):
        raise ConfigError("run: expected a table")
    sc = Scenario(course=course, vehicle=vehicle, driver=driver, neuromuscular=nms, haptic=haptic,
                  pulse=pulse, **_overrides(run, RUN_KEYS, "run"))
    try:
        sc.validate()
    except ScenarioError as exc:
        raise ConfigError(f"run: {exc}") from None
    return sc


def load_scenario(path):
    return scenario_from_dict(load_toml(path))


def _inv(keymap, obj):
    return {key: getattr(obj, attr) for key, attr in keymap.items()}


def scenario_to_dict(sc):
    """Fully resolved, preset-free document for ``sc``."""
    doc = {
        "course": {
            "lane_width_m": sc.course.lane_width,
            "origin": list(sc.course.origin),
            "segments": [
                {"kind": "straight", "length_m": s.length} if s.kind == "straight"
                else {"kind": "arc", "length_m": s.length, "radius_m": 1.0 / s.curvature}
                for s in sc.course.segments
            ],
        },
        "vehicle": _inv(VEHICLE_KEYS, sc.vehicle),
        "driver": _inv(DRIVER_KEYS, sc.driver),
        "neuromuscular": _inv(NMS_KEYS, sc.neuromuscular),
        "haptic": _inv(HAPTIC_KEYS, sc.haptic) if sc.haptic is not None else "preset:none",
        "pulse": _inv(PULSE_KEYS, sc.pulse) if sc.pulse is not None else "preset:none",
        "run": _inv(RUN_KEYS, sc),
    }
    return doc


def snapshot(sc):
    """Canonical TOML text of the resolved scenario."""
    return tomli_w.dumps(scenario_to_dict(sc))


def run_id(sc):
    """Content hash of the resolved scenario."""
    return hashlib.sha256(snapshot(sc).encode()).hexdigest()[:16]


IDENT_KEYS = {"theta0", "bounds", "fixed", "output_weights", "output", "n_starts", "seed"}


def load_ident_init(path):
    """Identification settings from the ``[ident]`` table of a config file.

    Returns keyword arguments for :class:`~sharedsteer.ident.IdentProblem` plus
    the name of the second output column.
    """
    doc = load_toml(path)
    extra = set(doc) - {"ident"}
    if extra:
        raise ConfigError(f"{sorted(extra)[0]}: unknown section; expected 'ident'")
    body = doc.get("ident", {})
    for key in body:
        if key not in IDENT_KEYS:
            raise ConfigError(f"ident.{key}: unknown key; expected one of {sorted(IDENT_KEYS)}")
    theta0 = dict(DEFAULT_THETA)
    bounds = dict(DEFAULT_BOUNDS)
    fixed = dict(DEFAULT_FIXED)
    for key, val in body.get("theta0", {}).items():
        if key not in PARAM_NAMES:
            raise ConfigError(f"ident.theta0.{key}: unknown parameter")
        theta0[key] = float(val)
    for key, val in body.get("bounds", {}).items():
        if key not in PARAM_NAMES:
            raise ConfigError(f"ident.bounds.{key}: unknown parameter")
        if len(val) != 2 or not val[0] <= val[1]:
            raise ConfigError(f"ident.bounds.{key}: expected [low, high]")
        bounds[key] = (float(val[0]), float(val[1]))
    for key, val in body.get("fixed", {}).items():
        if key not in ("K_nms", "t_nms_s"):
            raise ConfigError(f"ident.fixed.{key}: unknown parameter; expected K_nms or t_nms_s")
        fixed["t_nms" if key == "t_nms_s" else key] = float(val)
    kw = {"theta0": theta0, "bounds": bounds, "fixed": fixed}
    if "output_weights" in body:
        w = body["output_weights"]
        if len(w) != 2 or min(w) < 0:
            raise ConfigError("ident.output_weights: expected two non-negative numbers")
        kw["output_weights"] = (float(w[0]), float(w[1]))
    for key in ("n_starts", "seed"):
        if key in body:
            kw[key] = int(body[key])
    return kw, body.get("output")
