"""Haptic guidance torque from the controller's own two-point preview."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from sharedsteer import _simkernel as K
from sharedsteer.plant import ParameterError

LEVELS = {"none": 0.0, "normal": 0.25, "strong": 0.5, "full": 1.0}


@dataclass(frozen=True)
class HapticParams:
    a1p: float = 1.9
    a2p: float = 0.05
    a3p: float = 38.0
    a4p: float = 1.9
    K1: float = 0.25
    t_n_h: float = 0.3
    t_f_h: float = 0.7
    torque_limit: float = 5.0

    def __post_init__(self):
        for name in ("a1p", "a2p", "a3p", "a4p", "K1", "torque_limit"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val >= 0):
                raise ParameterError(f"haptic.{name} must be non-negative, got {val}")
        if self.K1 > 1.0:
            raise ParameterError(f"haptic.K1 must lie in [0, 1], got {self.K1}")
        if not (self.t_n_h > 0 and self.t_f_h > 0):
            raise ParameterError("haptic look-ahead times must be positive")

    def as_dict(self):
        return asdict(self)


HAPTIC_PRESETS = {
    "ch4": HapticParams(),
    # experiment I lists no derivative gain for e'_y; taken as zero
    "exp1": HapticParams(a1p=1.9, a2p=0.0, a3p=38.0, a4p=1.9, K1=0.25),
    "exp2": HapticParams(a1p=3.2, a2p=0.08, a3p=20.0, a4p=0.50, K1=0.25),
    "exp3": HapticParams(a1p=0.16, a2p=0.004, a3p=1.8, a4p=0.045, K1=1.0),
}


def haptic_preset(name):
    try:
        return HAPTIC_PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown haptic preset {name!r}; expected one of {sorted(HAPTIC_PRESETS)}") from None


def pack_haptic(hp, out=None):
    p = np.zeros(K.NPARAM) if out is None else out
    if hp is None:
        return p
    p[K.HA1], p[K.HA2], p[K.HA3], p[K.HA4] = hp.a1p, hp.a2p, hp.a3p, hp.a4p
    p[K.K1], p[K.HTN], p[K.HTF], p[K.HLIM] = hp.K1, hp.t_n_h, hp.t_f_h, hp.torque_limit
    return p


def haptic_torque(hp, err, e_y_dot, e_theta_dot):
    """Saturated guidance torque [N m].

    Lateral terms act against ``e_y`` (pushing the wheel toward the lane
    center); heading terms act with ``e_theta`` (turning toward the road).
    """
    return float(K.haptic_law(pack_haptic(hp), err.e_y, e_y_dot, err.e_theta, e_theta_dot))


def guidance_level(base, level):
    """Copy of ``base`` with the overall gain set for a named guidance level."""
    try:
        k1 = LEVELS[level]
    except KeyError:
        raise KeyError(f"unknown guidance level {level!r}; expected one of {list(LEVELS)}") from None
    return replace(base, K1=k1)
