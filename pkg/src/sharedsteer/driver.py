"""Two-point visual controller, Pade processing delay and neuromuscular stage.

The visual controller turns preview errors into a target steering-wheel angle.
Positive ``e_y`` (vehicle left of the lane center) commands a rightward,
i.e. negative, angle; positive ``e_theta`` (road turning left relative to the
vehicle) commands a positive angle.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from sharedsteer import _simkernel as K
from sharedsteer.plant import ParameterError


@dataclass(frozen=True)
class DriverParams:
    a1: float = 0.1
    a2: float = 0.05
    a3: float = 0.0
    a4: float = 3.7
    t_n: float = 0.3
    t_f: float = 1.0
    t_p: float = 0.1
    far_point_enabled: bool = True

    def __post_init__(self):
        for name in ("a1", "a2", "a3", "a4", "t_n", "t_f", "t_p"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"driver.{name} must be finite")
        if not self.t_n > 0:
            raise ParameterError("driver.t_n must be positive")
        if not self.t_p > 0:
            raise ParameterError("driver.t_p must be positive")
        if self.far_point_enabled and not self.t_f > self.t_n:
            raise ParameterError("driver.t_f must exceed t_n when the far point is used")

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class NeuromuscularParams:
    K_d: float = 3.8
    K_hf: float = 0.0
    K_nms: float = 1.0
    t_nms: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.K_hf <= 1.0:
            raise ParameterError(f"neuromuscular.K_hf must lie in [0, 1], got {self.K_hf}")
        for name in ("K_d", "K_nms", "t_nms"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ParameterError(f"neuromuscular.{name} must be positive, got {val}")

    def as_dict(self):
        return asdict(self)


@dataclass
class DriverState:
    x_int: float = 0.0
    x_pade: float = 0.0
    x_nms: float = 0.0
    e_y_prev: float = 0.0


DRIVER_PRESETS = {
    "normal": DriverParams(a1=0.1, a2=0.05, a3=0.0, a4=3.7, t_n=0.3, t_f=1.0, t_p=0.1),
    "low_visibility": DriverParams(
        a1=0.1, a2=0.05, a3=0.3, a4=0.0, t_n=0.3, t_f=1.0, t_p=0.1, far_point_enabled=False
    ),
    "declined_attention": DriverParams(a1=0.1, a2=0.05, a3=0.0, a4=3.7, t_n=0.3, t_f=1.0, t_p=0.5),
}

NEUROMUSCULAR_PRESETS = {
    "manual": NeuromuscularParams(K_d=3.8, K_hf=0.0, K_nms=1.0, t_nms=0.1),
    "assisted": NeuromuscularParams(K_d=3.2, K_hf=0.5, K_nms=1.0, t_nms=0.1),
}

VISION_MODES = tuple(DRIVER_PRESETS)


def driver_preset(name):
    try:
        return DRIVER_PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown driver preset {name!r}; expected one of {sorted(DRIVER_PRESETS)}") from None


def pack_driver(dp, nmp, out=None):
    p = np.zeros(K.NPARAM) if out is None else out
    p[K.A1], p[K.A2], p[K.A3], p[K.A4] = dp.a1, dp.a2, dp.a3, dp.a4
    p[K.TN], p[K.TF], p[K.TP] = dp.t_n, dp.t_f, dp.t_p
    p[K.FAR] = 1.0 if dp.far_point_enabled else 0.0
    p[K.KD], p[K.KHF], p[K.KNMS], p[K.TNMS] = nmp.K_d, nmp.K_hf, nmp.K_nms, nmp.t_nms
    return p


def visual_command(dp, err, e_y_dot, ds):
    """Pre-delay target steering angle [rad]."""
    u = -(dp.a1 * err.e_y + dp.a2 * ds.x_int + dp.a3 * e_y_dot)
    if dp.far_point_enabled:
        u += dp.a4 * err.e_theta
    return u


def backward_difference(ds, e_y, dt):
    """Rate of ``e_y`` from the value stored at the previous call."""
    rate = (e_y - ds.e_y_prev) / dt
    ds.e_y_prev = e_y
    return rate


def _rk4_scalar(f, x, dt):
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def pade_delay_step(dp, ds, u_pre, dt):
    """Advance the first-order Pade delay by ``dt`` with ``u_pre`` held.

    Returns the delayed target angle at the start of the interval (the block
    has direct feedthrough) and the updated state.
    """
    if dt > dp.t_p / 10 * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds t_p/10")
    phi_target = 2.0 * ds.x_pade - u_pre
    rate = 2.0 / dp.t_p
    x_new = _rk4_scalar(lambda x: rate * (u_pre - x), ds.x_pade, dt)
    return phi_target, replace(ds, x_pade=x_new)


def torque_target(nmp, phi_target, phi, T_h):
    return (nmp.K_d + nmp.K_nms) * phi_target - nmp.K_nms * phi - nmp.K_hf * T_h


def neuromuscular_step(nmp, ds, phi_target, phi, T_h, dt):
    """Advance the neuromuscular lag by ``dt`` with its inputs held.

    Returns the driver torque at the start of the interval and the new state.
    """
    if dt > nmp.t_nms / 10 * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds t_nms/10")
    target = torque_target(nmp, phi_target, phi, T_h)
    x_new = _rk4_scalar(lambda x: (target - x) / nmp.t_nms, ds.x_nms, dt)
    return ds.x_nms, replace(ds, x_nms=x_new)


def driver_derivative(dp, nmp, x, e_y, e_theta, e_y_dot, phi, T_h):
    """Derivative of ``[x_int, x_pade, x_nms]`` plus the target angle."""
    x_int, x_pade, x_nms = x
    u = -(dp.a1 * e_y + dp.a2 * x_int + dp.a3 * e_y_dot)
    if dp.far_point_enabled:
        u += dp.a4 * e_theta
    phi_t = 2.0 * x_pade - u
    target = torque_target(nmp, phi_t, phi, T_h)
    dx = np.array([e_y, 2.0 / dp.t_p * (u - x_pade), (target - x_nms) / nmp.t_nms])
    return dx, phi_t


def driver_step(dp, nmp, ds, err, e_y_dot, phi, T_h, dt):
    """One RK4 step of the complete driver block with inputs held over ``dt``.

    Returns ``(phi_target, T_d, new_state)`` where the outputs refer to the
    start of the interval.
    """
    x = np.array([ds.x_int, ds.x_pade, ds.x_nms])

    def f(z):
        return driver_derivative(dp, nmp, z, err.e_y, err.e_theta, e_y_dot, phi, T_h)[0]

    _, phi_t = driver_derivative(dp, nmp, x, err.e_y, err.e_theta, e_y_dot, phi, T_h)
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    xn = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    new = DriverState(float(xn[0]), float(xn[1]), float(xn[2]), ds.e_y_prev)
    return phi_t, ds.x_nms, new
