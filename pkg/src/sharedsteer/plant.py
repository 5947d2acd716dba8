"""Steering column coupled to a linear bicycle model through the aligning torque."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from sharedsteer import _simkernel as K


class ParameterError(ValueError):
    """Raised for a parameter record violating its invariants."""


@dataclass(frozen=True)
class VehicleParams:
    m: float = 1100.0
    I: float = 2940.0
    l_f: float = 1.0
    l_r: float = 1.635
    K_f: float = 53300.0
    K_r: float = 117000.0
    v: float = 60.0 / 3.6
    E_t: float = 0.026
    K_s: float = 48510.0
    K_t: float = 1.0 / 17.0
    J_s: float = 0.11
    B_s: float = 0.57

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if not (math.isfinite(val) and val > 0):
                raise ParameterError(f"vehicle.{f.name} must be positive and finite, got {val}")
        if not self.K_t < 1:
            raise ParameterError(f"vehicle.K_t must lie in (0, 1), got {self.K_t}")

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class PlantState:
    X: float = 0.0
    Y: float = 0.0
    psi: float = 0.0
    beta: float = 0.0
    r: float = 0.0
    phi: float = 0.0
    phi_dot: float = 0.0

    def to_array(self):
        return np.array([self.X, self.Y, self.psi, self.beta, self.r, self.phi, self.phi_dot])

    @classmethod
    def from_array(cls, a):
        return cls(*(float(v) for v in a[:7]))


@dataclass(frozen=True)
class PlantInputs:
    T_d: float = 0.0
    T_h: float = 0.0
    T_ext: float = 0.0


def pack_vehicle(vp, out=None):
    p = np.zeros(K.NPARAM) if out is None else out
    p[K.M], p[K.IZ], p[K.LF], p[K.LR] = vp.m, vp.I, vp.l_f, vp.l_r
    p[K.KF], p[K.KR], p[K.V], p[K.ET] = vp.K_f, vp.K_r, vp.v, vp.E_t
    p[K.KS], p[K.KT], p[K.JS], p[K.BS] = vp.K_s, vp.K_t, vp.J_s, vp.B_s
    return p


def aligning_coefficient(vp):
    """Aligning-torque stiffness referred to the front slip angle [N m/rad]."""
    return 2.0 * vp.E_t * vp.K_f * vp.K_t / (1.0 + 2.0 * vp.E_t * vp.K_f / vp.K_s)


def aligning_torque(vp, state, delta):
    return aligning_coefficient(vp) * (state.beta + vp.l_f * state.r / vp.v - delta)


def plant_derivative(vp, state, inputs):
    """Time derivative of a :class:`PlantState`."""
    x = np.zeros(K.NSTATE)
    x[:7] = state.to_array()
    dx = np.zeros(K.NSTATE)
    K.plant_rhs(pack_vehicle(vp), x, inputs.T_d + inputs.T_h + inputs.T_ext, dx)
    return PlantState.from_array(dx)


def lateral_matrices(vp):
    """``(A, b)`` with ``d/dt [beta, r] = A [beta, r] + b * delta``."""
    m, v, I = vp.m, vp.v, vp.I
    cf, cr, lf, lr = vp.K_f, vp.K_r, vp.l_f, vp.l_r
    A = np.array([
        [-2 * (cf + cr) / (m * v), -1 - 2 * (lf * cf - lr * cr) / (m * v * v)],
        [-2 * (lf * cf - lr * cr) / I, -2 * (lf * lf * cf + lr * lr * cr) / (I * v)],
    ])
    b = np.array([2 * cf / (m * v), 2 * lf * cf / I])
    return A, b


def steady_state(vp, delta):
    """Steady ``(beta, r)`` under a constant front-wheel angle."""
    A, b = lateral_matrices(vp)
    beta, r = np.linalg.solve(A, -b * delta)
    return float(beta), float(r)
