"""Grey-box prediction-error identification of the driver model.

The driver is written as a three-state LTI model with inputs
``[e_y, e_theta, phi, T_h]`` and outputs ``[T_d, phi_target]``; states are the
integral of ``e_y``, the Pade delay state and the driver torque. Identified
parameters are ``a1, a2, a4, t_p, K_d, K_hf``; ``K_nms`` and ``t_nms`` are fixed.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import expm
from scipy.optimize import lsq_linear
from scipy.stats import qmc

from sharedsteer._identkernel import dlsim

log = logging.getLogger(__name__)

PARAM_NAMES = ("a1", "a2", "a4", "t_p", "K_d", "K_hf")
DEFAULT_THETA = {"a1": 0.1, "a2": 0.01, "a4": 3.7, "t_p": 0.1, "K_d": 3.0, "K_hf": 0.5}
DEFAULT_BOUNDS = {
    "a1": (0.0, 0.5),
    "a2": (0.0, 0.1),
    "a4": (3.0, 5.0),
    "t_p": (0.01, 0.3),
    "K_d": (1.0, 5.0),
    "K_hf": (0.0, 1.0),
}
DEFAULT_FIXED = {"K_nms": 1.0, "t_nms": 0.1}
INPUT_NAMES = ("e_y", "e_theta", "phi", "T_h")
OUTPUT_NAMES = ("T_d", "phi_target")

MAX_ITER = 200
REL_IMPROVEMENT_TOL = 1e-4
FD_REL_STEP = 1e-6


class IdentError(ValueError):
    """Degenerate data or a diverged model."""


@dataclass(frozen=True)
class Realization:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    dt: Optional[float] = None  # None for continuous time


def realize_statespace(theta, fixed=None):
    """Continuous realization ``(A, B, C, D)`` for parameters ``theta``.

    ``theta`` is a mapping with the keys of ``PARAM_NAMES`` (or a sequence in
    that order).
    """
    th = _as_dict(theta)
    fx = dict(DEFAULT_FIXED, **(fixed or {}))
    a1, a2, a4, tp, kd, khf = (th[k] for k in PARAM_NAMES)
    kn, tn = fx["K_nms"], fx["t_nms"]
    if not (tp > 0 and tn > 0) or not all(math.isfinite(v) for v in th.values()):
        raise IdentError(f"invalid parameters {th}")
    g = kd + kn
    # target angle = a2 x1 + 2 x2 + a1 e_y - a4 e_theta
    A = np.array([
        [0.0, 0.0, 0.0],
        [-2.0 * a2 / tp, -2.0 / tp, 0.0],
        [g * a2 / tn, 2.0 * g / tn, -1.0 / tn],
    ])
    B = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [-2.0 * a1 / tp, 2.0 * a4 / tp, 0.0, 0.0],
        [g * a1 / tn, -g * a4 / tn, -kn / tn, -khf / tn],
    ])
    C = np.array([[0.0, 0.0, 1.0], [a2, 2.0, 0.0]])
    D = np.array([[0.0, 0.0, 0.0, 0.0], [a1, -a4, 0.0, 0.0]])
    return Realization(A, B, C, D)


def discretize(real, dt):
    """Zero-order-hold discretization via the augmented matrix exponential."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    n, m = real.B.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = real.A
    M[:n, n:] = real.B
    E = expm(M * dt)
    return Realization(E[:n, :n], E[:n, n:], real.C.copy(), real.D.copy(), dt)


def simulate_realization(real, u, x0=None):
    """Output sequence of a discrete realization driven by ``u`` (N x inputs)."""
    if real.dt is None:
        raise ValueError("discretize the realization first")
    x0 = np.zeros(real.A.shape[0]) if x0 is None else np.asarray(x0, dtype=float)
    return dlsim(real.A, real.B, real.C, real.D, np.asarray(u, dtype=float), x0)


def fit_percent(y, yhat):
    """100 * (1 - |y - yhat| / |y - mean(y)|)."""
    den = np.linalg.norm(y - np.mean(y))
    if den == 0:
        return -math.inf
    return float(100.0 * (1.0 - np.linalg.norm(y - yhat) / den))


def _as_dict(theta):
    if isinstance(theta, dict):
        return {k: float(theta[k]) for k in PARAM_NAMES}
    return {k: float(v) for k, v in zip(PARAM_NAMES, theta)}


@dataclass
class IdentProblem:
    u: np.ndarray  # N x 4: e_y, e_theta, phi, T_h
    y: np.ndarray  # N x 2: T_d, phi (measured or target)
    sample_rate: float
    theta0: dict = field(default_factory=lambda: dict(DEFAULT_THETA))
    bounds: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    fixed: dict = field(default_factory=lambda: dict(DEFAULT_FIXED))
    output_weights: tuple = (1.0, 1.0)
    n_starts: int = 5
    seed: int = 0

    def validate(self):
        u = np.asarray(self.u, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if u.ndim != 2 or u.shape[1] != 4 or y.ndim != 2 or y.shape[1] != 2:
            raise IdentError("u must be N x 4 and y must be N x 2")
        if len(u) != len(y) or len(u) < 100:
            raise IdentError(f"need equal-length series of at least 100 samples, got {len(u)} and {len(y)}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(y))):
            raise IdentError("non-finite samples in data")
        if np.any(np.ptp(y, axis=0) == 0):
            raise IdentError("degenerate data: constant output channel")
        if not self.sample_rate > 0:
            raise IdentError("sample_rate must be positive")
        for k in PARAM_NAMES:
            lo, hi = self.bounds[k]
            if not lo <= self.theta0[k] <= hi:
                raise IdentError(f"theta0[{k}]={self.theta0[k]} outside bounds [{lo}, {hi}]")

    @classmethod
    def from_log(cls, log, output="phi", **kw):
        """Build a problem from a simulation or ingested log.

        ``output`` names the column used as the second output channel; the
        default compares the model's target angle with the measured wheel angle.
        """
        u = np.column_stack([getattr(log, c) for c in INPUT_NAMES])
        y = np.column_stack([log.T_d, getattr(log, output)])
        return cls(u=u, y=y, sample_rate=log.log_rate, **kw)


@dataclass
class IdentResult:
    theta_hat: dict
    fit_Td: float
    fit_phi: float
    iterations: int
    converged: bool
    final_loss: float
    trace: list = field(default_factory=list)
    start_index: int = 0
    start_losses: list = field(default_factory=list)


class _Objective:
    def __init__(self, prob):
        self.u = np.ascontiguousarray(prob.u, dtype=float)
        self.y = np.asarray(prob.y, dtype=float)
        self.dt = 1.0 / prob.sample_rate
        self.fixed = dict(DEFAULT_FIXED, **prob.fixed)
        var = np.var(self.y, axis=0)
        self.sqrt_w = np.sqrt(np.asarray(prob.output_weights, dtype=float) / var)
        self.scale = float(np.sum((self.y * self.sqrt_w) ** 2))

    def predict(self, theta):
        real = discretize(realize_statespace(theta, self.fixed), self.dt)
        return simulate_realization(real, self.u)

    def residual(self, theta):
        r = ((self.y - self.predict(theta)) * self.sqrt_w).ravel(order="F")
        if not np.all(np.isfinite(r)):
            raise IdentError("non-finite prediction error (diverged model)")
        return r

    def jacobian(self, theta, widths):
        J = np.empty((self.y.size, len(theta)))
        for i in range(len(theta)):
            h = FD_REL_STEP * max(abs(theta[i]), widths[i])
            tp = theta.copy()
            tm = theta.copy()
            tp[i] += h
            tm[i] -= h
            J[:, i] = (self.residual(tp) - self.residual(tm)) / (2.0 * h)
        return J


def _gauss_newton(obj, theta0, lo, hi):
    """Damped, bound-constrained Gauss-Newton from one start."""
    widths = hi - lo
    theta = np.clip(np.asarray(theta0, dtype=float), lo, hi)
    r = obj.residual(theta)
    loss = float(r @ r)
    lam = 1e-3
    trace = [(0, loss, math.nan, lam, *theta)]
    converged = False
    iterations = 0
    for it in range(1, MAX_ITER + 1):
        if loss <= 1e-24 * obj.scale:
            converged = True
            break
        J = obj.jacobian(theta, widths)
        # expected improvement of the (bounded) Gauss-Newton step
        gn = lsq_linear(J, -r, bounds=(lo - theta, hi - theta), method="bvls").x
        pred = loss - float(np.sum((r + J @ gn) ** 2))
        rel = pred / loss
        if rel < REL_IMPROVEMENT_TOL:
            converged = True
            trace.append((it, loss, rel, lam, *theta))
            break
        dscale = np.sqrt(np.maximum(np.sum(J * J, axis=0), 1e-30))
        accepted = False
        while lam < 1e12:
            Ja = np.vstack([J, np.diag(math.sqrt(lam) * dscale)])
            ra = np.concatenate([-r, np.zeros(len(theta))])
            step = lsq_linear(Ja, ra, bounds=(lo - theta, hi - theta), method="bvls").x
            cand = np.clip(theta + step, lo, hi)
            try:
                r_new = obj.residual(cand)
                loss_new = float(r_new @ r_new)
            except IdentError:
                loss_new = math.inf
            if loss_new < loss:
                theta, r, loss = cand, r_new, loss_new
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                break
            lam *= 10.0
        iterations = it
        trace.append((it, loss, rel, lam, *theta))
        if not accepted:
            # no descent direction left at machine precision
            converged = rel < 10 * REL_IMPROVEMENT_TOL
            break
    return theta, loss, iterations, converged, trace


TRACE_HEADER = ("start", "iteration", "loss", "expected_rel_improvement", "damping") + PARAM_NAMES


def pem_fit(prob, max_workers=1):
    """Fit the driver model by minimizing the weighted output prediction error.

    Runs ``n_starts`` starts (the given ``theta0`` first, then Latin-hypercube
    points in the bounds box); the lowest loss wins, ties going to the earlier
    start.
    """
    prob.validate()
    obj = _Objective(prob)
    lo = np.array([prob.bounds[k][0] for k in PARAM_NAMES], dtype=float)
    hi = np.array([prob.bounds[k][1] for k in PARAM_NAMES], dtype=float)
    starts = [np.array([prob.theta0[k] for k in PARAM_NAMES], dtype=float)]
    if prob.n_starts > 1:
        lhs = qmc.LatinHypercube(d=len(PARAM_NAMES), seed=prob.seed).random(prob.n_starts - 1)
        starts.extend(lo + lhs * (hi - lo))

    def run(theta0):
        try:
            return _gauss_newton(obj, theta0, lo, hi)
        except IdentError as exc:
            log.warning("start diverged: %s", exc)
            return None

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(run, starts))
    else:
        outcomes = [run(s) for s in starts]

    best = None
    trace = []
    losses = []
    for i, out in enumerate(outcomes):
        if out is None:
            losses.append(math.inf)
            continue
        theta, loss, iters, conv, tr = out
        losses.append(loss)
        trace.extend((i,) + row for row in tr)
        if best is None or loss < best[1][1]:
            best = (i, out)
    if best is None:
        raise IdentError("every start diverged")
    idx, (theta, loss, iters, conv, _) = best
    yhat = obj.predict(theta)
    return IdentResult(
        theta_hat=_as_dict(theta),
        fit_Td=fit_percent(obj.y[:, 0], yhat[:, 0]),
        fit_phi=fit_percent(obj.y[:, 1], yhat[:, 1]),
        iterations=iters,
        converged=conv,
        final_loss=loss,
        trace=trace,
        start_index=idx,
        start_losses=losses,
    )


def write_trace(path, result):
    """Convergence trace as CSV, one row per start and iteration."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(TRACE_HEADER) + "\n")
        for row in result.trace:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def format_result(result):
    """Key-value text for an identification result."""
    lines = [f"{k} = {_fmt(v)}" for k, v in result.theta_hat.items()]
    lines += [
        f"fit_Td = {_fmt(result.fit_Td)}",
        f"fit_phi = {_fmt(result.fit_phi)}",
        f"iterations = {result.iterations}",
        f"converged = {str(result.converged).lower()}",
        f"final_loss = {_fmt(result.final_loss)}",
        f"start_index = {result.start_index}",
    ]
    return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.9g}"
