"""Discrete state-space simulation used inside the prediction-error loop."""

import numpy as np
from scipy import signal

from sharedsteer._jit import HAVE_NUMBA, kernel


@kernel
def _dlsim_loop(Ad, Bd, C, D, u, x0):
    n = Ad.shape[0]
    m = Bd.shape[1]
    q = C.shape[0]
    N = u.shape[0]
    y = np.empty((N, q))
    x = x0.copy()
    xn = np.empty(n)
    for k in range(N):
        for i in range(q):
            acc = 0.0
            for j in range(n):
                acc += C[i, j] * x[j]
            for j in range(m):
                acc += D[i, j] * u[k, j]
            y[k, i] = acc
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += Ad[i, j] * x[j]
            for j in range(m):
                acc += Bd[i, j] * u[k, j]
            xn[i] = acc
        for i in range(n):
            x[i] = xn[i]
    return y


def _dlsim_lfilter(Ad, Bd, C, D, u, x0):
    # vectorized path: one IIR filter per input/output pair plus the free response
    N = u.shape[0]
    q, m = D.shape
    y = np.zeros((N, q))
    for j in range(m):
        num, den = signal.ss2tf(Ad, Bd[:, j:j + 1], C, D[:, j:j + 1])
        for i in range(q):
            y[:, i] += signal.lfilter(num[i], den, u[:, j])
    if np.any(x0):
        xk = x0.copy()
        for k in range(N):
            y[k] += C @ xk
            xk = Ad @ xk
    return y


def dlsim(Ad, Bd, C, D, u, x0):
    """Response of ``x[k+1] = Ad x + Bd u``, ``y = C x + D u`` from ``x0``."""
    args = [np.ascontiguousarray(a, dtype=float) for a in (Ad, Bd, C, D, u, x0)]
    if HAVE_NUMBA:
        return _dlsim_loop(*args)
    return _dlsim_lfilter(*args)
