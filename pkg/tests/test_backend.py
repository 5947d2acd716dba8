"""The compiled kernels and the plain-Python fallback must agree."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

SCRIPT = r"""
import json, sys
import numpy as np
from sharedsteer._jit import backend
from sharedsteer.simloop import Pulse, Scenario, condition_scenario, simulate
from sharedsteer.ident import IdentProblem, discretize, realize_statespace, simulate_realization
from sharedsteer.metrics import tlc_series

sc = condition_scenario(Scenario(pulse=Pulse(0.5, 1.0, 2.0), t_end=4.0), "low_visibility", "strong")
log = simulate(sc)
rng = np.random.default_rng(0)
u = rng.standard_normal((500, 4))
theta = {"a1": 0.1, "a2": 0.05, "a4": 3.7, "t_p": 0.1, "K_d": 3.2, "K_hf": 0.5}
y = simulate_realization(discretize(realize_statespace(theta), 1 / 120), u)
tlc = tlc_series(log, v=sc.vehicle.v)
json.dump({"backend": backend(), "csv": log.to_csv(extra=True), "y": y.tolist(),
           "tlc": [None if np.isnan(v) else v for v in tlc]}, sys.stdout)
"""


def run(disable):
    env = dict(os.environ)
    env["SHAREDSTEER_DISABLE_NUMBA"] = "1" if disable else "0"
    r = subprocess.run([sys.executable, "-c", SCRIPT], capture_output=True, text=True, env=env, check=True)
    return json.loads(r.stdout)


def parse(text):
    lines = text.splitlines()
    return np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])


@pytest.fixture(scope="module")
def both():
    return run(False), run(True)


def test_backends_selected(both):
    fast, slow = both
    assert fast["backend"] == "numba"
    assert slow["backend"] == "python"


def test_simulation_agrees(both):
    fast, slow = both
    a, b = parse(fast["csv"]), parse(slow["csv"])
    assert a.shape == b.shape
    assert np.max(np.abs(a - b)) <= 1e-9 * max(1.0, np.max(np.abs(a)))


def test_state_space_simulation_agrees(both):
    fast, slow = both
    assert np.allclose(fast["y"], slow["y"], rtol=1e-9, atol=1e-10)


def test_tlc_agrees(both):
    fast, slow = both
    a = np.array([np.nan if v is None else v for v in fast["tlc"]])
    b = np.array([np.nan if v is None else v for v in slow["tlc"]])
    assert np.array_equal(np.isnan(a), np.isnan(b))
    assert np.allclose(a[~np.isnan(a)], b[~np.isnan(b)], rtol=1e-9)
