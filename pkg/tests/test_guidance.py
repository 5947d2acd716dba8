import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sharedsteer.course import PreviewErrors
from sharedsteer.guidance import (
    HAPTIC_PRESETS,
    HapticParams,
    guidance_level,
    haptic_preset,
    haptic_torque,
)
from sharedsteer.plant import ParameterError

CH4 = HAPTIC_PRESETS["ch4"]


def test_presets():
    assert (CH4.a1p, CH4.a2p, CH4.a3p, CH4.a4p, CH4.K1) == (1.9, 0.05, 38.0, 1.9, 0.25)
    assert (CH4.t_n_h, CH4.t_f_h, CH4.torque_limit) == (0.3, 0.7, 5.0)
    assert haptic_preset("exp1").a2p == 0.0
    e2 = haptic_preset("exp2")
    assert (e2.a1p, e2.a2p, e2.a3p, e2.a4p) == (3.2, 0.08, 20.0, 0.5)
    e3 = haptic_preset("exp3")
    assert (e3.K1, e3.a1p, e3.a2p, e3.a3p, e3.a4p) == (1.0, 0.16, 0.004, 1.8, 0.045)
    with pytest.raises(KeyError):
        haptic_preset("nope")


def test_zero_errors_zero_torque():
    assert haptic_torque(CH4, PreviewErrors(0, 0), 0, 0) == 0


def test_lateral_gain_example():
    # left-positive e_y: the torque pushes right, so the sign is negative
    assert haptic_torque(CH4, PreviewErrors(1.0, 0), 0, 0) == pytest.approx(-0.475, abs=1e-12)


def test_saturation_exact():
    assert haptic_torque(CH4, PreviewErrors(100.0, 0), 0, 0) == -5.0
    assert haptic_torque(CH4, PreviewErrors(-100.0, 0), 0, 0) == 5.0


def test_heading_terms_sign():
    assert haptic_torque(CH4, PreviewErrors(0, 0.01), 0, 0) == pytest.approx(0.25 * 38 * 0.01)
    assert haptic_torque(CH4, PreviewErrors(0, 0), 0, 0.1) == pytest.approx(0.25 * 1.9 * 0.1)
    assert haptic_torque(CH4, PreviewErrors(0, 0), 1.0, 0) == pytest.approx(-0.25 * 0.05)


def test_levels():
    assert guidance_level(CH4, "none").K1 == 0
    assert guidance_level(CH4, "normal").K1 == 0.25
    assert guidance_level(CH4, "strong").K1 == 0.5
    full = guidance_level(CH4, "full")
    assert full.K1 == 1.0 and full.a3p == CH4.a3p
    with pytest.raises(KeyError):
        guidance_level(CH4, "max")


def test_level_none_gives_exact_zero():
    hp = guidance_level(CH4, "none")
    assert haptic_torque(hp, PreviewErrors(1e6, -3.0), 5.0, -7.0) == 0.0


def test_validation():
    with pytest.raises(ParameterError):
        HapticParams(K1=1.5)
    with pytest.raises(ParameterError):
        HapticParams(a1p=-1)


def test_random_error_vectors_bounded():
    rng = np.random.default_rng(0)
    v = rng.standard_normal((10_000, 4)) * [3.0, 5.0, 0.5, 1.0]
    vals = np.array([haptic_torque(CH4, PreviewErrors(a, b), c, d) for a, c, b, d in v])
    assert np.all(np.abs(vals) <= 5.0)
    assert np.any(np.abs(vals) == 5.0)


err = st.floats(-50, 50)


@given(a=err, b=err, c=err, d=err)
def test_bounded_property(a, b, c, d):
    assert abs(haptic_torque(CH4, PreviewErrors(a, b), c, d)) <= CH4.torque_limit


@given(a=st.floats(-0.1, 0.1), b=st.floats(-0.01, 0.01), c=st.floats(-0.1, 0.1), d=st.floats(-0.1, 0.1))
def test_linear_and_k1_scaling_below_saturation(a, b, c, d):
    hp_half = HapticParams(K1=0.25)
    hp_full = HapticParams(K1=0.5)
    t1 = haptic_torque(hp_half, PreviewErrors(a, b), c, d)
    t2 = haptic_torque(hp_full, PreviewErrors(a, b), c, d)
    assert t2 == pytest.approx(2 * t1, abs=1e-12)
    t_sum = haptic_torque(hp_half, PreviewErrors(2 * a, 2 * b), 2 * c, 2 * d)
    assert t_sum == pytest.approx(2 * t1, abs=1e-12)
