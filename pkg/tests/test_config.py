import pytest
import tomli_w
from hypothesis import given
from hypothesis import strategies as st

from sharedsteer import config as cfg
from sharedsteer.driver import DRIVER_PRESETS
from sharedsteer.simloop import Scenario

try:
    import tomllib
except ImportError:
    import tomli as tomllib


def test_empty_config_is_default_scenario():
    sc = cfg.scenario_from_dict({})
    assert sc == Scenario()


def test_preset_references():
    sc = cfg.scenario_from_dict({
        "driver": "preset:low_visibility",
        "neuromuscular": {"preset": "assisted", "K_hf": 0.8},
        "haptic": {"preset": "exp2", "level": "strong"},
    })
    assert sc.driver == DRIVER_PRESETS["low_visibility"]
    assert sc.neuromuscular.K_d == 3.2 and sc.neuromuscular.K_hf == 0.8
    assert sc.haptic.a1p == 3.2 and sc.haptic.K1 == 0.5


def test_units_in_key_names():
    sc = cfg.scenario_from_dict({
        "driver": {"t_p_s": 0.2},
        "pulse": {"start_time_s": 10.0, "duration_s": 1.0, "magnitude_Nm": -2.0},
        "run": {"t_end_s": 20.0, "log_rate_Hz": 60.0},
        "course": {"lane_width_m": 3.5, "segments": [
            {"kind": "straight", "length_m": 100.0}, {"kind": "arc", "length_m": 50.0, "radius_m": -150.0}]},
    })
    assert sc.driver.t_p == 0.2
    assert (sc.pulse.start_time, sc.pulse.duration, sc.pulse.magnitude) == (10.0, 1.0, -2.0)
    assert sc.t_end == 20.0 and sc.log_rate == 60.0
    assert sc.course.total_length == 150.0 and sc.course.table[1, 5] == pytest.approx(-1 / 150)


@pytest.mark.parametrize("doc, needle", [
    ({"vehicle": {"m": -1.0}}, "vehicle.m"),
    ({"vehicle": {"mass": 1.0}}, "vehicle.mass"),
    ({"driver": {"t_p": 0.2}}, "driver.t_p"),
    ({"bogus": {}}, "bogus"),
    ({"driver": "preset:sleepy"}, "sleepy"),
    ({"driver": "low_visibility"}, "preset:"),
    ({"haptic": {"level": "max"}}, "haptic.level"),
    ({"run": {"integrator_step_s": 0.001}}, "divide"),
    ({"course": {"lane_width_m": 3.6, "segments": [{"kind": "loop", "length_m": 3.0}]}}, "kind"),
    ({"course": {"lane_width_m": 3.6, "segments": [{"kind": "arc", "length_m": 3.0}]}}, "radius_m"),
    ({"driver": {"far_point_enabled": 1}}, "far_point_enabled"),
    ({"pulse": {"duration_s": -1.0}}, "duration"),
])
def test_rejections_name_the_key(doc, needle):
    with pytest.raises(cfg.ConfigError, match=needle):
        cfg.scenario_from_dict(doc)


def test_snapshot_round_trip_hash_equal():
    sc = cfg.scenario_from_dict({"driver": "preset:declined_attention", "haptic": {"preset": "ch4"},
                                 "pulse": "preset:default"})
    text = cfg.snapshot(sc)
    again = cfg.scenario_from_dict(tomllib.loads(text))
    assert again == sc
    assert cfg.run_id(again) == cfg.run_id(sc)
    assert cfg.snapshot(again) == text


@given(
    a1=st.floats(0, 0.5), t_p=st.floats(0.01, 0.3), k1=st.floats(0, 1), mag=st.floats(-3, 3),
    t_end=st.floats(1, 200), radius=st.floats(50, 1000) | st.floats(-1000, -50),
)
def test_round_trip_property(a1, t_p, k1, mag, t_end, radius):
    doc = {
        "course": {"lane_width_m": 3.6, "segments": [
            {"kind": "straight", "length_m": 500.0}, {"kind": "arc", "length_m": 100.0, "radius_m": radius}]},
        "driver": {"a1": a1, "t_p_s": t_p},
        "haptic": {"K1": k1},
        "pulse": {"magnitude_Nm": mag},
        "run": {"t_end_s": t_end},
    }
    sc = cfg.scenario_from_dict(tomllib.loads(tomli_w.dumps(doc)))
    back = cfg.scenario_from_dict(tomllib.loads(cfg.snapshot(sc)))
    assert cfg.run_id(back) == cfg.run_id(sc)


def test_run_id_changes_with_content():
    a = cfg.scenario_from_dict({})
    b = cfg.scenario_from_dict({"driver": {"a1": 0.11}})
    assert cfg.run_id(a) != cfg.run_id(b)
    assert len(cfg.run_id(a)) == 16


def test_load_errors(tmp_path):
    with pytest.raises(cfg.ConfigError):
        cfg.load_scenario(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[driver\n")
    with pytest.raises(cfg.ConfigError):
        cfg.load_scenario(bad)


def test_ident_init(tmp_path):
    p = tmp_path / "init.toml"
    p.write_text(
        '[ident]\noutput = "phi_target"\nn_starts = 2\noutput_weights = [1.0, 0.5]\n'
        '[ident.theta0]\na1 = 0.2\n[ident.bounds]\nK_d = [2.0, 4.0]\n[ident.fixed]\nt_nms_s = 0.12\n'
    )
    kw, output = cfg.load_ident_init(p)
    assert output == "phi_target"
    assert kw["theta0"]["a1"] == 0.2 and kw["bounds"]["K_d"] == (2.0, 4.0)
    assert kw["fixed"]["t_nms"] == 0.12 and kw["n_starts"] == 2 and kw["output_weights"] == (1.0, 0.5)
    p.write_text("[ident.theta0]\nzeta = 1.0\n")
    with pytest.raises(cfg.ConfigError, match="zeta"):
        cfg.load_ident_init(p)
