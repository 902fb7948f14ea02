import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adsverdict.catalogue import ConcreteScenario, LogicalScenario, ParamRef, SceneTemplate
from adsverdict.simkit import SimConfig, SimError, idm_stopping_distance, simulate
from adsverdict.trace import serialize_trace


def scene(kind, **fields):
    ls = LogicalScenario("ls", "fs", (), SceneTemplate(kind, tuple(sorted(fields.items()))), "r.rules")
    return ConcreteScenario("ls-000000", "ls", 0, {}), ls


def lead_brake(v, lead_v, gap, decel, brake_time=0.0):
    return scene("lead_brake", ego_speed=v, lead_speed=lead_v, initial_gap=gap,
                 lead_decel=decel, brake_time=brake_time)


def test_constant_speed_free_drive():
    cs, ls = scene("free_drive", ego_speed=10.0)
    tr = simulate(cs, ls, SimConfig(dt=0.05, horizon=1.0, controller="constant_speed"))
    assert len(tr) == 21
    assert tr.get("pos", "ego")[-1] == 10.0
    assert tr.t[-1] == pytest.approx(1.0)


def test_closed_form_intercept():
    # 2 m gap closing at 5 m/s: contact at t = 0.4 s, i.e. step 8 at dt 0.05
    cs, ls = lead_brake(10.0, 5.0, 2.0, 0.0, brake_time=100.0)
    tr = simulate(cs, ls, SimConfig(dt=0.05, horizon=5.0, controller="constant_speed"))
    coll = tr.get("collision", "ego", "lead")
    assert len(tr) == 9
    assert int(np.argmax(coll > 0)) == 8
    assert tr.t[8] == pytest.approx(0.4)
    np.testing.assert_allclose(tr.get("gap", "ego", "lead"), np.maximum(2.0 - 5.0 * tr.t, 0.0),
                               atol=1e-12)


def test_idm_survives_hard_lead_braking():
    v = 25.0
    gap = idm_stopping_distance(v) + 5.0
    cs, ls = lead_brake(v, v, gap, 8.0)
    tr = simulate(cs, ls, SimConfig())
    assert not tr.get("collision", "ego", "lead").any()
    assert tr.get("speed", "ego")[-1] < 0.1
    assert tr.get("gap", "ego", "lead").min() > 1.0


@given(st.floats(5.0, 35.0), st.floats(0.0, 1.0), st.floats(1.0, 9.0), st.floats(0.0, 5.0))
@settings(max_examples=150, deadline=None)
def test_idm_no_collision_outside_stopping_distance(v, lead_frac, decel, brake_time):
    lead_v = v * lead_frac
    gap = idm_stopping_distance(v) + 0.1
    cs, ls = lead_brake(v, lead_v, gap, decel, brake_time)
    tr = simulate(cs, ls, SimConfig(horizon=30.0))
    assert not tr.get("collision", "ego", "lead").any()


def test_scripted_brake_hits_lead():
    cs, ls = lead_brake(20.0, 20.0, 20.0, 6.0, brake_time=1.0)
    tr = simulate(cs, ls, SimConfig(controller="scripted_brake", params={"brake_at": 2.0, "decel": 1.0}))
    assert tr.get("collision", "ego", "lead")[-1] == 1.0
    assert tr.get("gap", "ego", "lead")[-1] == 0.0


def test_cut_in_scene_channels():
    cs, ls = scene("cut_in", ego_speed=25.0, cutter_speed=20.0, cut_in_gap=20.0, cutter_decel=2.0)
    tr = simulate(cs, ls, SimConfig())
    assert {str(c) for c in tr.channels} >= {"gap:ego:cutter", "ttc:ego:cutter", "collision:ego:cutter"}


def test_road_length_ends_run():
    cs, ls = scene("free_drive", ego_speed=20.0, road_length=100.0)
    tr = simulate(cs, ls, SimConfig())
    assert tr.get("pos", "ego")[-1] >= 100.0
    assert tr.get("pos", "ego")[-2] < 100.0


def test_template_params_resolved():
    ls = LogicalScenario("ls", "fs", (), SceneTemplate("free_drive", (("ego_speed", ParamRef("v")),)), "r")
    tr = simulate(ConcreteScenario("ls-000000", "ls", 0, {"v": 12.0}), ls, SimConfig(horizon=1.0))
    assert tr.get("speed", "ego")[0] == 12.0
    with pytest.raises(SimError, match="unassigned"):
        simulate(ConcreteScenario("ls-000000", "ls", 0, {}), ls, SimConfig(horizon=1.0))


def test_deterministic():
    cs, ls = lead_brake(22.0, 18.0, 40.0, 4.0, 2.0)
    a = serialize_trace(simulate(cs, ls, SimConfig()))
    b = serialize_trace(simulate(cs, ls, SimConfig()))
    assert a == b


@given(st.floats(0.0, 40.0), st.floats(0.0, 40.0), st.floats(0.5, 100.0), st.floats(0.0, 9.0),
       st.sampled_from(["constant_speed", "scripted_brake", "idm_follower"]))
@settings(max_examples=150, deadline=None)
def test_physical_sanity(v, lead_v, gap, decel, controller):
    cs, ls = lead_brake(v, lead_v, gap, decel, 1.0)
    tr = simulate(cs, ls, SimConfig(controller=controller, horizon=10.0))
    assert np.all(tr.get("speed", "ego") >= 0) and np.all(tr.get("speed", "lead") >= 0)
    assert np.all(np.diff(tr.get("pos", "ego")) >= 0)
    gap = tr.get("gap", "ego", "lead")
    assert np.all(gap >= 0)
    rel = np.abs(tr.get("speed", "lead") - tr.get("speed", "ego"))
    assert np.all(np.abs(np.diff(gap)) <= rel.max() * 0.05 + 1e-9)
    coll = tr.get("collision", "ego", "lead")
    assert np.all(np.diff(coll) >= 0)
    # a run stops at first contact
    assert coll[:-1].sum() == 0


@pytest.mark.parametrize("kwargs", [
    dict(dt=0.0), dict(horizon=0.01), dict(controller="pid"),
    dict(controller="idm_follower", params={"min_gap": -1.0}),
    dict(controller="constant_speed", params={"decel": 1.0}),
    dict(vehicle_length=-1.0),
])
def test_config_validation(kwargs):
    with pytest.raises(SimError):
        SimConfig(**kwargs)


def test_config_roundtrip():
    cfg = SimConfig(dt=0.1, horizon=12.0, controller="scripted_brake", params={"decel": 3.0})
    assert SimConfig.from_dict(cfg.to_dict()) == cfg
