import copy
import json

import pytest

from adsverdict.catalogue import (
    CatalogueError,
    ConcreteScenario,
    Discrete,
    catalogue_from_dict,
    catalogue_to_dict,
    concrete_from_dict,
    concrete_to_dict,
    dump_catalogue,
    load_catalogue,
    read_concrete,
    validate_catalogue,
    validate_concrete,
    write_concrete,
)
from conftest import write_doc


def test_fixture_loads(catalogue):
    assert [fs.id for fs in catalogue.functional] == ["free_drive", "lead_brake", "cut_in"]
    assert len(catalogue.logical) == 4
    assert validate_catalogue(catalogue) == []
    assert [ls.id for ls in catalogue.logical_for("lead_brake")] == [
        "lead_brake_urban", "lead_brake_highway"]


def test_two_functional_variant(catalogue_copy):
    path, doc = catalogue_copy
    doc["functional"] = [f for f in doc["functional"] if f["id"] != "free_drive"]
    doc["logical"] = [l for l in doc["logical"] if l["functional_id"] != "free_drive"]
    write_doc(path, doc)
    cat = load_catalogue(path)
    assert len(cat.functional) == 2 and len(cat.logical) == 3


def test_duplicate_functional_id(catalogue_copy):
    path, doc = catalogue_copy
    doc["functional"][1]["id"] = "free_drive"
    write_doc(path, doc)
    with pytest.raises(CatalogueError, match="duplicate functional id 'free_drive'"):
        load_catalogue(path)


def test_probabilities_must_sum_to_one(catalogue_copy):
    path, doc = catalogue_copy
    doc["logical"][0]["parameters"][1]["distribution"]["values"] = [[26.8, 0.5], [31.3, 0.4]]
    write_doc(path, doc)
    with pytest.raises(CatalogueError, match="probabilities must sum to 1"):
        load_catalogue(path)


def _issues(doc, catalogue):
    cat = catalogue_from_dict(doc, catalogue.rulesets)
    return [i for i in validate_catalogue(cat) if i.severity == "error"]


def test_zero_exposure(catalogue):
    doc = catalogue_to_dict(catalogue)
    doc["functional"][1]["exposure"]["value"] = 0.0
    issues = _issues(doc, catalogue)
    assert [i.message for i in issues] == ["exposure must be positive"]


def test_time_proportion_needs_duration(catalogue):
    doc = catalogue_to_dict(catalogue)
    del doc["functional"][0]["exposure"]["mean_duration_hours"]
    issues = _issues(doc, catalogue)
    assert len(issues) == 1 and "mean_duration_hours" in issues[0].message


@pytest.mark.parametrize("mutate, msg", [
    (lambda d: d["logical"][0].update(functional_id="nope"), "does not resolve"),
    (lambda d: d["logical"][1]["parameters"].pop(), "unknown parameter 'decel'"),
    (lambda d: d["logical"][1]["scene_template"].pop("brake_time"), "missing field 'brake_time'"),
    (lambda d: d["logical"][1]["parameters"][0]["distribution"].update(sd=0.0), "sd > 0"),
    (lambda d: d["logical"][1]["parameters"][1]["distribution"].update(lo=50.0), "lo < hi"),
    (lambda d: d["functional"][0].update(demand_prior=-1.0), "demand_prior"),
    (lambda d: d["logical"][2].update(id="lead_brake_urban"), "duplicate logical id"),
])
def test_invariants(catalogue, mutate, msg):
    doc = catalogue_to_dict(catalogue)
    mutate(doc)
    assert any(msg in i.message for i in _issues(doc, catalogue))


@pytest.mark.parametrize("mutate, msg", [
    (lambda d: d.update(version=2), "version"),
    (lambda d: d["functional"][0].update(colour="red"), "unknown field"),
    (lambda d: d["functional"][0].pop("exposure"), "exposure"),
    (lambda d: d["logical"][0]["parameters"][0]["distribution"].update(kind="beta"), "beta"),
    (lambda d: d["functional"][0].update(demand_prior="1"), "demand_prior"),
])
def test_decode_errors(catalogue, mutate, msg):
    doc = catalogue_to_dict(catalogue)
    mutate(doc)
    with pytest.raises(CatalogueError, match=msg):
        catalogue_from_dict(doc)


def test_unknown_meta_name(catalogue_copy):
    path, _ = catalogue_copy
    with open(path / "rules" / "cut_in.rules", "a") as fh:
        fh.write("\nrule x risk severity S0 if meta(weather) > 0\n")
    with pytest.raises(CatalogueError, match="unknown meta field 'weather'"):
        load_catalogue(path)


def test_missing_ruleset_file(catalogue_copy):
    path, _ = catalogue_copy
    (path / "rules" / "cut_in.rules").unlink()
    with pytest.raises(CatalogueError, match="missing ruleset file"):
        load_catalogue(path)


def test_ruleset_syntax_error_located(catalogue_copy):
    path, _ = catalogue_copy
    (path / "rules" / "cut_in.rules").write_text("rule x risk\n  severity S9 if 1\n")
    with pytest.raises(CatalogueError, match=r"cut_in\.rules:2:"):
        load_catalogue(path)


def test_roundtrip(catalogue, tmp_path):
    doc = catalogue_to_dict(catalogue)
    assert catalogue_from_dict(json.loads(json.dumps(doc)), catalogue.rulesets) == catalogue
    dump_catalogue(catalogue, tmp_path / "out")
    again = load_catalogue(tmp_path / "out")
    assert again == catalogue
    dump_catalogue(again, tmp_path / "out2")
    assert (tmp_path / "out" / "catalogue.json").read_bytes() == \
        (tmp_path / "out2" / "catalogue.json").read_bytes()


def test_load_does_not_modify_inputs(catalogue_copy):
    path, doc = catalogue_copy
    before = {p: p.read_bytes() for p in path.rglob("*") if p.is_file()}
    load_catalogue(path)
    load_catalogue(path)
    assert before == {p: p.read_bytes() for p in path.rglob("*") if p.is_file()}


def test_discrete_support():
    d = Discrete(((1.0, 0.5), (2.0, 0.5)))
    assert d.contains(2.0) and not d.contains(1.5)


def test_concrete_roundtrip_and_validation(catalogue, tmp_path):
    ls = catalogue.logical_by_id("lead_brake_highway")
    cs = ConcreteScenario("lead_brake_highway-000003", ls.id, 2 ** 64 - 1,
                          {"v": 25.5, "gap": 60.0, "decel": 5.0})
    assert validate_concrete(cs, ls) == []
    write_concrete(cs, tmp_path / "c.json")
    assert read_concrete(tmp_path / "c.json") == cs
    bad = ConcreteScenario(cs.id, ls.id, 1, {"v": 25.5, "gap": 60.0, "decel": 4.0, "x": 1.0})
    msgs = [i.message for i in validate_concrete(bad, ls)]
    assert any("outside support" in m for m in msgs)
    assert any("unknown parameter 'x'" in m for m in msgs)
    with pytest.raises(CatalogueError, match="seed"):
        d = concrete_to_dict(cs)
        d["seed"] = -1
        concrete_from_dict(d)
