"""Scenario catalogue: functional, logical and concrete scenarios on disk.

A catalogue is a directory holding ``catalogue.json`` and the ruleset files
it references::

    {"version": 1,
     "functional": [{"id": "lead_brake", "description": "...", "tags": [],
                     "exposure": {"kind": "rate_per_hour", "value": 1.0},
                     "others_reasonable": true, "demand_prior": 2.0}],
     "logical": [{"id": "lead_brake_urban", "functional_id": "lead_brake",
                  "parameters": [{"name": "v_ego",
                                  "distribution": {"kind": "uniform", "lo": 8, "hi": 14}}],
                  "scene_template": {"kind": "lead_brake", "ego_speed": {"param": "v_ego"},
                                     "lead_speed": 12.0, ...},
                  "ruleset_ref": "rules/lead_brake.rules"}]}

Unknown fields are rejected. Loaded values are immutable.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .rules import RuleSet, RuleSyntaxError, format_ruleset, parse_ruleset

CATALOGUE_FILE = "catalogue.json"
FORMAT_VERSION = 1
PROB_TOL = 1e-9

#: Meta names available to rules, see :func:`adsverdict.rules.metadata_of`.
META_NAMES = {"others_reasonable", "demand_prior", "exposure_value", "exposure_mean_duration_hours"}


class CatalogueError(ValueError):
    """Raised when a catalogue cannot be loaded."""


# -- types -----------------------------------------------------------------

@dataclass(frozen=True)
class Exposure:
    kind: str  # "rate_per_hour" | "time_proportion"
    value: float
    mean_duration_hours: Optional[float] = None


@dataclass(frozen=True)
class FunctionalScenario:
    id: str
    description: str
    tags: Tuple[str, ...]
    exposure: Exposure
    others_reasonable: bool
    demand_prior: float


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class TruncNormal:
    mean: float
    sd: float
    lo: float
    hi: float

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class Discrete:
    values: Tuple[Tuple[float, float], ...]  # (value, probability)

    def contains(self, x: float) -> bool:
        return any(v == x for v, _ in self.values)


Distribution = Union[Uniform, TruncNormal, Discrete]


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    distribution: Distribution


@dataclass(frozen=True)
class ParamRef:
    """A template field bound to a logical-scenario parameter."""

    name: str


#: Template kinds with their required and optional fields.
TEMPLATE_FIELDS = {
    "free_drive": ({"ego_speed"}, {"road_length"}),
    "lead_brake": ({"ego_speed", "lead_speed", "initial_gap", "lead_decel", "brake_time"},
                   {"road_length"}),
    "cut_in": ({"ego_speed", "cutter_speed", "cut_in_gap"}, {"cutter_decel", "road_length"}),
}


@dataclass(frozen=True)
class SceneTemplate:
    kind: str
    fields: Tuple[Tuple[str, Union[float, ParamRef]], ...]

    def field_map(self) -> Dict[str, Union[float, ParamRef]]:
        return dict(self.fields)

    def param_refs(self) -> List[str]:
        return [v.name for _, v in self.fields if isinstance(v, ParamRef)]

    def resolve(self, assignments: Mapping[str, float]) -> Dict[str, float]:
        out = {}
        for k, v in self.fields:
            out[k] = float(assignments[v.name]) if isinstance(v, ParamRef) else float(v)
        return out


@dataclass(frozen=True)
class LogicalScenario:
    id: str
    functional_id: str
    parameters: Tuple[ParameterSpec, ...]
    scene_template: SceneTemplate
    ruleset_ref: str

    def parameter(self, name: str) -> ParameterSpec:
        for p in self.parameters:
            if p.name == name:
                return p
        raise KeyError(name)


@dataclass(frozen=True)
class ConcreteScenario:
    id: str
    logical_id: str
    seed: int
    assignments: Mapping[str, float]


@dataclass(frozen=True)
class Catalogue:
    functional: Tuple[FunctionalScenario, ...]
    logical: Tuple[LogicalScenario, ...]
    rulesets: Mapping[str, RuleSet] = field(default_factory=dict)
    root: Optional[str] = field(default=None, compare=False)

    def functional_by_id(self, fid: str) -> FunctionalScenario:
        for fs in self.functional:
            if fs.id == fid:
                return fs
        raise KeyError(fid)

    def logical_by_id(self, lid: str) -> LogicalScenario:
        for ls in self.logical:
            if ls.id == lid:
                return ls
        raise KeyError(lid)

    def logical_for(self, fid: str) -> List[LogicalScenario]:
        return [ls for ls in self.logical if ls.functional_id == fid]

    def ruleset_for(self, ls: LogicalScenario) -> RuleSet:
        return self.rulesets[ls.ruleset_ref]


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" | "warning"
    location: str
    message: str

    def __str__(self):
        return f"{self.severity}: {self.location}: {self.message}"


# -- validation ------------------------------------------------------------

def _distribution_issues(dist, loc: str) -> List[Issue]:
    issues = []
    err = lambda msg: issues.append(Issue("error", loc, msg))
    if isinstance(dist, Uniform):
        if not (math.isfinite(dist.lo) and math.isfinite(dist.hi)) or not dist.lo < dist.hi:
            err("uniform needs finite lo < hi")
    elif isinstance(dist, TruncNormal):
        if not (math.isfinite(dist.lo) and math.isfinite(dist.hi)) or not dist.lo < dist.hi:
            err("trunc_normal needs finite lo < hi")
        if not dist.sd > 0:
            err("trunc_normal needs sd > 0")
        if not math.isfinite(dist.mean):
            err("trunc_normal mean must be finite")
    elif isinstance(dist, Discrete):
        if not dist.values:
            err("discrete distribution has no values")
        elif any(not p > 0 for _, p in dist.values):
            err("discrete probabilities must be positive")
        elif abs(math.fsum(p for _, p in dist.values) - 1.0) > PROB_TOL:
            err("probabilities must sum to 1")
        vals = [v for v, _ in dist.values]
        if len(set(vals)) != len(vals):
            err("discrete values must be distinct")
    else:
        err(f"unknown distribution {dist!r}")
    return issues


def validate_catalogue(c: Catalogue) -> List[Issue]:
    """Check every catalogue invariant; an empty list means valid."""
    issues: List[Issue] = []
    error = lambda loc, msg: issues.append(Issue("error", loc, msg))

    seen = set()
    for fs in c.functional:
        loc = f"functional[{fs.id}]"
        if fs.id in seen:
            error(loc, f"duplicate functional id {fs.id!r}")
        seen.add(fs.id)
        e = fs.exposure
        if e.kind not in ("rate_per_hour", "time_proportion"):
            error(loc, f"unknown exposure kind {e.kind!r}")
        if not e.value > 0 or not math.isfinite(e.value):
            error(loc, "exposure must be positive")
        if e.kind == "time_proportion":
            if e.value > 1:
                error(loc, "time_proportion exposure must be <= 1")
            if e.mean_duration_hours is None:
                error(loc, "time_proportion exposure needs mean_duration_hours")
            elif not e.mean_duration_hours > 0:
                error(loc, "mean_duration_hours must be positive")
        if not fs.demand_prior > 0 or not math.isfinite(fs.demand_prior):
            error(loc, "demand_prior must be positive")

    fids = {fs.id for fs in c.functional}
    seen = set()
    for ls in c.logical:
        loc = f"logical[{ls.id}]"
        if ls.id in seen:
            error(loc, f"duplicate logical id {ls.id!r}")
        seen.add(ls.id)
        if ls.functional_id not in fids:
            error(loc, f"functional_id {ls.functional_id!r} does not resolve")
        names = [p.name for p in ls.parameters]
        for name in sorted({n for n in names if names.count(n) > 1}):
            error(loc, f"duplicate parameter {name!r}")
        for p in ls.parameters:
            issues.extend(_distribution_issues(p.distribution, f"{loc}.{p.name}"))

        tpl = ls.scene_template
        if tpl.kind not in TEMPLATE_FIELDS:
            error(loc, f"unknown scene_template kind {tpl.kind!r}")
        else:
            required, optional = TEMPLATE_FIELDS[tpl.kind]
            keys = [k for k, _ in tpl.fields]
            for k in sorted(required - set(keys)):
                error(loc, f"scene_template missing field {k!r}")
            for k in keys:
                if k not in required and k not in optional:
                    error(loc, f"scene_template has unknown field {k!r}")
        for ref in tpl.param_refs():
            if ref not in names:
                error(loc, f"scene_template references unknown parameter {ref!r}")

        rs = c.rulesets.get(ls.ruleset_ref)
        if rs is None:
            error(loc, f"ruleset {ls.ruleset_ref!r} not loaded")
        else:
            refs = rs.references()
            for ref in sorted(refs["param"] - set(names)):
                error(loc, f"ruleset references unknown parameter {ref!r}")
            for ref in sorted(refs["meta"] - META_NAMES):
                error(loc, f"ruleset references unknown meta field {ref!r}")

    for fs in c.functional:
        if not c.logical_for(fs.id):
            issues.append(Issue("warning", f"functional[{fs.id}]", "no logical scenarios"))
    return issues


def validate_concrete(cs: ConcreteScenario, ls: LogicalScenario) -> List[Issue]:
    issues = []
    loc = f"concrete[{cs.id}]"
    names = {p.name for p in ls.parameters}
    for p in ls.parameters:
        if p.name not in cs.assignments:
            issues.append(Issue("error", loc, f"no assignment for parameter {p.name!r}"))
        elif not p.distribution.contains(cs.assignments[p.name]):
            issues.append(Issue("error", loc, f"{p.name}={cs.assignments[p.name]!r} outside support"))
    for extra in sorted(set(cs.assignments) - names):
        issues.append(Issue("error", loc, f"assignment for unknown parameter {extra!r}"))
    if cs.logical_id != ls.id:
        issues.append(Issue("error", loc, f"logical_id {cs.logical_id!r} != {ls.id!r}"))
    return issues


# -- JSON decoding ---------------------------------------------------------

def _fields(obj, path: str, required: Sequence[str], optional: Sequence[str] = ()):
    if not isinstance(obj, dict):
        raise CatalogueError(f"{path}: expected an object")
    for k in obj:
        if k not in required and k not in optional:
            raise CatalogueError(f"{path}: unknown field {k!r}")
    for k in required:
        if k not in obj:
            raise CatalogueError(f"{path}: missing field {k!r}")
    return obj


def _num(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise CatalogueError(f"{path}: expected a number")
    return float(v)


def _str(v, path: str) -> str:
    if not isinstance(v, str) or not v:
        raise CatalogueError(f"{path}: expected a nonempty string")
    return v


def _decode_distribution(d, path: str) -> Distribution:
    if not isinstance(d, dict) or "kind" not in d:
        raise CatalogueError(f"{path}: distribution needs a 'kind'")
    kind = d["kind"]
    if kind == "uniform":
        _fields(d, path, ("kind", "lo", "hi"))
        return Uniform(_num(d["lo"], path + ".lo"), _num(d["hi"], path + ".hi"))
    if kind == "trunc_normal":
        _fields(d, path, ("kind", "mean", "sd", "lo", "hi"))
        return TruncNormal(*(_num(d[k], f"{path}.{k}") for k in ("mean", "sd", "lo", "hi")))
    if kind == "discrete":
        _fields(d, path, ("kind", "values"))
        vals = d["values"]
        if not isinstance(vals, list):
            raise CatalogueError(f"{path}.values: expected a list of [value, probability]")
        pairs = []
        for i, pair in enumerate(vals):
            if not isinstance(pair, list) or len(pair) != 2:
                raise CatalogueError(f"{path}.values[{i}]: expected [value, probability]")
            pairs.append((_num(pair[0], f"{path}.values[{i}]"), _num(pair[1], f"{path}.values[{i}]")))
        return Discrete(tuple(pairs))
    raise CatalogueError(f"{path}: unknown distribution kind {kind!r}")


def _encode_distribution(dist: Distribution) -> dict:
    if isinstance(dist, Uniform):
        return {"kind": "uniform", "lo": dist.lo, "hi": dist.hi}
    if isinstance(dist, TruncNormal):
        return {"kind": "trunc_normal", "mean": dist.mean, "sd": dist.sd, "lo": dist.lo, "hi": dist.hi}
    return {"kind": "discrete", "values": [[v, p] for v, p in dist.values]}


def _decode_functional(d, path: str) -> FunctionalScenario:
    _fields(d, path, ("id", "description", "tags", "exposure", "others_reasonable", "demand_prior"))
    e = _fields(d["exposure"], path + ".exposure", ("kind", "value"), ("mean_duration_hours",))
    mdh = e.get("mean_duration_hours")
    exposure = Exposure(
        _str(e["kind"], path + ".exposure.kind"),
        _num(e["value"], path + ".exposure.value"),
        None if mdh is None else _num(mdh, path + ".exposure.mean_duration_hours"),
    )
    tags = d["tags"]
    if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
        raise CatalogueError(f"{path}.tags: expected a list of strings")
    if not isinstance(d["others_reasonable"], bool):
        raise CatalogueError(f"{path}.others_reasonable: expected a boolean")
    if not isinstance(d["description"], str):
        raise CatalogueError(f"{path}.description: expected a string")
    return FunctionalScenario(
        id=_str(d["id"], path + ".id"),
        description=d["description"],
        tags=tuple(tags),
        exposure=exposure,
        others_reasonable=d["others_reasonable"],
        demand_prior=_num(d["demand_prior"], path + ".demand_prior"),
    )


def _encode_functional(fs: FunctionalScenario) -> dict:
    e = {"kind": fs.exposure.kind, "value": fs.exposure.value}
    if fs.exposure.mean_duration_hours is not None:
        e["mean_duration_hours"] = fs.exposure.mean_duration_hours
    return {
        "id": fs.id, "description": fs.description, "tags": list(fs.tags), "exposure": e,
        "others_reasonable": fs.others_reasonable, "demand_prior": fs.demand_prior,
    }


def _decode_logical(d, path: str) -> LogicalScenario:
    _fields(d, path, ("id", "functional_id", "parameters", "scene_template", "ruleset_ref"))
    if not isinstance(d["parameters"], list):
        raise CatalogueError(f"{path}.parameters: expected a list")
    params = []
    for i, p in enumerate(d["parameters"]):
        pp = f"{path}.parameters[{i}]"
        _fields(p, pp, ("name", "distribution"))
        params.append(ParameterSpec(_str(p["name"], pp + ".name"),
                                    _decode_distribution(p["distribution"], pp + ".distribution")))
    t = d["scene_template"]
    tp = path + ".scene_template"
    if not isinstance(t, dict) or "kind" not in t:
        raise CatalogueError(f"{tp}: expected an object with 'kind'")
    items = []
    for k, v in t.items():
        if k == "kind":
            continue
        if isinstance(v, dict):
            _fields(v, f"{tp}.{k}", ("param",))
            items.append((k, ParamRef(_str(v["param"], f"{tp}.{k}.param"))))
        else:
            items.append((k, _num(v, f"{tp}.{k}")))
    return LogicalScenario(
        id=_str(d["id"], path + ".id"),
        functional_id=_str(d["functional_id"], path + ".functional_id"),
        parameters=tuple(params),
        scene_template=SceneTemplate(_str(t["kind"], tp + ".kind"), tuple(items)),
        ruleset_ref=_str(d["ruleset_ref"], path + ".ruleset_ref"),
    )


def _encode_logical(ls: LogicalScenario) -> dict:
    tpl = {"kind": ls.scene_template.kind}
    for k, v in ls.scene_template.fields:
        tpl[k] = {"param": v.name} if isinstance(v, ParamRef) else v
    return {
        "id": ls.id, "functional_id": ls.functional_id,
        "parameters": [{"name": p.name, "distribution": _encode_distribution(p.distribution)}
                       for p in ls.parameters],
        "scene_template": tpl, "ruleset_ref": ls.ruleset_ref,
    }


def catalogue_from_dict(doc, rulesets: Mapping[str, RuleSet] = None, root=None) -> Catalogue:
    _fields(doc, CATALOGUE_FILE, ("version", "functional", "logical"))
    if doc["version"] != FORMAT_VERSION:
        raise CatalogueError(f"{CATALOGUE_FILE}: unsupported version {doc['version']!r}")
    for key in ("functional", "logical"):
        if not isinstance(doc[key], list):
            raise CatalogueError(f"{CATALOGUE_FILE}.{key}: expected a list")
    functional = tuple(_decode_functional(d, f"functional[{i}]") for i, d in enumerate(doc["functional"]))
    logical = tuple(_decode_logical(d, f"logical[{i}]") for i, d in enumerate(doc["logical"]))
    return Catalogue(functional, logical, dict(rulesets or {}), root)


def catalogue_to_dict(c: Catalogue) -> dict:
    return {
        "version": FORMAT_VERSION,
        "functional": [_encode_functional(fs) for fs in c.functional],
        "logical": [_encode_logical(ls) for ls in c.logical],
    }


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, ensure_ascii=False, allow_nan=False) + "\n"


# -- filesystem ------------------------------------------------------------

def load_catalogue(root_path) -> Catalogue:
    """Load and validate the catalogue in directory ``root_path``.

    Raises :class:`CatalogueError` on missing files, malformed documents,
    dangling references or invariant violations.
    """
    root = os.fspath(root_path)
    path = os.path.join(root, CATALOGUE_FILE)
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except FileNotFoundError:
        raise CatalogueError(f"missing file {path}") from None
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CatalogueError(f"{path}: malformed JSON: {exc}") from None

    cat = catalogue_from_dict(doc, root=root)
    rulesets = {}
    for ls in cat.logical:
        ref = ls.ruleset_ref
        if ref in rulesets:
            continue
        rpath = os.path.join(root, ref)
        try:
            with open(rpath, encoding="utf-8") as fh:
                text = fh.read()
        except FileNotFoundError:
            raise CatalogueError(f"logical[{ls.id}]: missing ruleset file {rpath}") from None
        try:
            rulesets[ref] = parse_ruleset(text)
        except RuleSyntaxError as exc:
            raise CatalogueError(f"{rpath}:{exc}") from None
    cat = Catalogue(cat.functional, cat.logical, rulesets, root)

    errors = [i for i in validate_catalogue(cat) if i.severity == "error"]
    if errors:
        raise CatalogueError("; ".join(str(i) for i in errors))
    return cat


def dump_catalogue(c: Catalogue, root_path) -> None:
    """Write ``c`` as a catalogue directory (rulesets in canonical form)."""
    root = os.fspath(root_path)
    os.makedirs(root, exist_ok=True)
    with open(os.path.join(root, CATALOGUE_FILE), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump_json(catalogue_to_dict(c)))
    for ref, rs in c.rulesets.items():
        rpath = os.path.join(root, ref)
        os.makedirs(os.path.dirname(rpath) or root, exist_ok=True)
        with open(rpath, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_ruleset(rs))


def concrete_to_dict(cs: ConcreteScenario) -> dict:
    return {
        "id": cs.id, "logical_id": cs.logical_id, "seed": cs.seed,
        "assignments": {k: cs.assignments[k] for k in sorted(cs.assignments)},
    }


def concrete_from_dict(d, path: str = "concrete") -> ConcreteScenario:
    _fields(d, path, ("id", "logical_id", "seed", "assignments"))
    seed = d["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise CatalogueError(f"{path}.seed: expected a 64-bit unsigned integer")
    if not isinstance(d["assignments"], dict):
        raise CatalogueError(f"{path}.assignments: expected an object")
    return ConcreteScenario(
        id=_str(d["id"], path + ".id"),
        logical_id=_str(d["logical_id"], path + ".logical_id"),
        seed=seed,
        assignments={k: _num(v, f"{path}.assignments.{k}") for k, v in d["assignments"].items()},
    )


def write_concrete(cs: ConcreteScenario, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump_json(concrete_to_dict(cs)))


def read_concrete(path) -> ConcreteScenario:
    try:
        with open(path, "rb") as fh:
            doc = json.loads(fh.read().decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CatalogueError(f"{path}: malformed JSON: {exc}") from None
    return concrete_from_dict(doc, os.fspath(path))
