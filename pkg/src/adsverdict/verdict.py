"""Campaign evaluation: run outcomes in, overall verdict and report out."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .catalogue import Catalogue, ConcreteScenario
from .risk import LevelDecision, RiskPolicy, Status, cumulative_counts, decide_functional
from .rules import evaluate_rules
from .sampling import BudgetPlan
from .severity import RunOutcome, SeverityLevel
from .trace import Trace

REPORT_VERSION = 1


class CampaignError(ValueError):
    """Inputs to a campaign are inconsistent (e.g. a trace is missing)."""


@dataclass(frozen=True)
class CampaignResult:
    per_run: Tuple[Tuple[str, RunOutcome], ...]
    per_functional: Mapping[str, Tuple[LevelDecision, ...]]
    prescriptive_failures: Tuple[Tuple[str, Tuple[str, ...]], ...]
    overall: str  # "PASS" | "FAIL" | "INCONCLUSIVE"
    decision_policy: str = "permissive"
    significance: float = 0.05


def overall_status(failures: Sequence, decisions: Mapping[str, Sequence[LevelDecision]],
                   decision_policy: str) -> str:
    all_levels = [d for ds in decisions.values() for d in ds]
    if failures or any(d.status is Status.PROVEN_UNSAFE for d in all_levels):
        return "FAIL"
    if decision_policy == "permissive":
        return "PASS"
    applicable = [d for d in all_levels if d.status is not Status.NOT_APPLICABLE]
    if all(d.status is Status.PROVEN_SAFE for d in applicable):
        return "PASS"
    return "INCONCLUSIVE"


def decide_campaign(catalogue: Catalogue, outcomes: Mapping[str, RunOutcome],
                    functional_of: Mapping[str, str], policy: RiskPolicy) -> CampaignResult:
    """Aggregate per-run outcomes into per-functional decisions and a verdict.

    Prescriptive failures force FAIL but are excluded from the risk counts,
    so the statistics are reported unchanged alongside them.
    """
    by_fn: Dict[str, List[RunOutcome]] = defaultdict(list)
    failures = []
    for cid in sorted(outcomes):
        out = outcomes[cid]
        if out.is_failure:
            failures.append((cid, tuple(out.violated_rules)))
        else:
            by_fn[functional_of[cid]].append(out)
    decisions = {}
    for fs in sorted(catalogue.functional, key=lambda f: f.id):
        scored = by_fn.get(fs.id, [])
        decisions[fs.id] = tuple(decide_functional(cumulative_counts(scored), len(scored), fs, policy))
    return CampaignResult(
        per_run=tuple((cid, outcomes[cid]) for cid in sorted(outcomes)),
        per_functional=decisions,
        prescriptive_failures=tuple(failures),
        overall=overall_status(failures, decisions, policy.decision_policy),
        decision_policy=policy.decision_policy,
        significance=policy.significance,
    )


def _score(args):
    rs, tr, cs, fs = args
    return cs.id, evaluate_rules(rs, tr, cs, fs)


def evaluate_campaign(catalogue: Catalogue, budget: Optional[BudgetPlan],
                      concretes: Sequence[ConcreteScenario], traces: Mapping[str, Trace],
                      policy: RiskPolicy, jobs: int = 1) -> CampaignResult:
    """Score every concrete run and reach the overall verdict."""
    functional_of = {}
    work = []
    per_fn_count: Dict[str, int] = defaultdict(int)
    for cs in sorted(concretes, key=lambda c: c.id):
        if cs.id in functional_of:
            raise CampaignError(f"duplicate concrete id {cs.id!r}")
        try:
            ls = catalogue.logical_by_id(cs.logical_id)
        except KeyError:
            raise CampaignError(f"concrete {cs.id}: unknown logical scenario {cs.logical_id!r}") from None
        if cs.id not in traces:
            raise CampaignError(f"missing trace for concrete scenario {cs.id}")
        fs = catalogue.functional_by_id(ls.functional_id)
        functional_of[cs.id] = fs.id
        per_fn_count[fs.id] += 1
        work.append((catalogue.ruleset_for(ls), traces[cs.id], cs, fs))
    if budget is not None:
        for fid, n in sorted(budget.allocations.items()):
            if per_fn_count.get(fid, 0) != n:
                raise CampaignError(
                    f"functional {fid}: budget has {n} runs but {per_fn_count.get(fid, 0)} were supplied"
                )

    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            scored = dict(pool.map(_score, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        scored = dict(map(_score, work))
    return decide_campaign(catalogue, scored, functional_of, policy)


# -- report I/O --------------------------------------------------------------

def _float_out(x: float):
    return None if math.isinf(x) else x


def report_to_dict(r: CampaignResult) -> dict:
    per_functional = {}
    for fid in sorted(r.per_functional):
        levels = r.per_functional[fid]
        per_functional[fid] = {
            "n_tests": levels[0].n_tests if levels else 0,
            "counts": {d.level.name: d.k_events for d in levels},
            "levels": [
                {
                    "level": d.level.name,
                    "n_tests": d.n_tests,
                    "k_events": d.k_events,
                    "l_acceptable": _float_out(d.l_acceptable),
                    "p_value_Ha": d.p_value_Ha,
                    "p_value_Hb": d.p_value_Hb,
                    "status": d.status.value,
                }
                for d in levels
            ],
        }
    return {
        "version": REPORT_VERSION,
        "overall": r.overall,
        "decision_policy": r.decision_policy,
        "significance": r.significance,
        "prescriptive_failures": [
            {"concrete_id": cid, "rules": list(names)} for cid, names in r.prescriptive_failures
        ],
        "per_functional": per_functional,
        "per_run": [
            {
                "concrete_id": cid,
                "outcome": "PRESCRIPTIVE_FAILURE" if out.is_failure else "SCORED",
                "severity": None if out.is_failure else out.severity.name,
                "violated_rules": list(out.violated_rules),
            }
            for cid, out in r.per_run
        ],
    }


def report_from_dict(d: dict) -> CampaignResult:
    if d.get("version") != REPORT_VERSION:
        raise ValueError("unsupported report version")
    per_functional = {}
    for fid, entry in d["per_functional"].items():
        per_functional[fid] = tuple(
            LevelDecision(
                level=SeverityLevel[lv["level"]],
                n_tests=lv["n_tests"],
                k_events=lv["k_events"],
                l_acceptable=math.inf if lv["l_acceptable"] is None else lv["l_acceptable"],
                p_value_Ha=lv["p_value_Ha"],
                p_value_Hb=lv["p_value_Hb"],
                status=Status(lv["status"]),
            )
            for lv in entry["levels"]
        )
    per_run = []
    for run in d["per_run"]:
        if run["outcome"] == "PRESCRIPTIVE_FAILURE":
            out = RunOutcome.failure(run["violated_rules"])
        else:
            out = RunOutcome.scored(SeverityLevel[run["severity"]])
        per_run.append((run["concrete_id"], out))
    return CampaignResult(
        per_run=tuple(per_run),
        per_functional=per_functional,
        prescriptive_failures=tuple((f["concrete_id"], tuple(f["rules"]))
                                    for f in d["prescriptive_failures"]),
        overall=d["overall"],
        decision_policy=d["decision_policy"],
        significance=d["significance"],
    )


def dumps_report(r: CampaignResult) -> str:
    return json.dumps(report_to_dict(r), indent=2, allow_nan=False) + "\n"


def write_report(r: CampaignResult, path) -> None:
    """Write the report as deterministic JSON (ids sorted, fixed key order)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_report(r))


def read_report(path) -> CampaignResult:
    with open(path, encoding="utf-8") as fh:
        return report_from_dict(json.load(fh))
