"""
A complete campaign
===================

Allocate a budget over the fixture catalogue, sample concrete scenarios,
simulate them with a good and a bad controller, and decide.
"""

import os

from adsverdict import (allocate_budget, evaluate_campaign, load_catalogue, load_policy,
                        sample_campaign, simulate_all)
from adsverdict.simkit import load_sim_config
from adsverdict.verdict import report_to_dict

root = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures", "three_functional")
catalogue = load_catalogue(root)
policy = load_policy(os.path.join(root, "policy.json"))

plan = allocate_budget(catalogue, total=300, floor=20)
print("allocation:", dict(plan.allocations))

concretes = sample_campaign(catalogue, plan, seed=7)
print(len(concretes), "concrete scenarios, first:", concretes[0].id, dict(concretes[0].assignments))

for name in ("sim_idm.json", "sim_crash.json"):
    cfg = load_sim_config(os.path.join(root, name))
    traces = simulate_all(catalogue, concretes, cfg)
    result = evaluate_campaign(catalogue, plan, concretes, traces, policy)
    print(f"\n{cfg.controller}: overall {result.overall}, "
          f"{len(result.prescriptive_failures)} prescriptive failure(s)")
    for fid, entry in report_to_dict(result)["per_functional"].items():
        levels = "  ".join(f"{lv['level']}:{lv['k_events']}/{lv['n_tests']} {lv['status']}"
                           for lv in entry["levels"])
        print(f"  {fid:<11} {levels}")
