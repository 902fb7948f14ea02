"""
Scoring a single run
====================

Prescriptive rules fail the system outright. Risk rules bin the run into
a severity level. Which one applies to a collision depends on whether the
other road user behaved reasonably.
"""

from adsverdict.catalogue import ConcreteScenario, Exposure, FunctionalScenario, LogicalScenario, SceneTemplate
from adsverdict.rules import crash_severity_rule, evaluate_rules, format_ruleset, parse_ruleset
from adsverdict.simkit import SimConfig, simulate

source = """
rule no_collision prescriptive
  when meta(others_reasonable)
  assert never(collision(ego, lead) > 0)

rule margin risk
  severity S0 if min(ttc(ego, lead)) < 1.5
""" + crash_severity_rule("crash", "ego", "lead", when="not meta(others_reasonable)")

rules = parse_ruleset(source)
print(format_ruleset(rules))

# an ego that ignores the lead and brakes late
scene = SceneTemplate("lead_brake", (("brake_time", 1.0), ("ego_speed", 20.0), ("initial_gap", 15.0),
                                     ("lead_decel", 6.0), ("lead_speed", 20.0)))
ls = LogicalScenario("late_brake", "lead_brake", (), scene, "inline")
cs = ConcreteScenario("late_brake-000000", ls.id, 0, {})
trace = simulate(cs, ls, SimConfig(controller="scripted_brake", params={"brake_at": 2.0, "decel": 2.0}))
print("contact at t =", trace.t[-1], "s, closing speed", trace.get("closing_speed", "ego", "lead")[-1])

for reasonable in (True, False):
    fs = FunctionalScenario("lead_brake", "", (), Exposure("rate_per_hour", 1.0), reasonable, 1.0)
    print(f"others_reasonable={reasonable}:", evaluate_rules(rules, trace, cs, fs))

# the same scene with the reference follower
trace = simulate(cs, ls, SimConfig())
fs = FunctionalScenario("lead_brake", "", (), Exposure("rate_per_hour", 1.0), True, 1.0)
print("idm follower:", evaluate_rules(rules, trace, cs, fs),
      "min gap", round(trace.get("gap", "ego", "lead").min(), 2), "m")
