import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adsverdict.catalogue import ConcreteScenario, Exposure, FunctionalScenario
from adsverdict.rules import (
    BoolOp,
    Compare,
    Rule,
    RuleEvaluationError,
    RuleSyntaxError,
    Truthy,
    crash_severity_rule,
    eval_condition,
    evaluate_rules,
    format_expr,
    format_ruleset,
    parse_condition,
    parse_ruleset,
    severity_from_delta_v,
)
from adsverdict.severity import RunOutcome, SeverityLevel as S
from adsverdict.trace import Trace

CORPUS = """
# ten rules covering every construct in the grammar
rule no_crash prescriptive
  assert never(collision(ego, lead) > 0)

rule keep_limit prescriptive
  when param(speed_limit) > 0
  assert always(speed(ego) <= param("speed_limit"))

rule reasonable_no_crash prescriptive
  when meta(others_reasonable) and not meta(exposure_value) < 0.1
  assert never(collision(ego, lead) > 0)

rule gap_kept prescriptive
  assert min(gap(ego, lead)) >= 2 or eventually(speed(ego) == 0)

rule arithmetic prescriptive
  assert always(-speed(ego) * 2 + 3 / (1 + speed(lead)) < 100 - -4)

rule crash_sev risk
  when not meta(others_reasonable)
  severity S0 if eventually(collision(ego, lead) > 0)
  severity S3 if eventually(collision(ego, lead) > 0 and closing_speed(ego, lead) * 0.5 >= 11)

rule ttc_band risk
  severity S0 if min(ttc(ego, lead)) < 2
  severity S1 if min(ttc(ego, lead)) < 1

rule slow_time risk
  severity S0 if duration_where(speed(ego) < 1 or speed(ego) > 40) > 0.5

rule custom_channel risk
  severity S2 if max(lane_offset(ego)) - min(lane_offset(ego)) > (1.5 - 0.25) * 2

rule nested_bool risk
  severity S1 if not (always(speed(ego) >= 0) and (never(gap(ego, lead) < 0) or meta(demand_prior) != 1))
"""


def fs_of(reasonable=True):
    return FunctionalScenario("f", "", (), Exposure("rate_per_hour", 1.0), reasonable, 1.0)


def cs_of(**assignments):
    return ConcreteScenario("c-000000", "l", 0, assignments)


def pair_trace(collision, closing=5.0, n=5):
    coll = np.zeros(n)
    if collision:
        coll[-1] = 1.0
    gap = np.linspace(4.0, 0.0 if collision else 1.5, n)
    ttc = gap / closing if closing > 1e-6 else np.full(n, np.inf)
    return Trace(np.arange(n) * 0.1, {
        "speed:ego": np.full(n, 10.0), "speed:lead": np.full(n, 10.0 - closing),
        "gap:ego:lead": gap, "closing_speed:ego:lead": np.full(n, closing),
        "ttc:ego:lead": ttc, "collision:ego:lead": coll,
    })


def test_grammar_fixture():
    rs = parse_ruleset("rule no_crash prescriptive assert never(collision(ego, lead) > 0)")
    assert len(rs) == 1
    (rule,) = rs
    assert rule.name == "no_crash" and rule.kind == "prescriptive"


def test_duplicate_severity_level():
    text = "rule r risk\n  severity S1 if min(gap(ego, lead)) < 1\n  severity S1 if min(gap(ego, lead)) < 2\n"
    with pytest.raises(RuleSyntaxError, match="duplicate severity level S1") as exc:
        parse_ruleset(text)
    assert (exc.value.line, exc.value.col) == (3, 12)


@pytest.mark.parametrize("text, msg", [
    ("rule a prescriptive assert never(x(ego) > 0)\nrule a prescriptive assert never(x(ego) > 0)",
     "duplicate rule name"),
    ("rule a prescriptive assert speed(ego) > 0", "must be inside"),
    ("rule a prescriptive assert always(eventually(speed(ego) > 0))", "cannot be nested"),
    ("rule a prescriptive when min(speed(ego)) > 0 assert always(speed(ego) > 0)", "when clause"),
    ("rule a prescriptive assert always(speed(ego, lead) > 0)", "takes 1 actor"),
    ("rule a prescriptive assert always(foo(1) > 0)", "unknown function name 'foo'"),
    ("rule a prescriptive assert always(foo(a, b, c) > 0)", "unknown function name 'foo'"),
    ("rule a prescriptive assert always(speed > 0)", "bare identifier"),
    ("rule a prescriptive assert always(1 < 2 < 3)", "chained"),
    ("rule a prescriptive assert always((1 < 2) + 1 > 0)", "numeric expression"),
    ("rule a risk severity S4 if always(speed(ego) > 0)", "S0..S3"),
    ("rule a risk assert always(speed(ego) > 0)", "at least one severity"),
    ("rule a prescriptive assert always(speed(ego) > 0", "expected '\\)'"),
    ("", "no rules"),
    ("rule a prescriptive assert always(speed(ego) > 0) $", "1:"),
])
def test_syntax_errors(text, msg):
    with pytest.raises(RuleSyntaxError, match=msg):
        parse_ruleset(text)


def test_error_location_format():
    with pytest.raises(RuleSyntaxError) as exc:
        parse_ruleset("rule a prescriptive\n  assert always(speed(ego) >)\n")
    assert str(exc.value).startswith("2:")
    assert exc.value.line == 2 and exc.value.col > 0


def test_corpus_roundtrip():
    rs = parse_ruleset(CORPUS)
    assert len(rs) == 10
    printed = format_ruleset(rs)
    again = parse_ruleset(printed)
    assert again == rs
    assert format_ruleset(again) == printed


@pytest.mark.parametrize("text", [
    "(min(speed(ego)) + 1) * 2 > 3",
    "min(speed(ego)) - (1 - 2) > 0",
    "not (meta(a) and meta(b))",
    "meta(a) or meta(b) and meta(c)",
    "(meta(a) or meta(b)) and meta(c)",
    "-min(speed(ego)) < -(1 + 2)",
    "max(gap(ego, lead)) / (2 * 3) != 0",
])
def test_printer_preserves_structure(text):
    node = parse_condition(text)
    assert parse_condition(format_expr(node)) == node


def test_precedence():
    node = parse_condition("meta(a) or meta(b) and meta(c)")
    assert isinstance(node, BoolOp) and node.op == "or"
    assert isinstance(node.right, BoolOp) and node.right.op == "and"
    node = parse_condition("1 + 2 * 3 == 7")
    assert isinstance(node, Compare)
    assert isinstance(parse_condition("meta(others_reasonable)"), Truthy)


# -- temporal identities ------------------------------------------------------

PREDICATES = [
    "speed(ego) > 12",
    "gap(ego, lead) < 5 and speed(ego) >= 8",
    "speed(ego) - speed(lead) > 1 or gap(ego, lead) > 15",
]


def _eval(text, tr):
    return eval_condition(parse_condition(text), Rule("t", "prescriptive"), tr, {}, {})


def _random_traces(count, seed=20240501):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(1, 40))
        yield Trace(np.arange(n) * 0.1, dt_nominal=0.1, channels={
            "speed:ego": rng.uniform(0, 20, n), "speed:lead": rng.uniform(0, 20, n),
            "gap:ego:lead": rng.uniform(0, 20, n),
        })


@pytest.mark.parametrize("p", PREDICATES)
def test_de_morgan_temporal(p):
    for tr in _random_traces(100):
        always = _eval(f"always({p})", tr)
        never = _eval(f"never({p})", tr)
        eventually = _eval(f"eventually({p})", tr)
        assert always == (not _eval(f"eventually(not ({p}))", tr))
        assert never == (not eventually)
        assert never == _eval(f"always(not ({p}))", tr)
        assert eventually == (not _eval(f"always(not ({p}))", tr))


@given(st.lists(st.floats(0, 30), min_size=1, max_size=50),
       st.sampled_from([0.01, 0.05, 0.1]))
@settings(max_examples=200, deadline=None)
def test_duration_where_bounds(speeds, dt):
    tr = Trace(np.arange(len(speeds)) * dt, {"speed:ego": speeds}, dt_nominal=dt)
    d = _eval_num("duration_where(speed(ego) > 10)", tr)
    assert 0.0 <= d <= tr.duration + 1e-12
    assert _eval_num("duration_where(speed(ego) >= 0)", tr) == pytest.approx(tr.duration)


def _eval_num(text, tr):
    from adsverdict.rules import _Env, _eval as ev
    node = parse_condition(f"{text} == {text}").left
    return ev(node, _Env(Rule("t", "risk"), tr, {}, {}))


# -- run outcomes -------------------------------------------------------------

LEAD_RULES = parse_ruleset("""
rule no_collision prescriptive
  when meta(others_reasonable)
  assert never(collision(ego, lead) > 0)
""" + crash_severity_rule("crash", "ego", "lead", when="not meta(others_reasonable)"))


def test_collision_reasonable_is_prescriptive_failure():
    out = evaluate_rules(LEAD_RULES, pair_trace(True), cs_of(), fs_of(True))
    assert out == RunOutcome.failure(["no_collision"])


def test_collision_unreasonable_scored_by_severity():
    out = evaluate_rules(LEAD_RULES, pair_trace(True, closing=30.0), cs_of(), fs_of(False))
    assert out == RunOutcome.scored(S.S3)
    out = evaluate_rules(LEAD_RULES, pair_trace(True, closing=5.0), cs_of(), fs_of(False))
    assert out == RunOutcome.scored(S.S1)


def test_no_events_is_snone():
    out = evaluate_rules(LEAD_RULES, pair_trace(False), cs_of(), fs_of(False))
    assert out == RunOutcome.scored(S.SNONE)


def test_all_violated_prescriptive_rules_listed():
    rs = parse_ruleset("""
rule b prescriptive assert never(collision(ego, lead) > 0)
rule a prescriptive assert always(speed(ego) < 5)
rule c prescriptive assert always(speed(ego) < 50)
""")
    out = evaluate_rules(rs, pair_trace(True), cs_of(), fs_of())
    assert out.violated_rules == ("b", "a")


def test_severity_is_max_over_rules():
    rs = parse_ruleset("""
rule lo risk severity S0 if min(gap(ego, lead)) < 10
rule hi risk severity S2 if min(ttc(ego, lead)) < 1
rule off risk when param(enabled) > 0 severity S3 if min(gap(ego, lead)) < 10
""")
    assert evaluate_rules(rs, pair_trace(False), cs_of(enabled=0.0), fs_of()).severity is S.S2
    assert evaluate_rules(rs, pair_trace(False), cs_of(enabled=1.0), fs_of()).severity is S.S3


def test_unresolved_reference():
    rs = parse_ruleset("rule a prescriptive assert always(speed(cutter) > 0)")
    with pytest.raises(RuleEvaluationError, match="speed:cutter"):
        evaluate_rules(rs, pair_trace(False), cs_of(), fs_of())
    rs = parse_ruleset("rule a prescriptive when param(x) > 0 assert always(speed(ego) > 0)")
    with pytest.raises(RuleEvaluationError, match='param\\("x"\\)'):
        evaluate_rules(rs, pair_trace(False), cs_of(), fs_of())


def test_evaluation_is_pure():
    tr = pair_trace(True, closing=12.0)
    outs = {evaluate_rules(LEAD_RULES, tr, cs_of(), fs_of(False)) for _ in range(5)}
    assert len(outs) == 1


@given(st.floats(0, 40), st.floats(0, 40))
@settings(max_examples=200, deadline=None)
def test_worse_closing_never_lowers_severity(c1, c2):
    lo, hi = sorted((c1, c2))
    s_lo = evaluate_rules(LEAD_RULES, pair_trace(True, closing=lo), cs_of(), fs_of(False)).severity
    s_hi = evaluate_rules(LEAD_RULES, pair_trace(True, closing=hi), cs_of(), fs_of(False)).severity
    assert s_hi >= s_lo


# -- delta-V binning ----------------------------------------------------------

@pytest.mark.parametrize("dv, level", [(0.0, S.S0), (0.99, S.S0), (1.0, S.S1), (5.0, S.S2),
                                       (11.0, S.S3), (30.0, S.S3)])
def test_delta_v_bins(dv, level):
    assert severity_from_delta_v(dv) is level


def test_delta_v_rejects_negative():
    with pytest.raises(ValueError):
        severity_from_delta_v(-1.0)


@given(st.floats(0.0, 50.0))
@settings(max_examples=200, deadline=None)
def test_generated_rule_matches_binning(closing):
    out = evaluate_rules(LEAD_RULES, pair_trace(True, closing=closing), cs_of(), fs_of(False))
    assert out.severity is severity_from_delta_v(closing * 0.5)
