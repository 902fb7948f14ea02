"""Command-line front end.

    adsverdict sample CATALOGUE --total N [--floor F] [--seed S] --out DIR
    adsverdict run CATALOGUE CONCRETE_DIR POLICY (--sim | --traces DIR) --out REPORT
    adsverdict check RULESET

Exit codes: 0 PASS, 2 FAIL, 3 INCONCLUSIVE, 64 usage error, 65 data or
format error, 70 internal error. Progress goes to stderr, data to files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback

from .catalogue import CatalogueError, load_catalogue, read_concrete, write_concrete
from .risk import load_policy
from .rules import RuleEvaluationError, RuleSyntaxError, read_ruleset
from .sampling import BudgetError, allocate_budget, read_budget, sample_campaign, write_budget
from .simkit import SimConfig, SimError, load_sim_config, simulate_all
from .trace import TraceError, read_trace
from .verdict import CampaignError, evaluate_campaign, write_report

EXIT_PASS = 0
EXIT_FAIL = 2
EXIT_INCONCLUSIVE = 3
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_INTERNAL = 70

OVERALL_EXIT = {"PASS": EXIT_PASS, "FAIL": EXIT_FAIL, "INCONCLUSIVE": EXIT_INCONCLUSIVE}
DATA_ERRORS = (CatalogueError, TraceError, RuleSyntaxError, RuleEvaluationError, CampaignError,
               SimError, json.JSONDecodeError, UnicodeDecodeError, FileNotFoundError,
               ValueError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adsverdict", description="Scenario-based ADS pass/fail evaluation")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sample", help="allocate a test budget and sample concrete scenarios")
    p.add_argument("catalogue")
    p.add_argument("--total", type=_positive_int, required=True)
    p.add_argument("--floor", type=_nonneg_int, default=0)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=_positive_int, default=os.cpu_count() or 1)

    p = sub.add_parser("run", help="simulate or ingest traces, score them and decide")
    p.add_argument("catalogue")
    p.add_argument("concrete_dir")
    p.add_argument("policy")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--sim", action="store_true", help="use the built-in simulator")
    src.add_argument("--traces", metavar="DIR", help="directory of <concrete_id>.csv traces")
    p.add_argument("--sim-config", metavar="JSON", help="simulator configuration (with --sim)")
    p.add_argument("--out", required=True, help="report.json path")
    p.add_argument("--jobs", type=_positive_int, default=os.cpu_count() or 1)

    p = sub.add_parser("check", help="statically check a ruleset file")
    p.add_argument("ruleset")
    return parser


def cmd_sample(args) -> int:
    cat = load_catalogue(args.catalogue)
    try:
        plan = allocate_budget(cat, args.total, args.floor)
    except BudgetError as exc:
        raise UsageError(str(exc)) from None
    concretes = sample_campaign(cat, plan, args.seed, jobs=args.jobs)
    cdir = os.path.join(args.out, "concrete")
    os.makedirs(cdir, exist_ok=True)
    write_budget(plan, os.path.join(args.out, "budget.json"))
    for cs in concretes:
        write_concrete(cs, os.path.join(cdir, cs.id + ".json"))
    _log(f"{'functional':<32} {'prior':>8} {'runs':>8}")
    for fs in sorted(cat.functional, key=lambda f: f.id):
        _log(f"{fs.id:<32} {fs.demand_prior:>8g} {plan.allocations[fs.id]:>8d}")
    _log(f"wrote {len(concretes)} concrete scenarios to {cdir}")
    return EXIT_PASS


def _read_concrete_dir(path):
    cdir = os.path.join(path, "concrete")
    if not os.path.isdir(cdir):
        cdir = path
    if not os.path.isdir(cdir):
        raise CampaignError(f"concrete directory {path} does not exist")
    names = sorted(n for n in os.listdir(cdir) if n.endswith(".json"))
    concretes = [read_concrete(os.path.join(cdir, n)) for n in names]
    budget_path = os.path.join(path, "budget.json")
    budget = read_budget(budget_path) if os.path.exists(budget_path) else None
    return concretes, budget


def cmd_run(args) -> int:
    cat = load_catalogue(args.catalogue)
    policy = load_policy(args.policy)
    concretes, budget = _read_concrete_dir(args.concrete_dir)
    if args.sim:
        cfg = load_sim_config(args.sim_config) if args.sim_config else SimConfig()
        _log(f"simulating {len(concretes)} runs with {cfg.controller}")
        traces = simulate_all(cat, concretes, cfg, jobs=args.jobs)
    else:
        if args.sim_config:
            raise UsageError("--sim-config only applies with --sim")
        traces = {}
        for cs in concretes:
            path = os.path.join(args.traces, cs.id + ".csv")
            if not os.path.exists(path):
                raise CampaignError(f"missing trace for concrete scenario {cs.id} ({path})")
            try:
                traces[cs.id] = read_trace(path)
            except TraceError as exc:
                raise TraceError(f"{path}: {exc}") from None
    result = evaluate_campaign(cat, budget, concretes, traces, policy, jobs=args.jobs)
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    write_report(result, args.out)
    failures = result.prescriptive_failures
    for cid, rules in failures[:10]:
        _log(f"prescriptive failure: {cid}: {', '.join(rules)}")
    if len(failures) > 10:
        _log(f"... {len(failures) - 10} more prescriptive failure(s) in {args.out}")
    _log(f"overall: {result.overall}")
    return OVERALL_EXIT[result.overall]


def cmd_check(args) -> int:
    try:
        rs = read_ruleset(args.ruleset)
    except RuleSyntaxError as exc:
        _log(f"{args.ruleset}:{exc}")
        return EXIT_DATA
    _log(f"{args.ruleset}: {len(rs)} rule(s) OK")
    return EXIT_PASS


COMMANDS = {"sample": cmd_sample, "run": cmd_run, "check": cmd_check}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        _log(f"usage error: {exc}")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_PASS if not exc.code else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        _log(f"usage error: {exc}")
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        _log(f"error: {exc}")
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
