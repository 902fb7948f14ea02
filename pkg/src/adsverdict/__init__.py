"""Pass/fail evaluation for scenario-based testing of automated driving systems.

Pipeline: load a scenario catalogue, sample concrete scenarios and allocate
a test budget, simulate or ingest traces, score each run with prescriptive
and risk rules, then decide per functional scenario with exact binomial
tests against tolerability-of-risk rates.
"""

from .catalogue import (
    Catalogue,
    CatalogueError,
    ConcreteScenario,
    Exposure,
    FunctionalScenario,
    LogicalScenario,
    load_catalogue,
    validate_catalogue,
)
from .risk import (
    LevelDecision,
    RiskPolicy,
    Status,
    acceptable_rate,
    binomial_tail_geq,
    binomial_tail_leq,
    cumulative_counts,
    decide_functional,
    load_policy,
    rate_upper_bound,
)
from .rules import RuleSet, evaluate_rules, parse_ruleset, severity_from_delta_v
from .sampling import BudgetPlan, allocate_budget, sample_campaign, sample_concrete
from .severity import RunOutcome, SeverityLevel
from .simkit import SimConfig, simulate, simulate_all
from .trace import Trace, derive_channels, parse_trace, ttc
from .verdict import CampaignResult, evaluate_campaign, write_report

__version__ = "0.1.0"
