"""Tolerability of risk: acceptable rates, severity counts and exact tests.

For a functional scenario with exposure ``e`` (occurrences per hour) and a
tolerability ``lambda_i`` (events of severity >= S_i per hour of use), the
acceptable proportion of concrete runs reaching S_i is ``lambda_i / e``.
Observed counts are tested against it with exact one-sided binomial tails:

* ``P(X <= k)`` small: the "rate is at least acceptable" hypothesis is
  rejected, so the scenario is proven safe at that level.
* ``P(X >= k)`` small: the "rate is at most acceptable" hypothesis is
  rejected, so the scenario is proven unsafe.

With ``l = 1e-7`` and ``n = 1e7`` runs, zero events gives
``P(X <= 0) = 0.368`` and two events give ``P(X >= 2) = 0.264``. The value
``0.18`` sometimes quoted for the two-event case is the point probability
``P(X = 2) = e**-1 / 2``, not a tail; :func:`poisson_pmf` is provided to
report it alongside.
"""

from __future__ import annotations

import enum
import json
import math
from collections import Counter
from dataclasses import dataclass
from operator import attrgetter
from typing import Dict, Iterable, List, Mapping, Optional

import numpy as np
from scipy import special

from .catalogue import Exposure, FunctionalScenario
from .severity import RATED_LEVELS, RunOutcome, SeverityLevel

#: Real-world UK fatal crash rate per hour driven, a documented default for S3.
DEFAULT_LAMBDA_S3 = 1.7e-7


class Status(str, enum.Enum):
    PROVEN_SAFE = "PROVEN_SAFE"
    PROVEN_UNSAFE = "PROVEN_UNSAFE"
    INCONCLUSIVE = "INCONCLUSIVE"
    NOT_APPLICABLE = "NOT_APPLICABLE"


@dataclass(frozen=True)
class RiskPolicy:
    lambda_per_level: Mapping[SeverityLevel, float]
    significance: float = 0.05
    decision_policy: str = "permissive"  # "permissive" | "strict"

    def __post_init__(self):
        if not 0 < self.significance < 1:
            raise ValueError("significance must be in (0, 1)")
        if self.decision_policy not in ("permissive", "strict"):
            raise ValueError(f"unknown decision_policy {self.decision_policy!r}")
        lams = {SeverityLevel(k): float(v) for k, v in self.lambda_per_level.items()}
        for level, lam in lams.items():
            if level not in RATED_LEVELS:
                raise ValueError(f"no tolerability can be set for {level.name}")
            if not lam > 0 or not math.isfinite(lam):
                raise ValueError(f"lambda for {level.name} must be positive")
        present = [lams[lv] for lv in RATED_LEVELS if lv in lams]
        if any(b > a for a, b in zip(present, present[1:])):
            raise ValueError("lambda must be non-increasing as severity rises")
        object.__setattr__(self, "lambda_per_level", lams)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "significance": self.significance,
            "decision_policy": self.decision_policy,
            "lambda_per_hour": {lv.name: self.lambda_per_level[lv]
                                for lv in RATED_LEVELS if lv in self.lambda_per_level},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RiskPolicy":
        allowed = {"version", "significance", "decision_policy", "lambda_per_hour"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"policy: unknown field(s) {sorted(unknown)}")
        if d.get("version") != 1:
            raise ValueError("policy: version must be 1")
        lams = {SeverityLevel.parse(k): v for k, v in d.get("lambda_per_hour", {}).items()}
        return cls(lams, float(d.get("significance", 0.05)), d.get("decision_policy", "permissive"))


def load_policy(path) -> RiskPolicy:
    with open(path, encoding="utf-8") as fh:
        return RiskPolicy.from_dict(json.load(fh))


@dataclass(frozen=True)
class LevelDecision:
    level: SeverityLevel
    n_tests: int
    k_events: int
    l_acceptable: float
    p_value_Ha: float
    p_value_Hb: float
    status: Status


# -- acceptable rate -----------------------------------------------------------

def acceptable_rate(lambda_i: float, exposure: Exposure) -> float:
    """Acceptable proportion of concrete runs reaching a severity level.

    A time-proportion exposure ``q`` with mean scenario duration ``d`` hours
    is first converted to an occurrence rate ``q / d`` per hour.
    """
    if not lambda_i > 0:
        raise ValueError("lambda must be positive")
    if exposure.kind == "rate_per_hour":
        if not exposure.value > 0:
            raise ValueError("exposure must be positive")
        return lambda_i / exposure.value
    if exposure.kind == "time_proportion":
        q, d = exposure.value, exposure.mean_duration_hours
        if not 0 < q <= 1 or d is None or not d > 0:
            raise ValueError("invalid time_proportion exposure")
        return lambda_i * d / q
    raise ValueError(f"unknown exposure kind {exposure.kind!r}")


# -- counting ----------------------------------------------------------------

def cumulative_counts(outcomes: Iterable[RunOutcome]) -> Dict[SeverityLevel, int]:
    """Number of scored runs with severity >= each level S0..S3."""
    tally = Counter(map(attrgetter("severity"), outcomes))
    if None in tally:
        raise ValueError("prescriptive failures must be filtered out before counting")
    counts = {}
    running = 0
    for lv in reversed(RATED_LEVELS):
        running += tally.get(lv, 0)
        counts[lv] = running
    return {lv: counts[lv] for lv in RATED_LEVELS}


# -- exact binomial tails ------------------------------------------------------
#
# Terms are evaluated with Loader's saddle-point form of the binomial pmf,
# which stays accurate to ~1e-15 relative at n in the 1e8 range where a
# plain lgamma difference would lose ~7 digits. Tails are summed outward
# from the boundary that is furthest from the mode, so every summed tail
# is the smaller one and the other follows by complement.

_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_STIRLERR_SMALL = np.array(
    [0.0] + [math.lgamma(n + 1.0) - (n + 0.5) * math.log(n) + n - _LN_SQRT_2PI for n in range(1, 16)]
)
_CHUNK = 4096


def _stirlerr(n: np.ndarray) -> np.ndarray:
    """log(n!) - log(sqrt(2 pi n) (n/e)^n) for integer n >= 1."""
    n = np.asarray(n, dtype=float)
    out = np.empty_like(n)
    small = n <= 15
    out[small] = _STIRLERR_SMALL[n[small].astype(int)]
    m = n[~small]
    nn = m * m
    s0, s1, s2, s3, s4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188
    big = np.where(
        m > 500, (s0 - s1 / nn) / m,
        np.where(m > 80, (s0 - (s1 - s2 / nn) / nn) / m,
                 np.where(m > 35, (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / m,
                          (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / m)))
    out[~small] = big
    return out


def _bd0(x: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """x log(x/mu) + mu - x, without cancellation when x is close to mu."""
    x = np.asarray(x, dtype=float)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), x.shape)
    out = np.empty_like(x)
    near = np.abs(x - mu) < 0.1 * (x + mu)
    xs, ms = x[near], mu[near]
    v = (xs - ms) / (xs + ms)
    s = (xs - ms) * v
    ej = 2.0 * xs * v
    v2 = v * v
    for j in range(1, 40):
        ej = ej * v2
        s_new = s + ej / (2 * j + 1)
        if np.array_equal(s_new, s):
            break
        s = s_new
    out[near] = s
    xf, mf = x[~near], mu[~near]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[~near] = np.where(xf == 0, mf, xf * np.log(xf / mf) + mf - xf)
    return out


def binomial_pmf(n: int, k, p: float) -> np.ndarray:
    """P(X = k) for X ~ Binomial(n, p), vectorised over ``k``."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    q = 1.0 - p
    out = np.zeros_like(k)
    if p == 0.0:
        out[k == 0] = 1.0
        return out
    if q == 0.0:
        out[k == n] = 1.0
        return out
    inner = (k > 0) & (k < n)
    if np.any(k == 0):
        lc = -_bd0(np.array([float(n)]), n * q)[0] - n * p if p < 0.1 else n * math.log1p(-p)
        out[k == 0] = math.exp(lc)
    if np.any(k == n):
        lc = -_bd0(np.array([float(n)]), n * p)[0] - n * q if q < 0.1 else n * math.log(p)
        out[k == n] = math.exp(lc)
    if np.any(inner):
        x = k[inner]
        lc = (_stirlerr(np.array([float(n)]))[0] - _stirlerr(x) - _stirlerr(n - x)
              - _bd0(x, n * p) - _bd0(n - x, n * q))
        lf = math.log(2.0 * math.pi) + np.log(x) + np.log1p(-x / n)
        out[inner] = np.exp(lc - 0.5 * lf)
    return out


def _mode(n: int, p: float) -> int:
    return min(n, int(math.floor((n + 1) * p)))


def _sum_down(n: int, k: int, p: float) -> float:
    """P(X <= k), summing j = k, k-1, ... while terms still matter (k below the mode)."""
    total = 0.0
    hi = k
    while hi >= 0:
        lo = max(0, hi - _CHUNK + 1)
        terms = binomial_pmf(n, np.arange(hi, lo - 1, -1), p)
        total += math.fsum(terms)
        if terms[-1] <= total * 1e-18 or terms[-1] == 0.0:
            break
        hi = lo - 1
    return total


def _sum_up(n: int, k: int, p: float) -> float:
    """P(X >= k), summing j = k, k+1, ... (k above the mode)."""
    total = 0.0
    lo = k
    while lo <= n:
        hi = min(n, lo + _CHUNK - 1)
        terms = binomial_pmf(n, np.arange(lo, hi + 1), p)
        total += math.fsum(terms)
        if terms[-1] <= total * 1e-18 or terms[-1] == 0.0:
            break
        lo = hi + 1
    return total


def _check_args(n: int, k: int, p: float):
    if n < 0 or not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be a probability, got {p}")


def binomial_tail_geq(n: int, k: int, p: float) -> float:
    """Exact P(X >= k) for X ~ Binomial(n, p)."""
    _check_args(n, k, p)
    if k == 0:
        return 1.0
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    if k > _mode(n, p):
        return min(1.0, _sum_up(n, k, p))
    return max(0.0, 1.0 - _sum_down(n, k - 1, p))


def binomial_tail_leq(n: int, k: int, p: float) -> float:
    """Exact P(X <= k) for X ~ Binomial(n, p)."""
    _check_args(n, k, p)
    if k == n:
        return 1.0
    return max(0.0, 1.0 - binomial_tail_geq(n, k + 1, p)) if k + 1 > _mode(n, p) \
        else min(1.0, _sum_down(n, k, p))


def rate_upper_bound(n: int, k: int, confidence: float = 0.95) -> float:
    """One-sided Clopper-Pearson upper confidence bound on the event rate.

    Smallest ``p`` with ``P(X <= k | n, p) <= 1 - confidence``, found by
    bisection to an absolute width of 1e-12.
    """
    _check_args(n, k, 0.5)
    if not 0 < confidence < 1:
        raise ValueError("confidence must be in (0, 1)")
    if k == n:
        return 1.0
    alpha = 1.0 - confidence
    lo, hi = k / n if n else 0.0, 1.0
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if binomial_tail_leq(n, k, mid) <= alpha:
            hi = mid
        else:
            lo = mid
    return hi


# -- Poisson reference -------------------------------------------------------

def poisson_pmf(k: int, mu: float) -> float:
    return math.exp(k * math.log(mu) - mu - math.lgamma(k + 1)) if mu > 0 else float(k == 0)


def poisson_tail_geq(k: int, mu: float) -> float:
    """P(Y >= k) for Y ~ Poisson(mu), via the regularized incomplete gamma."""
    if k <= 0:
        return 1.0
    return float(special.gammainc(k, mu))


# -- decisions -----------------------------------------------------------------

def decide_level(n: int, k: int, l_acc: float, alpha: float, level: SeverityLevel) -> LevelDecision:
    if l_acc >= 1.0:
        return LevelDecision(level, n, k, l_acc, 1.0, 1.0, Status.NOT_APPLICABLE)
    p_hb = binomial_tail_geq(n, k, l_acc)
    p_ha = binomial_tail_leq(n, k, l_acc)
    if p_hb < alpha:
        status = Status.PROVEN_UNSAFE
    elif p_ha < alpha:
        status = Status.PROVEN_SAFE
    else:
        status = Status.INCONCLUSIVE
    return LevelDecision(level, n, k, l_acc, p_ha, p_hb, status)


def decide_functional(counts: Mapping[SeverityLevel, int], n_tests: int,
                      fs: FunctionalScenario, policy: RiskPolicy) -> List[LevelDecision]:
    """Per-level statuses for one functional scenario, S0 first.

    Levels without a tolerability are reported as NOT_APPLICABLE with an
    infinite acceptable rate.
    """
    if n_tests < 0:
        raise ValueError("n_tests must be nonnegative")
    out = []
    for level in RATED_LEVELS:
        k = int(counts.get(level, 0))
        if not 0 <= k <= n_tests:
            raise ValueError(f"count {k} for {level.name} outside [0, {n_tests}]")
        lam = policy.lambda_per_level.get(level)
        if lam is None:
            out.append(LevelDecision(level, n_tests, k, math.inf, 1.0, 1.0, Status.NOT_APPLICABLE))
            continue
        l_acc = acceptable_rate(lam, fs.exposure)
        out.append(decide_level(n_tests, k, l_acc, policy.significance, level))
    return out
