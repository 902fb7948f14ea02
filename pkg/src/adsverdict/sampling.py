"""Deterministic concrete-scenario sampling and test budget allocation.

Unit deviates come from a counter-based hash of (seed, index, parameter
name), so sample ``i`` of a logical scenario never depends on how many
other samples were drawn, in what order, or on which worker.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Sequence

from .catalogue import (
    Catalogue,
    ConcreteScenario,
    Discrete,
    LogicalScenario,
    TruncNormal,
    Uniform,
)

MASK64 = (1 << 64) - 1


class BudgetError(ValueError):
    """Budget cannot satisfy the per-functional floor."""


# -- counter-based deviates --------------------------------------------------

def mix64(x: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit mixer."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


def unit_deviate(seed: int, index: int, name: str) -> float:
    """Uniform deviate in [0, 1) keyed by (seed, index, name)."""
    h = mix64(mix64(mix64(seed & MASK64) ^ fnv1a64(name)) ^ (index & MASK64))
    return (h >> 11) * 2.0 ** -53


def derive_seed(seed: int, key) -> int:
    k = fnv1a64(key) if isinstance(key, str) else key & MASK64
    return mix64(mix64(seed & MASK64) ^ k)


# -- inverse CDFs ------------------------------------------------------------

_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def norm_ppf(p: float) -> float:
    """Standard normal quantile.

    Rational approximation (relative error ~1e-9) polished with one Halley
    step against ``erfc``, which brings it to near machine precision.
    """
    if not 0.0 < p < 1.0:
        if p == 0.0:
            return -math.inf
        if p == 1.0:
            return math.inf
        raise ValueError(f"probability out of range: {p}")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((( _C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
            (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -((((( _C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    # Halley refinement; above the median the residual uses the survival
    # function, since 1 - p is exact there but cdf(x) - p would cancel
    e = norm_cdf(x) - p if p <= 0.5 else (1.0 - p) - norm_cdf(-x)
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def inverse_cdf(dist, u: float) -> float:
    """Map a unit deviate ``u`` in [0, 1) through the quantile of ``dist``."""
    if isinstance(dist, Uniform):
        x = dist.lo + u * (dist.hi - dist.lo)
        return min(max(x, dist.lo), dist.hi)
    if isinstance(dist, TruncNormal):
        a = (dist.lo - dist.mean) / dist.sd
        b = (dist.hi - dist.mean) / dist.sd
        if a >= 0:
            # both bounds in the upper tail: work with survival probabilities
            sa, sb = norm_cdf(-a), norm_cdf(-b)
            z = -norm_ppf(sa - u * (sa - sb))
        else:
            pa, pb = norm_cdf(a), norm_cdf(b)
            z = norm_ppf(pa + u * (pb - pa))
        x = dist.mean + dist.sd * z
        return min(max(x, dist.lo), dist.hi)
    if isinstance(dist, Discrete):
        acc = 0.0
        for value, prob in dist.values:
            acc += prob
            if u < acc:
                return value
        return dist.values[-1][0]
    raise TypeError(f"unknown distribution {dist!r}")


# -- concrete scenarios -----------------------------------------------------

def concrete_id(logical_id: str, index: int) -> str:
    return f"{logical_id}-{index:06d}"


def sample_concrete(ls: LogicalScenario, seed: int, count: int) -> List[ConcreteScenario]:
    """Draw ``count`` concrete scenarios from ``ls`` according to p(x)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    out = []
    for i in range(count):
        assignments = {
            p.name: inverse_cdf(p.distribution, unit_deviate(seed, i, p.name))
            for p in ls.parameters
        }
        out.append(ConcreteScenario(concrete_id(ls.id, i), ls.id, derive_seed(seed, i), assignments))
    return out


# -- budget ------------------------------------------------------------------

@dataclass(frozen=True)
class BudgetPlan:
    total: int
    floor_per_functional: int
    allocations: Mapping[str, int]

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "total": self.total,
            "floor_per_functional": self.floor_per_functional,
            "allocations": {k: self.allocations[k] for k in sorted(self.allocations)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BudgetPlan":
        allocations = {str(k): int(v) for k, v in d["allocations"].items()}
        plan = cls(int(d["total"]), int(d["floor_per_functional"]), allocations)
        if sum(allocations.values()) != plan.total:
            raise BudgetError("budget allocations do not sum to total")
        return plan


def apportion(weights: Mapping[str, float], total: int, floor: int = 0) -> Dict[str, int]:
    """Split ``total`` in proportion to ``weights`` with a per-key minimum.

    Keys whose proportional share would fall below ``floor`` are pinned to
    it and the rest is re-split among the others. Integer rounding uses
    largest fractional part, ties going to the lexicographically smaller
    key. Arithmetic is exact.
    """
    keys = sorted(weights)
    if not keys:
        if total:
            raise BudgetError("cannot allocate a nonzero budget to no scenarios")
        return {}
    if total < floor * len(keys):
        raise BudgetError(
            f"total {total} is below floor {floor} x {len(keys)} scenarios"
        )
    w = {k: Fraction(weights[k]) for k in keys}
    if any(v <= 0 for v in w.values()):
        raise BudgetError("weights must be positive")
    pinned = set()
    while True:
        free = [k for k in keys if k not in pinned]
        rem = total - floor * len(pinned)
        wsum = sum(w[k] for k in free)
        quota = {k: rem * w[k] / wsum for k in free}
        low = {k for k in free if quota[k] < floor}
        if not low:
            break
        pinned |= low
    alloc = {k: floor for k in pinned}
    for k in free:
        alloc[k] = math.floor(quota[k])
    left = total - sum(alloc.values())
    order = sorted(free, key=lambda k: (-(quota[k] - math.floor(quota[k])), k))
    for k in order[:left]:
        alloc[k] += 1
    return {k: alloc[k] for k in keys}


def allocate_budget(c: Catalogue, total: int, floor: int = 0) -> BudgetPlan:
    """Allocate ``total`` runs across functional scenarios by demand prior."""
    if total < 1:
        raise BudgetError("total must be positive")
    if floor < 0:
        raise BudgetError("floor must be nonnegative")
    priors = {fs.id: fs.demand_prior for fs in c.functional}
    return BudgetPlan(total, floor, apportion(priors, total, floor))


def logical_counts(c: Catalogue, plan: BudgetPlan) -> Dict[str, int]:
    """Split each functional allocation evenly over its logical scenarios."""
    out = {}
    for fid in sorted(plan.allocations):
        members = c.logical_for(fid)
        n = plan.allocations[fid]
        if not members:
            if n:
                raise BudgetError(f"functional {fid!r} has budget but no logical scenarios")
            continue
        out.update(apportion({ls.id: 1.0 for ls in members}, n))
    return out


def _sample_job(args):
    ls, seed, count = args
    return sample_concrete(ls, seed, count)


def sample_campaign(c: Catalogue, plan: BudgetPlan, seed: int, jobs: int = 1) -> List[ConcreteScenario]:
    """Concrete scenarios for a whole budget, ordered by id.

    Each logical scenario gets its own stream keyed by its id, so results
    do not depend on ``jobs``.
    """
    counts = logical_counts(c, plan)
    work = [(c.logical_by_id(lid), derive_seed(seed, lid), n)
            for lid, n in sorted(counts.items()) if n > 0]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_sample_job, work))
    else:
        parts = [_sample_job(w) for w in work]
    return sorted((cs for part in parts for cs in part), key=lambda cs: cs.id)


def write_budget(plan: BudgetPlan, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(plan.to_dict(), indent=2) + "\n")


def read_budget(path) -> BudgetPlan:
    with open(path, encoding="utf-8") as fh:
        return BudgetPlan.from_dict(json.load(fh))
