"""
How many clean runs prove a scenario safe?
==========================================

A scenario met about once per hour, with a tolerable fatal-crash rate of
1e-7 per hour, may produce a crash in at most one run in ten million.
"""

import math

from adsverdict.risk import (binomial_tail_geq, binomial_tail_leq, decide_level,
                             poisson_pmf, rate_upper_bound)
from adsverdict.severity import SeverityLevel

l_acc = 1e-7
n = 10_000_000

# zero crashes in ten million runs
print("P(X <= 0) =", round(binomial_tail_leq(n, 0, l_acc), 4))

# not below 0.05, so not yet proven safe; thirty million clean runs are
print("P(X <= 0) at n=3e7 =", round(binomial_tail_leq(3 * n, 0, l_acc), 4))

# two crashes: the one-sided tail, and the point mass that is often quoted
print("P(X >= 2) =", round(binomial_tail_geq(n, 2, l_acc), 4))
print("P(X == 2) =", round(poisson_pmf(2, 1.0), 4))

for k in range(6):
    d = decide_level(n, k, l_acc, 0.05, SeverityLevel.S3)
    print(f"k={k}  p_Ha={d.p_value_Ha:.4f}  p_Hb={d.p_value_Hb:.4f}  {d.status.value}")

# an upper confidence bound tells the same story from the other side
ub = rate_upper_bound(n, 0, 0.95)
print(f"95% upper bound with zero events: {ub:.3e}  (about 3/n = {3 / n:.3e})")
print("e^-3 =", round(math.exp(-3), 4))
