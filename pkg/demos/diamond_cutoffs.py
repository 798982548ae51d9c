"""Diamond cascade at sigma = 0.5: critical drift, a certified block, a schedule, endogeny."""
import math

from rdelab.endogeny import bivariate_test, sandwich_test
from rdelab.hiergraph import critical_model, diamond, find_critical_drift
from rdelab.measure import INF
from rdelab.rde import BlockSearchParams, build_block, build_schedule, delta_fn

print("sigma = 0 critical drift: %.5f (-log 2 = %.5f)"
      % (find_critical_drift(diamond(), 0.0), -math.log(2)))

m, mu = critical_model(diamond(), 0.5)
print("sigma = 0.5 critical drift: %.6f" % m.params.drift)
for a in (0.0, 0.5, 1.0, 1.5, 2.0):
    print("  Delta_%.1f(0) = %.3e" % (a, delta_fn(m, mu, a)))

block, eps_p = build_block(m, mu, BlockSearchParams(0.2, 0.05, 0.05))
print("block: %d entries, eps' = %g" % (block.size, eps_p))

S = build_schedule(m, mu, 0.8, 0.1, 3, check_preconditions=False, min_block_size=40)
print("schedule partial sums", S.partial_sums)
rep = sandwich_test(m, S, mu, n_trees=200)
print("sandwich:", {k: v["pass"] for k, v in rep.checks.items()})
neg = sandwich_test(m, [INF] * len(S.entries), mu, depth_ladder=S.partial_sums, n_trees=200)
print("all-+inf control passes:", neg.passed)
print("bivariate E|X - X'|:", bivariate_test(m, mu))
