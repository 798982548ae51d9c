"""Cavity q = 2, k = 1: Poisson truncation, schedule and sandwich test."""
from rdelab.cavity import solved_model
from rdelab.endogeny import bivariate_test, sandwich_test
from rdelab.rde import build_schedule

m, mu = solved_model(2, 1)
print("truncation:", m.truncation_certificate())
S = build_schedule(m, mu, 1.6, 0.1, 3, check_preconditions=False, min_block_size=60)
print("schedule partial sums", S.partial_sums, "epsilons", S.epsilons)
rep = sandwich_test(m, S, mu, n_trees=200)
for rec in rep.per_depth:
    print(rec)
print("pass:", rep.passed)
print("bivariate E|X - X'|:", bivariate_test(m, mu))
