"""
Everyone watches the average
============================

Pure social influence (no conviction, no noise) pulls every opinion to
the arithmetic mean of the starting crowd. For a right-skewed log-normal
crowd that mean sits above the geometric mean, so the log-scale centre
of the crowd moves right while it collapses. Whether that helps depends
on where the truth is.
"""

import math

from crowdwise import oracles
from crowdwise.model import ModelParams, PopulationSpec, sample_initial_population, simulate

spec = PopulationSpec(n_agents=100, log_mean=-3.0, log_variance=0.72, seed=7, match_moments=True)
params = ModelParams(alpha=1.0, beta=0.0, noise_d=0.0, dt=0.01, steps_total=1500)

start = sample_initial_population(spec)
am, gm = start.opinions.mean(), math.exp(-3.0)
print(f"arithmetic mean {am:.5f}   geometric mean {gm:.5f}")
print(f"consensus lands at ln {math.log(am):.3f} instead of -3")
print()

for label, log_truth in [("truth above the crowd", -2.9), ("truth below the crowd", -3.14)]:
    rec = simulate(spec, params, math.exp(log_truth), record_every=300)
    print(label, f"(ln truth = {log_truth})")
    for t, e, g in zip(rec.time, rec.collective_error, rec.geometric_mean):
        print(f"  t={t:5.1f}  error={e:.5f}  GM={g:.5f}")
    print()

# the closed form agrees with the integrator to first order in dt
exact = oracles.deterministic_solution(start, params, 15.0)
print("closed-form spread at t=15:", exact.max() - exact.min())
