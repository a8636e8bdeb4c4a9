"""
Isolated agents
===============

With no social influence every agent is pulled back to its own first
guess while noise jitters it around. Nothing about the crowd should
change: error, diversity and the wisdom indicator all stay put.
"""

import math

import numpy as np

from crowdwise import oracles
from crowdwise.model import ModelParams, PopulationSpec, simulate

# 100 agents, log-opinions drawn from N(-3, 0.72), truth at exp(-2.9)
spec = PopulationSpec(n_agents=100, log_mean=-3.0, log_variance=0.72, seed=7, match_moments=True)
params = ModelParams(alpha=0.0, beta=1.0, noise_d=1e-3, dt=0.01, steps_total=3000)
truth = math.exp(-2.9)

rec = simulate(spec, params, truth, record_every=500)

print(" time   error    diversity  wisdom")
for t, e, d, w in zip(rec.time, rec.collective_error, rec.group_diversity, rec.wisdom_indicator):
    print(f"{t:5.0f}  {e:.5f}  {d:.5f}    {w}")

# each opinion is an OU process around its start; its spread is tiny
x, x0 = rec.final_state.opinions, rec.final_state.initial_opinions
print()
print("rms displacement     ", np.sqrt(np.mean((x - x0) ** 2)))
print("OU stationary sd     ", math.sqrt(oracles.ou_variance(params.noise_d, params.beta)))
