"""
Checking the integrator against closed forms
============================================

Without noise the model is linear with a conserved mean, so the exact
trajectory is known. The Euler update should approach it at first
order: halve the step, halve the error.
"""

import numpy as np

from crowdwise import oracles
from crowdwise.model import ModelParams, PopulationSpec, sample_initial_population, step

start = sample_initial_population(PopulationSpec(100, -3.0, 0.72, seed=7))

for dt in (0.02, 0.01, 0.005):
    params = ModelParams(1.0, 0.5, noise_d=0.0, dt=dt)
    state = start
    for _ in range(int(round(1.0 / dt))):
        state = step(state, params)
    err = np.max(np.abs(state.opinions - oracles.deterministic_solution(start, params, 1.0)))
    print(f"dt={dt:<6} max error at t=1: {err:.3e}")

pred = oracles.stationary_prediction(start, 1.0, 1.0)
print()
print("stationary raw variance ratio", pred.raw_variance_ratio)
print("decay rate                   ", pred.decay_rate)
print("mean preserved               ", pred.stationary_opinions.mean(), start.opinions.mean())
