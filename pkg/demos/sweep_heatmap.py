"""
Phase diagram of influence and conviction
=========================================

Sweep a coarse (alpha, beta) grid and write the long-term metrics as a
CSV heatmap table. Pass an output path to keep the file; any plotting
tool can pivot it on the first two columns.

    python demos/sweep_heatmap.py heatmap.csv
"""

import math
import sys

import numpy as np

from crowdwise import io
from crowdwise.model import ModelParams, PopulationSpec
from crowdwise.sweep import SweepGrid, as_table, run_sweep

axis = tuple(k / 5 for k in range(11))  # 0, 0.2, ..., 2
grid = SweepGrid(
    population=PopulationSpec(100, -3.0, 0.72, seed=7, match_moments=True),
    truth=math.exp(-3.14),
    alpha_values=axis,
    beta_values=axis,
    replicates=4,
    master_seed=0,
    base_params=ModelParams(0.0, 0.0, noise_d=1e-3, dt=0.01, steps_total=3000),
)
results = run_sweep(grid)

err = as_table(results, grid, "final_error_mean")
np.set_printoptions(precision=3, suppress=True, linewidth=120)
print("final collective error, rows alpha, columns beta")
print(err)
print("failed cells:", [(r.alpha, r.beta) for r in results if r.failed])

if len(sys.argv) > 1:
    io.write_atomic(sys.argv[1], lambda sink: io.emit_heatmap_csv(results, sink))
    print("wrote", sys.argv[1])
