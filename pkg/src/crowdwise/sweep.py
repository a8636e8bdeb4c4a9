"""(alpha, beta) parameter sweeps with replicate ensembles.

Cells are independent. Within a cell, replicate ``r`` of cell
``(i, j)`` draws its noise from substreams keyed by
``(master_seed, i, j, r)``, so a cell's result does not depend on which
other cells are computed, on batching, or on thread scheduling.
Replicates share the population sampled from ``population.seed`` unless
``resample_population`` is set, in which case each replicate gets its own
population keyed by the same path.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics
from .errors import ParameterError, SweepError
from .model import (
    ModelParams,
    PopulationSpec,
    advance_batch,
    sample_initial_population,
)
from .rng import stream_keys

DEFAULT_AXIS = tuple(k / 25 for k in range(51))
DEFAULT_REPLICATES = 10


def validate_axis(values, name):
    arr = tuple(float(v) for v in values)
    if not arr:
        raise ParameterError(f"{name} must not be empty")
    if any(not (math.isfinite(v) and v >= 0) for v in arr):
        raise ParameterError(f"{name} must be finite and non-negative")
    if any(b <= a for a, b in zip(arr, arr[1:])):
        raise ParameterError(f"{name} must be strictly ascending")
    return arr


@dataclass(frozen=True, kw_only=True)
class SweepGrid:
    population: PopulationSpec
    truth: float
    alpha_values: tuple = DEFAULT_AXIS
    beta_values: tuple = DEFAULT_AXIS
    replicates: int = DEFAULT_REPLICATES
    master_seed: int = 0
    base_params: ModelParams = field(default_factory=lambda: ModelParams(0.0, 0.0))
    resample_population: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alpha_values", validate_axis(self.alpha_values, "alpha_values"))
        object.__setattr__(self, "beta_values", validate_axis(self.beta_values, "beta_values"))
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ParameterError(f"replicates must be an integer >= 1, got {self.replicates!r}")
        if int(self.master_seed) != self.master_seed or not 0 <= self.master_seed < 2**64:
            raise ParameterError(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed!r}")
        if not self.truth > 0:
            raise ParameterError(f"truth must be > 0, got {self.truth!r}")
        object.__setattr__(self, "replicates", int(self.replicates))
        object.__setattr__(self, "master_seed", int(self.master_seed))
        # the largest corner is the binding stability constraint
        self.base_params.with_rates(self.alpha_values[-1], self.beta_values[-1])

    @property
    def shape(self):
        return len(self.alpha_values), len(self.beta_values)

    def cells(self):
        """Cell index pairs in row-major, beta-fastest order."""
        return [(i, j) for i in range(len(self.alpha_values)) for j in range(len(self.beta_values))]

    def index_of(self, alpha, beta):
        try:
            return self.alpha_values.index(float(alpha)), self.beta_values.index(float(beta))
        except ValueError:
            raise ParameterError(f"cell (alpha={alpha!r}, beta={beta!r}) is not on the grid") from None


@dataclass(frozen=True)
class SweepCellResult:
    alpha: float
    beta: float
    final_error_mean: float
    final_diversity_mean: float
    final_wisdom_mean: float
    final_error_sd: float
    replicates_used: int
    failure: str = None

    @property
    def failed(self):
        return self.failure is not None


def _replicate_population(grid, i, j, r):
    if not grid.resample_population:
        return None
    seed = np.random.SeedSequence(grid.master_seed, spawn_key=(i, j, r, 1)).generate_state(1, np.uint64)[0]
    return sample_initial_population(replace(grid.population, seed=int(seed)))


def _mean(values):
    # shifted so that identical replicates average to exactly that value
    return float(values[0] + (values - values[0]).mean())


def run_cells(grid, cells):
    """Run the given ``(alpha_index, beta_index)`` cells as one batch.

    Results come back in the order of ``cells``.
    """
    cells = list(cells)
    if not cells:
        return []
    reps = grid.replicates
    n = grid.population.n_agents
    shared = None if grid.resample_population else sample_initial_population(grid.population)

    rows = len(cells) * reps
    x0 = np.empty((rows, n))
    keys = np.empty((rows, n), dtype=np.uint64)
    alpha = np.empty(rows)
    beta = np.empty(rows)
    for c, (i, j) in enumerate(cells):
        a, b = grid.alpha_values[i], grid.beta_values[j]
        for r in range(reps):
            row = c * reps + r
            state = shared if shared is not None else _replicate_population(grid, i, j, r)
            x0[row] = state.initial_opinions
            keys[row] = stream_keys(grid.master_seed, n, (i, j, r, 0))
            alpha[row] = a
            beta[row] = b

    params = grid.base_params
    x = x0.copy()
    failed = advance_batch(x, x0, keys, alpha, beta, params.noise_d, params.dt, 0, params.steps_total)

    ok = failed < 0
    safe = np.where(ok[:, None], x, 1.0)
    err = metrics.collective_error(safe, grid.truth)
    div = metrics.group_diversity(safe)
    wis = metrics.wisdom_indicator(safe, grid.truth)

    results = []
    for c, (i, j) in enumerate(cells):
        a, b = grid.alpha_values[i], grid.beta_values[j]
        sl = slice(c * reps, (c + 1) * reps)
        bad = np.flatnonzero(~ok[sl])
        if bad.size:
            r = int(bad[0])
            note = (f"replicate {r}: opinion non-positive at step {int(failed[sl][r])}"
                    + (f" ({bad.size} of {reps} replicates failed)" if bad.size > 1 else ""))
            results.append(SweepCellResult(a, b, math.nan, math.nan, math.nan, math.nan, 0, note))
            continue
        e = err[sl]
        results.append(SweepCellResult(
            alpha=a,
            beta=b,
            final_error_mean=_mean(e),
            final_diversity_mean=_mean(div[sl]),
            final_wisdom_mean=_mean(wis[sl].astype(float)),
            final_error_sd=float(e.std(ddof=1)) if reps > 1 else 0.0,
            replicates_used=reps,
        ))
    return results


def run_cell(grid, alpha, beta):
    """Replicate ensemble for a single grid cell."""
    return run_cells(grid, [grid.index_of(alpha, beta)])[0]


def run_sweep(grid, workers=1):
    """All cells of ``grid`` in row-major (beta-fastest) order.

    Parameters
    ----------
    grid : SweepGrid
    workers : int
        Maximum number of threads; each works on one alpha row at a time.
        The integration kernel releases the GIL.

    Raises
    ------
    SweepError
        If every cell failed.
    """
    workers = int(workers or 1)
    if workers < 1:
        raise ParameterError(f"workers must be >= 1, got {workers!r}")
    n_beta = len(grid.beta_values)
    chunks = [[(i, j) for j in range(n_beta)] for i in range(len(grid.alpha_values))]
    if workers == 1:
        parts = [run_cells(grid, chunk) for chunk in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda chunk: run_cells(grid, chunk), chunks))
    results = [res for part in parts for res in part]
    if all(res.failed for res in results):
        raise SweepError(f"all {len(results)} cells failed; first: {results[0].failure}")
    return results


def as_table(results, grid, attr):
    """Reshape one field of sweep results to ``(len(alpha), len(beta))``."""
    return np.array([getattr(r, attr) for r in results], dtype=float).reshape(grid.shape)


def detect_steady_state(trajectory, window, tol):
    """First recorded row after which all metrics have settled.

    Row ``k`` qualifies when, for every full window of ``window + 1``
    consecutive rows starting at or after ``k``, each metric's range
    (max - min) within the window is below ``tol``. Windows are clipped to
    the record length.

    Returns
    -------
    int or None
        Row index into ``trajectory``, or None if the run never settles.
    """
    if int(window) != window or window < 1:
        raise ParameterError(f"window must be a positive integer, got {window!r}")
    if not tol > 0:
        raise ParameterError(f"tol must be > 0, got {tol!r}")
    m = trajectory.metric_matrix()
    n = m.shape[0]
    if n == 0:
        raise ParameterError("empty trajectory")
    if n == 1:
        return 0
    w = min(int(window), n - 1)
    view = np.lib.stride_tricks.sliding_window_view(m, w + 1, axis=0)
    spread = (view.max(axis=-1) - view.min(axis=-1)).max(axis=-1)
    settled = spread < tol
    if not settled[-1]:
        return None
    unsettled = np.flatnonzero(~settled)
    return int(unsettled[-1] + 1) if unsettled.size else 0
