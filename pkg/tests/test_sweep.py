import math
from dataclasses import replace

import numpy as np
import pytest

from crowdwise import metrics, oracles
from crowdwise.errors import ParameterError, SweepError
from crowdwise.model import (
    ModelParams,
    TrajectoryRecord,
    sample_initial_population,
    simulate,
)
from crowdwise.rng import NoiseStream
from crowdwise.sweep import (
    DEFAULT_AXIS,
    SweepGrid,
    as_table,
    detect_steady_state,
    run_cell,
    run_cells,
    run_sweep,
)

from .conftest import ref_params, ref_population, truth_from_log

TRUTH = truth_from_log(-2.9)


def small_grid(**kw):
    kw.setdefault("population", ref_population())
    kw.setdefault("truth", TRUTH)
    kw.setdefault("alpha_values", (0.0, 0.5))
    kw.setdefault("beta_values", (0.5, 1.0))
    kw.setdefault("replicates", 3)
    kw.setdefault("base_params", ref_params(0, 0, steps=400))
    return SweepGrid(**kw)


def test_default_axes():
    assert len(DEFAULT_AXIS) == 51
    assert DEFAULT_AXIS[0] == 0.0 and DEFAULT_AXIS[-1] == 2.0
    assert DEFAULT_AXIS[1] == 0.04
    grid = SweepGrid(population=ref_population(), truth=TRUTH)
    assert grid.shape == (51, 51) and grid.replicates == 10


@pytest.mark.parametrize("kw", [
    dict(alpha_values=()), dict(alpha_values=(0.5, 0.5)), dict(beta_values=(1.0, 0.5)),
    dict(alpha_values=(-0.1, 0.5)), dict(replicates=0), dict(master_seed=-1),
    dict(truth=0.0), dict(alpha_values=(0.0, 60.0), beta_values=(0.0, 50.0)),
])
def test_invalid_grids(kw):
    with pytest.raises(ParameterError):
        small_grid(**kw)


def test_cell_must_be_on_grid():
    with pytest.raises(ParameterError):
        run_cell(small_grid(), 0.25, 0.5)


def test_no_information_cell_keeps_diversity():
    grid = small_grid(alpha_values=(0.0,), beta_values=(1.0,), replicates=10,
                      base_params=ref_params(0, 0))
    res = run_cell(grid, 0.0, 1.0)
    assert res.replicates_used == 10 and not res.failed
    # OU spread D^2/(2 beta) on opinions ~0.05 moves the log-variance by ~1e-4
    assert res.final_diversity_mean == pytest.approx(0.72, abs=0.02)


def test_frozen_cell_reproduces_initial_metrics():
    grid = small_grid(alpha_values=(0.0,), beta_values=(0.0,), base_params=ref_params(0, 0, noise_d=0.0))
    res = run_cell(grid, 0.0, 0.0)
    x0 = sample_initial_population(grid.population).opinions
    assert res.final_error_mean == metrics.collective_error(x0, TRUTH)
    assert res.final_diversity_mean == metrics.group_diversity(x0)
    assert res.final_wisdom_mean == metrics.wisdom_indicator(x0, TRUTH)
    assert res.final_error_sd == 0.0


def test_consensus_cell_collapses_diversity():
    grid = small_grid(alpha_values=(1.0,), beta_values=(0.0,), replicates=10,
                      base_params=ref_params(0, 0))
    res = run_cell(grid, 1.0, 0.0)
    assert res.final_diversity_mean < 0.01 * 0.72


def test_cell_matches_standalone_simulations():
    grid = small_grid(replicates=4)
    res = run_cell(grid, 0.5, 1.0)
    i, j = grid.index_of(0.5, 1.0)
    finals = []
    for r in range(4):
        noise = NoiseStream(grid.master_seed, 100, (i, j, r, 0))
        rec = simulate(grid.population, grid.base_params.with_rates(0.5, 1.0), TRUTH,
                       record_every=400, noise=noise)
        finals.append(rec.metric_matrix()[-1])
    finals = np.array(finals)
    np.testing.assert_allclose(
        [res.final_error_mean, res.final_diversity_mean, res.final_wisdom_mean],
        finals[:, :3].mean(axis=0), rtol=1e-14)
    assert res.final_error_sd == pytest.approx(np.std(finals[:, 0], ddof=1), rel=1e-12)


def test_sweep_rows_equal_standalone_cells():
    grid = small_grid(replicates=1)
    rows = run_sweep(grid)
    assert len(rows) == 4
    assert [(r.alpha, r.beta) for r in rows] == [(0.0, 0.5), (0.0, 1.0), (0.5, 0.5), (0.5, 1.0)]
    for r in rows:
        assert r == run_cell(grid, r.alpha, r.beta)


def test_scheduling_independence():
    grid = small_grid(alpha_values=(0.0, 0.3, 0.9), beta_values=(0.1, 0.6))
    cells = grid.cells()
    forward = run_cells(grid, cells)
    backward = run_cells(grid, cells[::-1])[::-1]
    shuffled_order = np.random.default_rng(5).permutation(len(cells))
    shuffled = run_cells(grid, [cells[k] for k in shuffled_order])
    restored = [None] * len(cells)
    for pos, k in enumerate(shuffled_order):
        restored[k] = shuffled[pos]
    assert forward == backward == restored
    assert run_sweep(grid, workers=3) == run_sweep(grid, workers=1) == forward


def test_single_replicate_repeatable():
    grid = small_grid(replicates=1, master_seed=99)
    assert run_sweep(grid) == run_sweep(grid)
    other = run_sweep(replace(grid, master_seed=100))
    assert other != run_sweep(grid)


def test_resampled_populations():
    grid = small_grid(resample_population=True)
    a = run_sweep(grid)
    assert a == run_sweep(grid)
    shared = run_sweep(replace(grid, resample_population=False))
    assert [r.final_diversity_mean for r in a] != [r.final_diversity_mean for r in shared]


def test_diversity_non_increasing_in_alpha():
    alphas = tuple(np.round(np.linspace(0, 2, 11), 10))
    grid = small_grid(alpha_values=alphas, beta_values=(0.2, 1.0, 2.0), replicates=5,
                      base_params=ref_params(0, 0, steps=1500))
    div = as_table(run_sweep(grid), grid, "final_diversity_mean")
    # noise at D=1e-3 moves the log-variance by ~1e-4; allow that much slack
    assert np.all(np.diff(div, axis=0) <= 1e-4)


def test_failed_cells_are_reported_not_raised():
    grid = small_grid(alpha_values=(0.0, 1.0), beta_values=(0.0,), replicates=2,
                      base_params=ref_params(0, 0))
    res = run_sweep(grid)
    bad, good = res
    assert bad.failed and "non-positive" in bad.failure
    assert bad.replicates_used == 0 and math.isnan(bad.final_error_mean)
    assert not good.failed and good.replicates_used == 2


def test_sweep_fails_when_every_cell_fails():
    grid = small_grid(alpha_values=(0.0,), beta_values=(0.0,), replicates=1,
                      base_params=ref_params(0, 0, noise_d=0.05))
    with pytest.raises(SweepError):
        run_sweep(grid)


# -- steady state ----------------------------------------------------------------

def _record(rows):
    rows = np.asarray(rows, dtype=float)
    n = rows.shape[0]
    return TrajectoryRecord(np.arange(n), np.arange(n) * 0.01, *rows.T)


def test_constant_trajectory_is_steady_from_start():
    rec = _record(np.ones((20, 5)))
    assert detect_steady_state(rec, 5, 1e-12) == 0
    assert detect_steady_state(_record(np.ones((1, 5))), 5, 1e-12) == 0


def test_late_jump_delays_detection():
    rows = np.ones((30, 5))
    rows[12:, 1] = 2.0
    assert detect_steady_state(_record(rows), 4, 1e-9) == 12


def test_pure_noise_never_settles():
    rec = simulate(ref_population(), ref_params(0, 0, noise_d=1e-3, steps=500), TRUTH, record_every=1)
    assert detect_steady_state(rec, 10, 1e-12) is None


def test_steady_state_argument_checks():
    rec = _record(np.ones((3, 5)))
    with pytest.raises(ParameterError):
        detect_steady_state(rec, 0, 1e-6)
    with pytest.raises(ParameterError):
        detect_steady_state(rec, 2, 0.0)


@pytest.mark.parametrize("alpha, beta", [(1.0, 1.0), (1.5, 0.5), (0.5, 1.5)])
@pytest.mark.parametrize("window, tol", [(10, 1e-6), (20, 1e-7), (50, 1e-8)])
def test_detected_time_follows_decay_rate(alpha, beta, window, tol):
    spec = ref_population()
    p = ModelParams(alpha, beta, noise_d=0.0, dt=0.01, steps_total=3000)
    rec = simulate(spec, p, TRUTH, record_every=1)
    pred = oracles.stationary_prediction(sample_initial_population(spec), alpha, beta)
    lam = pred.decay_rate
    x_inf = pred.stationary_opinions
    limit = np.array([metrics.collective_error(x_inf, TRUTH), metrics.group_diversity(x_inf),
                      x_inf.mean(), metrics.geometric_mean(x_inf)])
    m = rec.metric_matrix()[0, [0, 1, 3, 4]]
    scale = np.max(np.abs(m - limit))
    # a window of w rows over exp(-lam t) decay spans scale*exp(-lam t)*(1 - exp(-lam w dt))
    expected = math.log(scale * -math.expm1(-lam * window * p.dt) / tol) / lam
    k = detect_steady_state(rec, window, tol)
    assert rec.time[k] == pytest.approx(expected, rel=0.2)
