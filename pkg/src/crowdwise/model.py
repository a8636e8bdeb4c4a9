"""Mean-field coupled opinion dynamics.

Each agent holds a positive opinion ``x_i`` that is pulled toward the
population arithmetic mean with strength ``alpha`` (social influence) and
back toward its own initial opinion with strength ``beta`` (individual
conviction), plus additive Gaussian noise of intensity ``D``::

    x_i(t+dt) = x_i(t) + dt*alpha*(<x(t)> - x_i(t))
                       + dt*beta*(x_i(0) - x_i(t)) + D*sqrt(dt)*g_i(t)

All agents update simultaneously from the pre-step mean. ``g_i(t)`` comes
from agent ``i``'s counter-based substream (see :mod:`crowdwise.rng`), so a
run is a pure function of its seed and parameters.
"""

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from . import metrics
from .errors import ParameterError, PositivityError
from .rng import ZIG_RATIO, ZIG_X, NoiseStream, counter_offset, mix64, normal_slow, uniform53

DEFAULT_RECORD_EVERY = 10
_NOISE_SPAWN = (1,)
_LOW7 = np.uint64(127)


@dataclass(frozen=True)
class ModelParams:
    """Rates, noise and integration settings of one run.

    ``steps_total`` is the number of updates, so a run ends at
    ``t = steps_total * dt``.
    """

    alpha: float
    beta: float
    noise_d: float = 1e-3
    dt: float = 0.01
    steps_total: int = 3000

    def __post_init__(self):
        for name in ("alpha", "beta", "noise_d"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ParameterError(f"{name} must be finite and >= 0, got {value!r}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ParameterError(f"dt must be > 0, got {self.dt!r}")
        if int(self.steps_total) != self.steps_total or self.steps_total < 1:
            raise ParameterError(f"steps_total must be an integer >= 1, got {self.steps_total!r}")
        object.__setattr__(self, "steps_total", int(self.steps_total))
        load = self.dt * (self.alpha + self.beta)
        if load > 1:
            raise ParameterError(
                f"stability violated: dt*(alpha+beta) = {load:g} > 1 "
                f"(dt={self.dt:g}, alpha={self.alpha:g}, beta={self.beta:g})"
            )

    def with_rates(self, alpha, beta):
        return ModelParams(alpha, beta, self.noise_d, self.dt, self.steps_total)


@dataclass(frozen=True)
class PopulationSpec:
    """Log-normal initial population.

    ``log_mean`` and ``log_variance`` are the mean and variance of
    ``ln x``. With ``match_moments`` the Gaussian sample is affinely
    rescaled so that its own mean and 1/N variance equal the targets
    exactly, which pins the initial error and diversity of a finite crowd.
    """

    n_agents: int
    log_mean: float
    log_variance: float
    seed: int
    match_moments: bool = False

    def __post_init__(self):
        if int(self.n_agents) != self.n_agents or self.n_agents < 2:
            raise ParameterError(f"n_agents must be an integer >= 2, got {self.n_agents!r}")
        if not math.isfinite(self.log_mean):
            raise ParameterError(f"log_mean must be finite, got {self.log_mean!r}")
        if not (math.isfinite(self.log_variance) and self.log_variance > 0):
            raise ParameterError(f"log_variance must be > 0, got {self.log_variance!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ParameterError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        object.__setattr__(self, "n_agents", int(self.n_agents))
        object.__setattr__(self, "seed", int(self.seed))


def _frozen(values):
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PopulationState:
    opinions: np.ndarray
    initial_opinions: np.ndarray
    time: float = 0.0
    steps_elapsed: int = 0

    def __post_init__(self):
        x = _frozen(self.opinions)
        x0 = _frozen(self.initial_opinions)
        if x.ndim != 1 or x.shape != x0.shape:
            raise ParameterError("opinions and initial_opinions must be 1-d of equal length")
        if x.size < 2:
            raise ParameterError("a population needs at least two agents")
        if not (np.all(x > 0) and np.all(x0 > 0)):
            raise ParameterError("opinions must be strictly positive")
        object.__setattr__(self, "opinions", x)
        object.__setattr__(self, "initial_opinions", x0)

    @classmethod
    def from_opinions(cls, opinions):
        return cls(opinions, opinions)

    @property
    def n_agents(self):
        return self.opinions.shape[0]

    @property
    def mean(self):
        return float(self.opinions.mean())


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Metric time series of one run, one entry per recorded step."""

    step: np.ndarray
    time: np.ndarray
    collective_error: np.ndarray
    group_diversity: np.ndarray
    wisdom_indicator: np.ndarray
    arithmetic_mean: np.ndarray
    geometric_mean: np.ndarray
    final_state: PopulationState = field(default=None, repr=False)

    METRICS = ("collective_error", "group_diversity", "wisdom_indicator",
               "arithmetic_mean", "geometric_mean")

    def __len__(self):
        return len(self.step)

    def metric_matrix(self):
        """Recorded metrics as a ``(len, 5)`` float array in :attr:`METRICS` order."""
        return np.column_stack([np.asarray(getattr(self, m), dtype=float) for m in self.METRICS])

    def row(self, index):
        return {m: getattr(self, m)[index] for m in ("step", "time") + self.METRICS}


def sample_initial_population(spec):
    """Draw ``N`` log-normal opinions from ``spec``."""
    rng = np.random.default_rng(spec.seed)
    sd = math.sqrt(spec.log_variance)
    logs = rng.normal(spec.log_mean, sd, spec.n_agents)
    if spec.match_moments:
        spread = logs.std()
        if spread == 0:
            raise ParameterError("cannot match moments of a degenerate sample")
        logs = spec.log_mean + sd * (logs - logs.mean()) / spread
    opinions = np.exp(logs)
    return PopulationState(opinions, opinions)


def drift(opinion, initial_opinion, population_mean, params):
    """Deterministic rate of change of one opinion (array inputs broadcast)."""
    return (params.alpha * (population_mean - opinion)
            + params.beta * (initial_opinion - opinion))


@numba.njit(nogil=True, cache=True)
def _advance(x, x0, keys, alpha, beta, noise_d, dt, start, n_steps, failed_at, xs, ratio):
    n_rows, n = x.shape
    amp = noise_d * math.sqrt(dt)
    noisy = noise_d != 0.0
    for r in range(n_rows):
        if failed_at[r] >= 0:
            continue
        da = dt * alpha[r]
        db = dt * beta[r]
        for k in range(start, start + n_steps):
            total = 0.0
            for i in range(n):
                total += x[r, i]
            m = total / n
            offset = counter_offset(k)
            bad = False
            for i in range(n):
                xi = x[r, i]
                new = xi + da * (m - xi) + db * (x0[r, i] - xi)
                if noisy:
                    # ziggurat fast path, see rng.normal_from_hash
                    h = mix64(keys[r, i] + offset)
                    j = np.int64(h & _LOW7)
                    u = 2.0 * uniform53(h) - 1.0
                    if abs(u) < ratio[j]:
                        new += amp * (u * xs[j])
                    else:
                        new += amp * normal_slow(h, xs, ratio)
                x[r, i] = new
                if not new > 0.0:
                    bad = True
            if bad:
                failed_at[r] = k + 1
                break


def advance_batch(x, x0, keys, alpha, beta, noise_d, dt, start, n_steps, failed_at=None):
    """Advance independent runs stored row-wise in ``x`` in place.

    Parameters
    ----------
    x, x0 : ndarray, shape (runs, N)
        Current and initial opinions; ``x`` is overwritten.
    keys : ndarray of uint64, shape (runs, N)
        Noise substream keys per agent.
    alpha, beta : ndarray, shape (runs,)
        Per-run rates.
    start : int
        Steps already elapsed; selects the noise counters.
    failed_at : ndarray of int64, shape (runs,), optional
        ``-1`` for healthy rows. A row whose update produced a non-positive
        opinion gets the offending step number and is frozen from then on.

    Returns
    -------
    failed_at : ndarray of int64
    """
    if failed_at is None:
        failed_at = np.full(x.shape[0], -1, dtype=np.int64)
    _advance(x, x0, keys, np.asarray(alpha, dtype=float), np.asarray(beta, dtype=float),
             float(noise_d), float(dt), int(start), int(n_steps), failed_at, ZIG_X, ZIG_RATIO)
    return failed_at


def _noise_keys(noise, n):
    if noise is None:
        return np.zeros(n, dtype=np.uint64)
    if noise.n_agents != n:
        raise ParameterError(f"noise stream has {noise.n_agents} substreams for {n} agents")
    return noise.keys


def step(state, params, noise=None):
    """One simultaneous update of every agent.

    ``noise`` is a :class:`~crowdwise.rng.NoiseStream`; it may be omitted
    when ``params.noise_d == 0``. The draw for agent ``i`` is taken at
    counter ``state.steps_elapsed``.

    Raises
    ------
    PositivityError
        If any updated opinion is <= 0.
    """
    if noise is None and params.noise_d != 0:
        raise ParameterError("a noise stream is required when noise_d > 0")
    n = state.n_agents
    x = np.array(state.opinions, dtype=float)[None, :]
    x0 = np.ascontiguousarray(state.initial_opinions)[None, :]
    keys = _noise_keys(noise, n)[None, :]
    failed = advance_batch(x, x0, keys, [params.alpha], [params.beta],
                           params.noise_d, params.dt, state.steps_elapsed, 1)
    if failed[0] >= 0:
        raise PositivityError(failed[0])
    k = state.steps_elapsed + 1
    return PopulationState(x[0], state.initial_opinions, time=k * params.dt, steps_elapsed=k)


def _record(x, truth):
    m = metrics.crowd_metrics(x, truth)
    return (m.collective_error, m.group_diversity, m.wisdom_indicator,
            m.arithmetic_mean_raw, m.geometric_mean_raw)


def run_trajectory(state, params, truth, record_every=DEFAULT_RECORD_EVERY, noise=None):
    """Integrate ``params.steps_total`` steps from ``state`` and record metrics.

    Rows are taken at the starting step, every ``record_every`` steps, and
    at the final step.
    """
    if int(record_every) != record_every or record_every < 1:
        raise ParameterError(f"record_every must be an integer >= 1, got {record_every!r}")
    if not truth > 0:
        raise ParameterError(f"truth must be > 0, got {truth!r}")
    if noise is None and params.noise_d != 0:
        raise ParameterError("a noise stream is required when noise_d > 0")
    n = state.n_agents
    x = np.array(state.opinions, dtype=float)[None, :]
    x0 = np.ascontiguousarray(state.initial_opinions)[None, :]
    keys = _noise_keys(noise, n)[None, :]
    alpha = np.array([params.alpha])
    beta = np.array([params.beta])
    failed = np.full(1, -1, dtype=np.int64)

    start = state.steps_elapsed
    end = start + params.steps_total
    steps = [start]
    rows = [_record(x[0], truth)]
    k = start
    while k < end:
        chunk = min(int(record_every), end - k)
        advance_batch(x, x0, keys, alpha, beta, params.noise_d, params.dt, k, chunk, failed)
        if failed[0] >= 0:
            raise PositivityError(failed[0])
        k += chunk
        steps.append(k)
        rows.append(_record(x[0], truth))

    cols = list(zip(*rows))
    steps = np.array(steps, dtype=np.int64)
    final = PopulationState(x[0], state.initial_opinions, time=end * params.dt, steps_elapsed=end)
    return TrajectoryRecord(
        step=steps,
        time=steps * params.dt,
        collective_error=np.array(cols[0]),
        group_diversity=np.array(cols[1]),
        wisdom_indicator=np.array(cols[2], dtype=np.int64),
        arithmetic_mean=np.array(cols[3]),
        geometric_mean=np.array(cols[4]),
        final_state=final,
    )


def default_noise(spec):
    """Noise substreams a standalone run on ``spec`` uses by default."""
    return NoiseStream(spec.seed, spec.n_agents, _NOISE_SPAWN)


def simulate(spec, params, truth, record_every=DEFAULT_RECORD_EVERY, noise=None):
    """Sample a population from ``spec`` and run it for ``params.steps_total`` steps.

    Parameters
    ----------
    spec : PopulationSpec
    params : ModelParams
    truth : float
        Positive true value the metrics are scored against.
    record_every : int
        Recording stride in steps.
    noise : NoiseStream, optional
        Defaults to substreams derived from ``spec.seed``.

    Returns
    -------
    TrajectoryRecord
    """
    state = sample_initial_population(spec)
    if noise is None:
        noise = default_noise(spec)
    return run_trajectory(state, params, truth, record_every, noise)
