"""Run configuration files and CSV output.

Configuration is a flat ``key = value`` document, one pair per line,
``#`` starting a comment. Keys by mode:

==================  ========================================================
always required     n_agents, log_mean, log_variance, seed,
                    and exactly one of truth / log_truth
simulate            alpha, beta, noise_d, dt, steps_total
sweep               noise_d, dt, steps_total, alpha_values, beta_values,
                    master_seed
optional            mode, match_moments, record_every, output_path,
                    replicates, resample_population (sweep only)
==================  ========================================================

Axis values are either a comma-separated list or ``linspace(start, stop, num)``.
Grid keys are rejected in simulate mode and ``alpha``/``beta`` in sweep
mode. In sample mode model and grid keys are accepted and validated, which
lets one file drive both ``simulate`` and ``sample``.

All CSV output uses LF line endings and renders reals with 17 significant
digits, so values survive a parse/emit round trip unchanged.
"""

import csv
import io
import math
import os
import re
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .model import DEFAULT_RECORD_EVERY, ModelParams, PopulationSpec, TrajectoryRecord
from .sweep import DEFAULT_REPLICATES, SweepCellResult, SweepGrid, validate_axis

MODES = ("simulate", "sweep", "sample")

POPULATION_KEYS = ("n_agents", "log_mean", "log_variance", "seed")
MODEL_KEYS = ("noise_d", "dt", "steps_total")
RATE_KEYS = ("alpha", "beta")
GRID_REQUIRED = ("alpha_values", "beta_values", "master_seed")
GRID_OPTIONAL = ("replicates", "resample_population")
OTHER_KEYS = ("mode", "truth", "log_truth", "match_moments", "record_every", "output_path")
KNOWN_KEYS = frozenset(POPULATION_KEYS + MODEL_KEYS + RATE_KEYS + GRID_REQUIRED
                       + GRID_OPTIONAL + OTHER_KEYS)

TIMESERIES_HEADER = ("time", "collective_error", "group_diversity", "wisdom_indicator",
                     "arithmetic_mean", "geometric_mean")
HEATMAP_HEADER = ("alpha", "beta", "final_error_mean", "final_error_sd",
                  "final_diversity_mean", "final_wisdom_mean", "replicates")


class ConfigError(ValueError):
    """Problem in a configuration document, tied to a key and line."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}" if isinstance(key, str) else "keys " + ", ".join(key))
        super().__init__(": ".join(where + [message]))


@dataclass(frozen=True)
class RunConfig:
    mode: str
    population: PopulationSpec
    truth: float
    params: ModelParams = None
    grid: SweepGrid = None
    output_path: str = None
    record_every: int = DEFAULT_RECORD_EVERY


# -- parsing -----------------------------------------------------------------

_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")
_LINSPACE = re.compile(r"^linspace\(\s*([^,]+),\s*([^,]+),\s*([^,\)]+)\)$")


def _tokenize(text):
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = m.groups()
        if key not in KNOWN_KEYS:
            raise ConfigError("unknown key", key=key, line=lineno)
        if key in entries:
            raise ConfigError(f"duplicate key (first set on line {entries[key][1]})", key=key, line=lineno)
        if value == "":
            raise ConfigError("empty value", key=key, line=lineno)
        entries[key] = (value, lineno)
    return entries


class _Reader:
    def __init__(self, entries):
        self.entries = entries

    def line(self, key):
        return self.entries[key][1] if key in self.entries else None

    def _conv(self, key, fn, what):
        value, lineno = self.entries[key]
        try:
            return fn(value)
        except (ValueError, OverflowError):
            raise ConfigError(f"expected {what}, got {value!r}", key=key, line=lineno) from None

    def real(self, key, check=None, what="a real number"):
        v = self._conv(key, float, "a real number")
        if not math.isfinite(v) or (check and not check(v)):
            raise ConfigError(f"expected {what}, got {self.entries[key][0]!r}", key=key, line=self.line(key))
        return v

    def integer(self, key, lo=None, hi=None):
        v = self._conv(key, int, "an integer")
        if (lo is not None and v < lo) or (hi is not None and v >= hi):
            bound = f">= {lo}" if hi is None else f"in [{lo}, {hi})"
            raise ConfigError(f"expected an integer {bound}, got {v}", key=key, line=self.line(key))
        return v

    def boolean(self, key):
        value = self.entries[key][0].lower()
        if value in ("true", "yes", "1"):
            return True
        if value in ("false", "no", "0"):
            return False
        raise ConfigError(f"expected true or false, got {value!r}", key=key, line=self.line(key))

    def axis(self, key):
        value, lineno = self.entries[key]
        m = _LINSPACE.match(value)
        try:
            if m:
                start, stop, num = float(m[1]), float(m[2]), int(m[3])
                if num < 1:
                    raise ValueError
                # one rounding per point, so linspace(0, 2, 51) gives exactly k/25
                last = max(num - 1, 1)
                values = tuple(((last - k) * start + k * stop) / last for k in range(num))
            else:
                values = tuple(float(v) for v in value.split(","))
        except ValueError:
            raise ConfigError(f"expected a comma list or linspace(start, stop, num), got {value!r}",
                              key=key, line=lineno) from None
        return values


def _check_stability_early(r, mode):
    # a stability violation is the more useful message even when other keys are missing
    entries = r.entries
    if "dt" not in entries:
        return
    if mode != "sweep" and all(k in entries for k in RATE_KEYS):
        rates = [r.real(k, lambda v: v >= 0, "a non-negative real") for k in RATE_KEYS]
    elif mode != "simulate" and all(k in entries for k in ("alpha_values", "beta_values")):
        rates = [max(r.axis(k)) for k in ("alpha_values", "beta_values")]
    else:
        return
    dt = r.real("dt", lambda v: v > 0, "a positive real")
    try:
        ModelParams(*rates, noise_d=0.0, dt=dt)
    except ParameterError as exc:
        raise ConfigError(str(exc), key="dt", line=r.line("dt")) from None


def parse_config(text, mode=None):
    """Parse and validate a configuration document.

    Parameters
    ----------
    text : str
        The document.
    mode : str, optional
        Mode imposed by the caller (the CLI subcommand). If the document
        also sets ``mode`` the two must agree.

    Raises
    ------
    ConfigError
        Naming the offending key(s) and line.
    """
    entries = _tokenize(text)
    r = _Reader(entries)

    if "mode" in entries:
        file_mode = entries["mode"][0]
        if file_mode not in MODES:
            raise ConfigError(f"expected one of {', '.join(MODES)}, got {file_mode!r}",
                              key="mode", line=r.line("mode"))
        if mode is not None and mode != file_mode:
            raise ConfigError(f"file declares mode {file_mode!r} but {mode!r} was requested",
                              key="mode", line=r.line("mode"))
        mode = file_mode
    elif mode is not None and mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")

    _check_stability_early(r, mode)

    required = list(POPULATION_KEYS)
    if mode is None:
        required.insert(0, "mode")
    elif mode == "simulate":
        required += RATE_KEYS + MODEL_KEYS
    elif mode == "sweep":
        required += MODEL_KEYS + GRID_REQUIRED
    missing = [k for k in required if k not in entries]
    if "truth" not in entries and "log_truth" not in entries:
        missing.append("truth|log_truth")
    if missing:
        raise ConfigError("missing required " + ("key" if len(missing) == 1 else "keys"),
                          key=missing if len(missing) > 1 else missing[0])

    if mode == "simulate":
        for k in GRID_REQUIRED + GRID_OPTIONAL:
            if k in entries:
                raise ConfigError("grid keys are not allowed in simulate mode", key=k, line=r.line(k))
    if mode == "sweep":
        for k in RATE_KEYS:
            if k in entries:
                raise ConfigError("alpha/beta are set per cell by the grid in sweep mode",
                                  key=k, line=r.line(k))
    if "truth" in entries and "log_truth" in entries:
        raise ConfigError("give either truth or log_truth, not both", key="log_truth",
                          line=r.line("log_truth"))

    population = PopulationSpec(
        n_agents=r.integer("n_agents", lo=2),
        log_mean=r.real("log_mean"),
        log_variance=r.real("log_variance", lambda v: v > 0, "a positive real"),
        seed=r.integer("seed", lo=0, hi=2**64),
        match_moments=r.boolean("match_moments") if "match_moments" in entries else False,
    )
    if "truth" in entries:
        truth = r.real("truth", lambda v: v > 0, "a positive real")
    else:
        truth = math.exp(r.real("log_truth"))
        if not truth > 0:
            raise ConfigError("log_truth too small", key="log_truth", line=r.line("log_truth"))

    params = None
    if all(k in entries for k in MODEL_KEYS):
        nonneg = lambda v: v >= 0  # noqa: E731
        noise_d = r.real("noise_d", nonneg, "a non-negative real")
        dt = r.real("dt", lambda v: v > 0, "a positive real")
        steps = r.integer("steps_total", lo=1)
        if mode == "sweep":
            alpha = beta = 0.0
        else:
            alpha = r.real("alpha", nonneg, "a non-negative real") if "alpha" in entries else 0.0
            beta = r.real("beta", nonneg, "a non-negative real") if "beta" in entries else 0.0
        try:
            params = ModelParams(alpha, beta, noise_d, dt, steps)
        except ParameterError as exc:
            raise ConfigError(str(exc), key="dt", line=r.line("dt")) from None

    grid = None
    if mode == "sweep" or (mode == "sample" and all(k in entries for k in GRID_REQUIRED)):
        if params is None:
            raise ConfigError("grid needs noise_d, dt and steps_total",
                              key=[k for k in MODEL_KEYS if k not in entries])
        kwargs = {}
        for k in ("alpha_values", "beta_values"):
            kwargs[k] = r.axis(k)
            try:
                validate_axis(kwargs[k], k)
            except ParameterError as exc:
                raise ConfigError(str(exc), key=k, line=r.line(k)) from None
        try:
            params.with_rates(kwargs["alpha_values"][-1], kwargs["beta_values"][-1])
        except ParameterError as exc:
            raise ConfigError(str(exc), key="dt", line=r.line("dt")) from None
        grid = SweepGrid(
            population=population,
            truth=truth,
            base_params=params,
            master_seed=r.integer("master_seed", lo=0, hi=2**64),
            replicates=r.integer("replicates", lo=1) if "replicates" in entries else DEFAULT_REPLICATES,
            resample_population=(r.boolean("resample_population")
                                 if "resample_population" in entries else False),
            **kwargs,
        )

    return RunConfig(
        mode=mode,
        population=population,
        truth=truth,
        params=params,
        grid=grid,
        output_path=entries["output_path"][0] if "output_path" in entries else None,
        record_every=r.integer("record_every", lo=1) if "record_every" in entries else DEFAULT_RECORD_EVERY,
    )


def format_config(config):
    """Render ``config`` as a document that :func:`parse_config` reads back equal."""
    p = config.population
    lines = [
        f"mode = {config.mode}",
        f"n_agents = {p.n_agents}",
        f"log_mean = {p.log_mean!r}",
        f"log_variance = {p.log_variance!r}",
        f"seed = {p.seed}",
        f"match_moments = {'true' if p.match_moments else 'false'}",
        f"truth = {config.truth!r}",
        f"record_every = {config.record_every}",
    ]
    if config.params is not None:
        q = config.params
        if config.mode != "sweep":
            lines += [f"alpha = {q.alpha!r}", f"beta = {q.beta!r}"]
        lines += [f"noise_d = {q.noise_d!r}", f"dt = {q.dt!r}", f"steps_total = {q.steps_total}"]
    if config.grid is not None:
        g = config.grid
        lines += [
            "alpha_values = " + ", ".join(repr(v) for v in g.alpha_values),
            "beta_values = " + ", ".join(repr(v) for v in g.beta_values),
            f"master_seed = {g.master_seed}",
            f"replicates = {g.replicates}",
            f"resample_population = {'true' if g.resample_population else 'false'}",
        ]
    if config.output_path is not None:
        lines.append(f"output_path = {config.output_path}")
    return "\n".join(lines) + "\n"


# -- CSV ---------------------------------------------------------------------

def format_real(value):
    """17 significant digits; ``nan``/``inf`` spelled out."""
    return format(float(value), ".17g")


def _writer(sink):
    return csv.writer(sink, lineterminator="\n")


def emit_timeseries_csv(record, sink):
    if len(record) == 0:
        raise ValueError("empty trajectory")
    w = _writer(sink)
    w.writerow(TIMESERIES_HEADER)
    for k in range(len(record)):
        w.writerow((
            format_real(record.time[k]),
            format_real(record.collective_error[k]),
            format_real(record.group_diversity[k]),
            str(int(record.wisdom_indicator[k])),
            format_real(record.arithmetic_mean[k]),
            format_real(record.geometric_mean[k]),
        ))


def read_timeseries_csv(text):
    """Parse :func:`emit_timeseries_csv` output.

    The CSV carries no step numbers; ``step`` holds row numbers.
    """
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != TIMESERIES_HEADER:
        raise ValueError("not a time-series CSV")
    body = rows[1:]
    col = lambda k, conv=float: np.array([conv(r[k]) for r in body])  # noqa: E731
    return TrajectoryRecord(
        step=np.arange(len(body)),
        time=col(0),
        collective_error=col(1),
        group_diversity=col(2),
        wisdom_indicator=col(3, int).astype(np.int64),
        arithmetic_mean=col(4),
        geometric_mean=col(5),
    )


def emit_heatmap_csv(results, sink):
    w = _writer(sink)
    w.writerow(HEATMAP_HEADER)
    for res in results:
        w.writerow((
            format_real(res.alpha),
            format_real(res.beta),
            format_real(res.final_error_mean),
            format_real(res.final_error_sd),
            format_real(res.final_diversity_mean),
            format_real(res.final_wisdom_mean),
            str(int(res.replicates_used)),
        ))


def read_heatmap_csv(text):
    """Parse :func:`emit_heatmap_csv` output (failure notes are not stored)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != HEATMAP_HEADER:
        raise ValueError("not a heatmap CSV")
    out = []
    for r in rows[1:]:
        a, b, em, esd, dm, wm = (float(v) for v in r[:6])
        used = int(r[6])
        out.append(SweepCellResult(a, b, em, dm, wm, esd, used,
                                   None if used else "failed (read from CSV)"))
    return out


def emit_population_csv(state, sink):
    w = _writer(sink)
    w.writerow(("opinion",))
    for x in state.opinions:
        w.writerow((format_real(x),))


def write_atomic(path, emit):
    """Call ``emit(sink)`` on a temp file next to ``path``; rename on success."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".crowdwise-", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as sink:
            emit(sink)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
