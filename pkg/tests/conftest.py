import math

import pytest

from crowdwise.model import ModelParams, PopulationSpec

REF_N = 100
REF_D = 1e-3
REF_DT = 0.01
REF_STEPS = 3000
REF_LOG_VARIANCE = 0.72

_ACCEPTANCE_LINES = []


def ref_population(log_mean=-3.0, seed=7, match_moments=True):
    return PopulationSpec(REF_N, log_mean, REF_LOG_VARIANCE, seed, match_moments=match_moments)


def ref_params(alpha, beta, noise_d=REF_D, dt=REF_DT, steps=REF_STEPS):
    return ModelParams(alpha, beta, noise_d, dt, steps)


def truth_from_log(log_truth):
    return math.exp(log_truth)


@pytest.fixture
def acceptance_report():
    """Collects one pass/fail line per acceptance criterion for the summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
