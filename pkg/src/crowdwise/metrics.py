"""Crowd-performance measures of a population snapshot.

All opinions are positive raw estimates. Error and diversity are taken on
natural logs, the wisdom indicator on the raw values (it is a rank
statistic, so the choice does not change the result).

Every function accepts either a single snapshot of shape ``(N,)`` or a
batch of shape ``(..., N)``; reductions run over the last axis.
"""

from dataclasses import dataclass

import numpy as np

from .errors import MetricDomainError


@dataclass(frozen=True)
class CrowdMetrics:
    collective_error: float
    group_diversity: float
    wisdom_indicator: int
    arithmetic_mean_raw: float
    geometric_mean_raw: float


def _positive(opinions):
    x = np.asarray(opinions, dtype=float)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise MetricDomainError("need at least one opinion")
    if not np.all(x > 0):
        raise MetricDomainError("opinions must be strictly positive")
    return x


def _positive_truth(truth):
    if not truth > 0:
        raise MetricDomainError(f"truth must be strictly positive, got {truth!r}")
    return float(truth)


def collective_error(opinions, truth):
    """Squared distance between ``ln truth`` and the mean log-opinion."""
    x = _positive(opinions)
    t = _positive_truth(truth)
    return (np.log(t) - np.log(x).mean(axis=-1)) ** 2


def group_diversity(opinions):
    """Population (1/N) variance of the log-opinions."""
    x = _positive(opinions)
    logs = np.log(x)
    return ((logs - logs.mean(axis=-1, keepdims=True)) ** 2).mean(axis=-1)


def wisdom_indicator(opinions, truth):
    """Largest ``i`` with ``x_(i) <= truth <= x_(N-i+1)`` on sorted opinions.

    Returns 0 when the truth lies outside the range of opinions and at most
    ``N // 2``. With ``L = #{x <= truth}`` and ``U = #{x >= truth}`` the
    bracketing condition holds exactly for ``i <= min(L, U)``, so no sort is
    needed.
    """
    x = np.asarray(opinions, dtype=float)
    if x.ndim == 0 or x.shape[-1] < 2:
        raise MetricDomainError("wisdom indicator needs at least two opinions")
    n = x.shape[-1]
    below = np.count_nonzero(x <= truth, axis=-1)
    above = np.count_nonzero(x >= truth, axis=-1)
    return np.minimum(np.minimum(below, above), n // 2)


def geometric_mean(opinions):
    x = _positive(opinions)
    return np.exp(np.log(x).mean(axis=-1))


def crowd_metrics(opinions, truth):
    """All five snapshot quantities for a single population."""
    x = _positive(opinions)
    if x.ndim != 1:
        raise ValueError("crowd_metrics takes a single snapshot; use the array functions for batches")
    return CrowdMetrics(
        collective_error=float(collective_error(x, truth)),
        group_diversity=float(group_diversity(x)),
        wisdom_indicator=int(wisdom_indicator(x, truth)),
        arithmetic_mean_raw=float(x.mean()),
        geometric_mean_raw=float(geometric_mean(x)),
    )
