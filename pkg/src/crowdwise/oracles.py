"""Closed-form predictions for the opinion model.

These are used as independent checks on the integrator, so nothing here
calls into :mod:`crowdwise.model`'s stepping code.

Derivation of the deterministic (``D = 0``) solution
----------------------------------------------------
Write ``m(t)`` for the arithmetic mean and ``lam = alpha + beta``. Averaging
the per-agent equation over all agents, the ``alpha`` terms cancel::

    dm/dt = beta * (m(0) - m(t))

With the initial condition ``m(t=0) = m(0)`` the right-hand side is zero,
so the mean is conserved: ``m(t) = m(0)``. Substituting back, every agent
obeys a decoupled linear equation::

    dx_i/dt = alpha*m(0) + beta*x_i(0) - lam*x_i(t) = lam * (x_i* - x_i(t))
    x_i*    = (alpha*m(0) + beta*x_i(0)) / lam

whose solution is ``x_i(t) = x_i* + (x_i(0) - x_i*) * exp(-lam*t)``.

Stationary spread: ``x_i* - m(0) = beta/lam * (x_i(0) - m(0))``, so the raw
(not log) variance of the stationary opinions is
``(beta/lam)**2 * Var(x(0))`` and their mean is ``m(0)``.

With ``alpha = 0`` and ``D > 0`` each agent is an independent
Ornstein-Uhlenbeck process around ``x_i(0)`` started at ``x_i(0)``: its mean
stays at ``x_i(0)`` and its variance is ``D**2 (1 - exp(-2 beta t)) / (2 beta)``.
The same argument applied to the mean-field average gives an OU process
for ``m(t)`` with intensity ``D / sqrt(N)``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDynamicsError, ParameterError


@dataclass(frozen=True, eq=False)
class StationaryPrediction:
    stationary_opinions: np.ndarray
    raw_variance_ratio: float
    decay_rate: float


def _rate(alpha, beta):
    if alpha < 0 or beta < 0:
        raise ParameterError("alpha and beta must be non-negative")
    lam = alpha + beta
    if lam == 0:
        raise DegenerateDynamicsError("alpha + beta == 0: opinions never move")
    return lam


def _initial(initial):
    # accepts a PopulationState or a plain vector of initial opinions
    return np.asarray(getattr(initial, "initial_opinions", initial), dtype=float)


def ou_no_info_solution(x0, beta, t):
    """Expected opinion of an isolated agent (``alpha = 0``) at time ``t``.

    The deterministic part ``x0*exp(-beta t) + x0*(1 - exp(-beta t))``
    is identically ``x0``.
    """
    if not beta > 0:
        raise ParameterError(f"beta must be > 0, got {beta!r}")
    if t < 0:
        raise ParameterError(f"t must be >= 0, got {t!r}")
    return x0


def ou_variance(noise_d, beta, t=math.inf):
    """Variance of an OU opinion started deterministically, at time ``t``."""
    if not beta > 0:
        raise ParameterError(f"beta must be > 0, got {beta!r}")
    return noise_d**2 * -math.expm1(-2.0 * beta * t) / (2.0 * beta)


def stationary_opinions(x0, alpha, beta):
    lam = _rate(alpha, beta)
    x0 = np.asarray(x0, dtype=float)
    return (alpha * x0.mean() + beta * x0) / lam


def stationary_prediction(initial, alpha, beta):
    """Fixed point, variance ratio and decay rate of the noiseless dynamics."""
    lam = _rate(alpha, beta)
    x0 = _initial(initial)
    return StationaryPrediction(
        stationary_opinions=stationary_opinions(x0, alpha, beta),
        raw_variance_ratio=(beta / lam) ** 2,
        decay_rate=lam,
    )


def deterministic_solution(initial, params, t):
    """Exact noiseless opinions at time ``t``.

    Parameters
    ----------
    initial : PopulationState or array_like
        Source of ``x(0)``.
    params : ModelParams
        Must have ``noise_d == 0``; ``dt`` and ``steps_total`` are ignored.
    t : float
        Non-negative time.
    """
    if params.noise_d != 0:
        raise ParameterError("deterministic_solution requires noise_d == 0")
    if t < 0:
        raise ParameterError(f"t must be >= 0, got {t!r}")
    lam = _rate(params.alpha, params.beta)
    x0 = _initial(initial)
    if t == 0:
        return x0.copy()
    star = stationary_opinions(x0, params.alpha, params.beta)
    return star + (x0 - star) * math.exp(-lam * t)
