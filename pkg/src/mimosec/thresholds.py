"""Antenna-count thresholds and the delta optimizer.

Each calculator inverts one of the closed forms in :mod:`mimosec.analytics`
and returns a :class:`ThresholdReport` with the real-valued threshold, its
ceiling (the operational antenna count, since all conditions read
``M >= threshold``) and the residual of the defining identity at the real
value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from . import analytics as an
from .config import SystemConfig
from .errors import EmptyGrid, ParameterError

__all__ = [
    "ThresholdReport",
    "s_epsilon",
    "v_of_r",
    "g_epsilon",
    "epsilon_for_antennas",
    "s1_epsilon",
    "v1_of_r",
    "defense_secrecy_antennas",
    "optimize_delta",
]


@dataclass(frozen=True)
class ThresholdReport:
    """Antenna threshold with its inputs.

    ``residual`` is the defining map evaluated at ``value`` minus its target
    (leakage minus epsilon, or decodable rate minus the required rate).  It is
    zero up to rounding for S and V; for S1 it may have either sign.
    """

    quantity: str
    value: float
    inputs: Mapping[str, Any] = field(default_factory=dict)
    residual: float = 0.0
    argmax_user: int | None = None

    @property
    def ceil(self) -> int:
        if math.isinf(self.value):
            raise OverflowError(f"{self.quantity} threshold is infinite")
        return int(math.ceil(self.value))


def _eps_denominator(cfg, epsilon):
    if epsilon <= 0:
        raise ParameterError(f"epsilon must be > 0, got {epsilon}")
    return math.expm1(epsilon / cfg.td_over_t * math.log(2.0))


def _rates(cfg, R):
    R = np.broadcast_to(np.asarray(R, dtype=float), (cfg.K,))
    if np.any(R < 0):
        raise ParameterError("required rates must be >= 0")
    return R


def _check_delta(delta):
    if not 0 < delta < 1:
        raise ParameterError(f"need 0 < delta < 1, got {delta}")


def s_epsilon(cfg: SystemConfig, epsilon: float, delta: float | None = None) -> ThresholdReport:
    """``S(eps) = (M_e rho_max / (2^(T eps / T_d) - 1))^(1/delta)``.

    Beyond ``S(eps)`` antennas delta-conjugate beamforming leaks less than
    ``eps`` bits per use without stochastic encoding.
    """
    delta = cfg.delta if delta is None else delta
    if delta <= 0:
        raise ParameterError(f"delta must be > 0, got {delta}")
    den = _eps_denominator(cfg, epsilon)
    value = (cfg.M_e * cfg.rho_max / den) ** (1.0 / delta)
    residual = an.leakage_delta_conjugate(cfg, value, delta) - epsilon if value > 0 else 0.0
    return ThresholdReport("S", value, {"epsilon": epsilon, "delta": delta}, residual)


def _v_generic(cfg, R, delta, quantity, gain, rate_fn):
    _check_delta(delta)
    R = _rates(cfg, R)
    rho = np.asarray(cfg.rho_users)
    base = np.expm1(R / cfg.td_over_t * math.log(2.0)) * (cfg.rho_f + cfg.rho_jam + 1.0) / (gain * rho)
    per_user = base ** (1.0 / (1.0 - delta))
    k = int(np.argmax(per_user))
    value = float(per_user[k])
    residual = float(rate_fn(cfg, value, delta, user=k) - R[k]) if value > 0 else 0.0
    return ThresholdReport(quantity, value, {"R": tuple(float(r) for r in R), "delta": delta},
                           residual, argmax_user=k)


def v_of_r(cfg: SystemConfig, R: Sequence[float] | float, delta: float | None = None) -> ThresholdReport:
    """``V(R) = max_k ((2^(R_k T/T_d) - 1)(rho_f + rho_jam + 1) / (a rho_k))^(1/(1-delta))``.

    Antennas needed for every user to decode at its target rate under
    delta-conjugate beamforming.
    """
    delta = cfg.delta if delta is None else delta
    return _v_generic(cfg, R, delta, "V", an.no_jam_a(cfg), an.decodable_rate_delta)


def g_epsilon(cfg: SystemConfig, epsilon: float) -> ThresholdReport:
    """Antennas after which the pilot defense achieves ``T_d/T - eps`` DoF-normalized rate.

    ``G(eps) = ((1 + M_e rho_max (1 + rho_jam/rho_r))(rho_f + rho_jam + 1)
    (rho_r + rho_jam + 1) / (rho_min rho_r))^(T_d / (T eps))``.
    """
    if epsilon <= 0:
        raise ParameterError(f"epsilon must be > 0, got {epsilon}")
    if cfg.rho_r <= 0 or cfg.rho_min <= 0:
        raise ParameterError("G needs rho_r > 0 and every rho_k > 0")
    leak = 1.0 + cfg.M_e * cfg.rho_max + cfg.M_e * cfg.rho_max * cfg.rho_jam / cfg.rho_r
    base = leak * (cfg.rho_f + cfg.rho_jam + 1.0) * (cfg.rho_r + cfg.rho_jam + 1.0) / (cfg.rho_min * cfg.rho_r)
    value = base ** (cfg.td_over_t / epsilon)
    return ThresholdReport("G", value, {"epsilon": epsilon, "base": base})


def epsilon_for_antennas(cfg: SystemConfig, M: float) -> float:
    """Inverse of :func:`g_epsilon`: the ``eps`` for which ``G(eps) = M``.

    ``eps = (T_d/T) ln(base) / ln(M)`` with ``base`` the bracket of ``G``.
    """
    if not M > 1:
        raise ParameterError(f"need M > 1, got {M}")
    base = g_epsilon(cfg, 1.0).inputs["base"]
    return cfg.td_over_t * math.log(base) / math.log(M)


def s1_epsilon(cfg: SystemConfig, epsilon: float, delta: float | None = None,
               gamma: float | None = None) -> ThresholdReport:
    """``S1(eps) = (rho_max M_e max(1, rho_jam/rho_r) / (2^(T eps/T_d) - 1))^(1/min(delta, delta+gamma-1))``.

    With ``gamma = 1`` and ``rho_jam <= rho_r`` it coincides with
    :func:`s_epsilon`.  Each of the two leakage terms is at most
    ``2^(T eps/T_d) - 1`` at this ``M``, but their sum can be up to twice that,
    so ``residual`` (leakage minus ``eps``) may be positive.
    :func:`defense_secrecy_antennas` gives the exact crossing.
    """
    delta = cfg.delta if delta is None else delta
    gamma = cfg.gamma if gamma is None else gamma
    if delta <= 0 or gamma <= 0 or delta + gamma <= 1:
        raise ParameterError(f"need delta, gamma > 0 and delta + gamma > 1, got {delta}, {gamma}")
    if cfg.rho_r <= 0:
        raise ParameterError("rho_r must be > 0")
    den = _eps_denominator(cfg, epsilon)
    expo = min(delta, delta + gamma - 1.0)
    num = cfg.rho_max * cfg.M_e * max(1.0, cfg.rho_jam / cfg.rho_r)
    inputs = {"epsilon": epsilon, "delta": delta, "gamma": gamma}
    if num == 0:
        return ThresholdReport("S1", 0.0, inputs, 0.0)
    log_value = math.log(num / den) / expo
    inputs["log_value"] = log_value
    if log_value > math.log(np.finfo(float).max):
        return ThresholdReport("S1", math.inf, inputs, math.nan)
    value = math.exp(log_value)
    residual = an.defense_leakage_delta(cfg, value, delta, gamma) - epsilon
    return ThresholdReport("S1", value, inputs, residual)


def v1_of_r(cfg: SystemConfig, R: Sequence[float] | float, delta: float | None = None) -> ThresholdReport:
    """``V1(R) = max_k ((2^(R_k T/T_d) - 1)(rho_f+rho_jam+1)(rho_r+rho_jam+1) / (rho_r rho_k))^(1/(1-delta))``."""
    delta = cfg.delta if delta is None else delta
    if cfg.rho_r <= 0:
        raise ParameterError("rho_r must be > 0")
    gain = cfg.rho_r / (cfg.rho_r + cfg.rho_jam + 1.0)
    return _v_generic(cfg, R, delta, "V1", gain, an.defense_decodable_rate_delta)


def defense_secrecy_antennas(cfg: SystemConfig, epsilon: float, delta: float | None = None,
                             gamma: float | None = None) -> ThresholdReport:
    """Real ``M`` at which ``defense_leakage_delta(M) = eps``, by root finding.

    The leakage is strictly decreasing in ``M`` when ``delta + gamma > 1``,
    so the root is unique.  It can lie on either side of :func:`s1_epsilon`.
    """
    delta = cfg.delta if delta is None else delta
    gamma = cfg.gamma if gamma is None else gamma
    s1 = s1_epsilon(cfg, epsilon, delta, gamma)
    inputs = {"epsilon": epsilon, "delta": delta, "gamma": gamma}
    if s1.value == 0.0:
        return ThresholdReport("S1_exact", 0.0, inputs, 0.0)
    cap = math.log(np.finfo(float).max)

    def f(logM):
        return an.defense_leakage_delta(cfg, math.exp(min(logM, cap)), delta, gamma) - epsilon

    lo = hi = min(s1.inputs["log_value"], cap)
    if f(cap) > 0:
        return ThresholdReport("S1_exact", math.inf, inputs, math.nan)
    step = 1.0
    while f(hi) > 0:
        hi = min(hi + step, cap)
        step *= 2
    step = 1.0
    while f(lo) <= 0:
        lo -= step
        step *= 2
    value = math.exp(brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))
    return ThresholdReport("S1_exact", value, inputs, f(math.log(value)))


def optimize_delta(cfg: SystemConfig, R, epsilon: float, grid) -> tuple[float, float]:
    """Grid minimizer of ``max(V(R, delta), S(eps, delta))``.

    Ties go to the smaller delta.

    Raises
    ------
    EmptyGrid
        If ``grid`` has no points.
    """
    grid = np.sort(np.asarray(list(grid), dtype=float))
    if grid.size == 0:
        raise EmptyGrid("optimize_delta needs at least one grid point")
    if np.any((grid <= 0) | (grid >= 1)):
        raise ParameterError("delta grid must lie in (0, 1)")
    obj = np.array([max(v_of_r(cfg, R, d).value, s_epsilon(cfg, epsilon, d).value) for d in grid])
    i = int(np.argmin(obj))
    return float(grid[i]), float(obj[i])
