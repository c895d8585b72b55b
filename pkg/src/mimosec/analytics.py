"""Closed-form secure rates, SINR decompositions and leakage terms.

All rates are in bits per channel use and already carry the ``T_d/T``
training-overhead factor unless stated otherwise.  Functions take the
antenna count ``M`` explicitly (defaulting to ``cfg.M``) so the threshold
calculators can sweep and invert them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .errors import ParameterError

__all__ = [
    "RateReport",
    "SinrDecomposition",
    "LlnStats",
    "lln_limits",
    "NegativeRateWarning",
    "no_jam_a",
    "rate_no_training_jamming",
    "sinr_conjugate",
    "leakage_delta_conjugate",
    "decodable_rate_delta",
    "pilot_matching_rate_limit",
    "matched_rate_bound_sample",
    "defense_a",
    "defense_rate",
    "defense_dof_lower_bound",
    "defense_leakage_delta",
    "defense_decodable_rate_delta",
]


class NegativeRateWarning(UserWarning):
    """An unclamped secure-rate expression came out negative."""


@dataclass(frozen=True)
class RateReport:
    """Secure rate of one user with its two logarithmic terms.

    ``rate = decodable - leakage``, clamped at zero only when ``clamped``.
    """

    rate: float
    decodable: float
    leakage: float
    sinr: float
    leak_snr: float
    td_over_t: float
    M: float
    user: int
    formula: str
    clamped: bool

    @property
    def dof_ratio(self) -> float:
        return self.rate / math.log2(self.M) if self.M > 1 else math.nan

    def recombine(self) -> float:
        diff = self.decodable - self.leakage
        return max(0.0, diff) if self.clamped else diff


@dataclass(frozen=True)
class SinrDecomposition:
    """Variances of the four terms of a conjugate-beamformed user sample.

    ``var_t0`` is the coherent signal, ``var_t1`` the gain uncertainty,
    ``var_t2`` the multi-user interference and ``var_t3`` jamming plus noise.
    """

    var_t0: float
    var_t1: float
    var_t2: float
    var_t3: float

    @property
    def sinr(self) -> float:
        return self.var_t0 / (self.var_t1 + self.var_t2 + self.var_t3)


@dataclass(frozen=True)
class LlnStats:
    """Samples of ``v_k`` and ``w_k`` for the pilot-matched user at one ``M``.

    ``v_k = |H_k Hhat_k^*|^2 / (alpha_k M^2)`` and ``w_k`` is the same with the
    tilde channel in place of ``H_k``.  ``gamma_k = |E[H_km Hhat_km^*]|^2`` and
    ``pi_k = |E[H_em Hhat_km^*]|^2``; the almost-sure limits are
    ``gamma_k / alpha_k`` and ``pi_k / alpha_k``.
    """

    M: int
    v: np.ndarray
    w: np.ndarray
    gamma_k: float
    pi_k: float
    alpha_k: float

    def __post_init__(self):
        if np.any(np.asarray(self.v) < 0) or np.any(np.asarray(self.w) < 0):
            raise ParameterError("v and w samples must be non-negative")

    @property
    def v_limit(self) -> float:
        return self.gamma_k / self.alpha_k

    @property
    def w_limit(self) -> float:
        return self.pi_k / self.alpha_k


def lln_limits(cfg: SystemConfig) -> tuple[float, float, float]:
    """``(gamma_k, pi_k, alpha_k)`` of the pilot-matched user's estimate."""
    E = cfg.pilot_energy
    if E <= 0:
        raise ParameterError("need rho_r T_r > 0")
    D = E + 1.0 + cfg.T_r * cfg.rho_jam
    a = E / D
    b = cfg.T_r * math.sqrt(cfg.rho_r * cfg.rho_jam) / D
    c = math.sqrt(E) / D
    return a * a, b * b, a * a + b * b + c * c


def _M(cfg, M):
    M = cfg.M if M is None else M
    # real-valued M is allowed so that thresholds below one antenna invert cleanly
    if not M > 0:
        raise ParameterError(f"antenna count must be > 0, got {M}")
    return float(M)


def _user(cfg, user):
    if user is None:
        return int(np.argmax(cfg.rho_users))
    if not 0 <= user < cfg.K:
        raise ParameterError(f"user {user} outside [0, {cfg.K})")
    return user


def no_jam_a(cfg: SystemConfig) -> float:
    """MMSE gain ``a = rho_r T_r / (rho_r T_r + 1)`` without training jamming."""
    E = cfg.pilot_energy
    return E / (E + 1.0)


def _report(cfg, M, k, sinr, leak_snr, formula, clamped):
    td = cfg.td_over_t
    dec = td * math.log2(1.0 + sinr)
    leak = td * math.log2(1.0 + leak_snr)
    diff = dec - leak
    rate = max(0.0, diff) if clamped else diff
    return RateReport(rate=rate, decodable=dec, leakage=leak, sinr=sinr, leak_snr=leak_snr,
                      td_over_t=td, M=M, user=k, formula=formula, clamped=clamped)


def rate_no_training_jamming(cfg: SystemConfig, M: float | None = None, user: int = 0,
                             warn: bool = True) -> RateReport:
    """Secure rate with conjugate beamforming and stochastic encoding when the
    adversary stays silent during training.

    ``R_k = T_d/T [log2(1 + M rho_k a / (rho_f + rho_jam + 1)) - log2(1 + M_e rho_k)]``.
    Not clamped; a negative value triggers :class:`NegativeRateWarning`.
    """
    M = _M(cfg, M)
    k = _user(cfg, user)
    rho_k = cfg.rho(k)
    sinr = M * rho_k * no_jam_a(cfg) / (cfg.rho_f + cfg.rho_jam + 1.0)
    rep = _report(cfg, M, k, sinr, cfg.M_e * rho_k, "no_training_jamming", clamped=False)
    if warn and rep.rate < 0:
        warnings.warn(f"secure rate {rep.rate:.4g} < 0 at M={M:g}, M_e={cfg.M_e}",
                      NegativeRateWarning, stacklevel=2)
    return rep


def sinr_conjugate(cfg: SystemConfig, M: float | None = None, user: int = 0) -> SinrDecomposition:
    """Variance decomposition of user ``k``'s received sample (no training jamming).

    The jamming-plus-noise term is ``rho_jam + 1`` (a single jamming antenna
    reaching the user with unit gain on average).
    """
    M = _M(cfg, M)
    k = _user(cfg, user)
    rho_k = cfg.rho(k)
    return SinrDecomposition(
        var_t0=M * rho_k * no_jam_a(cfg),
        var_t1=rho_k,
        var_t2=cfg.rho_f - rho_k,
        var_t3=cfg.rho_jam + 1.0,
    )


def leakage_delta_conjugate(cfg: SystemConfig, M: float | None = None, delta: float | None = None,
                            user: int | None = None) -> float:
    """Information leaked to the adversary under delta-conjugate beamforming.

    ``T_d/T log2(1 + M_e rho_k / M^delta)``; ``user=None`` picks the strongest
    user, which is the one the secrecy threshold is built for.
    """
    M = _M(cfg, M)
    delta = cfg.delta if delta is None else delta
    if delta <= 0:
        raise ParameterError(f"delta must be > 0, got {delta}")
    rho_k = cfg.rho(_user(cfg, user))
    return cfg.td_over_t * math.log2(1.0 + cfg.M_e * rho_k * M ** (-delta))


def decodable_rate_delta(cfg: SystemConfig, M: float | None = None, delta: float | None = None,
                         user: int = 0, conservative: bool = True) -> float:
    """Rate user ``k`` can decode under delta-conjugate beamforming.

    With ``conservative=True`` the interference term keeps the full power
    ``rho_f``::

        T_d/T log2(1 + M^(1-delta) a rho_k / (rho_f + rho_jam + 1))

    which is exactly the map inverted by :func:`mimosec.thresholds.v_of_r`.
    ``conservative=False`` uses the beamformed interference ``M^-delta rho_f``
    instead, i.e. the actual SINR of the delta-conjugate scheme; it is never
    smaller than the conservative value.
    """
    M = _M(cfg, M)
    delta = cfg.delta if delta is None else delta
    if not 0 <= delta < 1:
        raise ParameterError(f"need 0 <= delta < 1, got {delta}")
    k = _user(cfg, user)
    interference = cfg.rho_f if conservative else M ** (-delta) * cfg.rho_f
    sinr = M ** (1.0 - delta) * no_jam_a(cfg) * cfg.rho(k) / (interference + cfg.rho_jam + 1.0)
    return cfg.td_over_t * math.log2(1.0 + sinr)


def pilot_matching_rate_limit(cfg: SystemConfig) -> float:
    """Large-``M`` limit of a pilot-matched user's rate, ``[log2(a^2 / b^2)]^+``.

    ``a`` and ``b`` are the estimator's weights on ``H_k`` and ``H_e``, so the
    limit reduces to ``[log2(rho_r / rho_jam)]^+``.  No ``T_d/T`` factor.
    Infinite when ``rho_jam = 0``.
    """
    if cfg.rho_r <= 0:
        raise ParameterError("rho_r must be > 0")
    if cfg.rho_jam == 0:
        return math.inf
    E = cfg.pilot_energy
    D = E + 1.0 + cfg.T_r * cfg.rho_jam
    a = E / D
    b = cfg.T_r * math.sqrt(cfg.rho_r * cfg.rho_jam) / D
    return max(0.0, math.log2(a * a / (b * b)))


def matched_rate_bound_sample(v, w, rho_k: float, M: float):
    """``[log2(1/M + rho_k v) - log2(1/M + rho_k w)]^+`` for one channel draw.

    Works elementwise on arrays.  The caller applies ``T_d/T``.
    """
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(v < 0) or np.any(w < 0):
        raise ParameterError("v and w must be non-negative")
    if M < 1:
        raise ParameterError(f"M must be >= 1, got {M}")
    out = np.maximum(0.0, np.log2(1.0 / M + rho_k * v) - np.log2(1.0 / M + rho_k * w))
    return float(out) if out.ndim == 0 else out


def defense_a(cfg: SystemConfig) -> float:
    """Estimator gain under the randomized-pilot defense.

    ``T_r rho_r / (T_r rho_r + 1 + T_r rho_jam / L)``; the adversary hits a
    given user's pilot with probability ``J/L`` at power ``rho_jam/J``, so
    ``J`` cancels.
    """
    E = cfg.pilot_energy
    return E / (E + 1.0 + cfg.T_r * cfg.rho_jam / cfg.L)


def defense_rate(cfg: SystemConfig, M: float | None = None, user: int = 0) -> RateReport:
    """Clamped secure rate under random-subset jamming with hidden, randomized pilots.

    With ``L = T_r`` this is::

        [T_d/T log2(1 + M rho_k rho_r T_r / ((rho_f+rho_jam+1)(rho_r T_r + rho_jam + 1)))
         - T_d/T log2(1 + M_e rho_k + M_e M rho_k rho_jam / (rho_r T_r + rho_jam + 1))]^+

    The jammed-subset size ``J`` does not enter.
    """
    M = _M(cfg, M)
    k = _user(cfg, user)
    if cfg.rho_r <= 0:
        raise ParameterError("rho_r must be > 0")
    rho_k = cfg.rho(k)
    a = defense_a(cfg)
    sinr = M * rho_k * a / (cfg.rho_f + cfg.rho_jam + 1.0)
    leak = cfg.M_e * rho_k + M * cfg.M_e * rho_k * cfg.rho_jam * a / (cfg.L * cfg.rho_r)
    return _report(cfg, M, k, sinr, leak, "randomized_pilot_defense", clamped=True)


def defense_dof_lower_bound(cfg: SystemConfig, gamma: float | None = None,
                            epsilon: float = 0.0) -> float:
    """``T_d/T min(1, gamma) - epsilon``."""
    gamma = cfg.gamma if gamma is None else gamma
    if gamma <= 0:
        raise ParameterError(f"gamma must be > 0, got {gamma}")
    if epsilon < 0:
        raise ParameterError(f"epsilon must be >= 0, got {epsilon}")
    return cfg.td_over_t * min(1.0, gamma) - epsilon


def defense_leakage_delta(cfg: SystemConfig, M: float | None = None, delta: float | None = None,
                          gamma: float | None = None, user: int | None = None) -> float:
    """Leakage bound under the pilot defense with ``T_r >= M^gamma``.

    ``T_d/T log2(1 + M_e rho_k / M^delta + M^(1-delta-gamma) M_e rho_k rho_jam / rho_r)``.
    Requires ``delta + gamma > 1`` so that it vanishes as ``M`` grows.
    """
    M = _M(cfg, M)
    delta = cfg.delta if delta is None else delta
    gamma = cfg.gamma if gamma is None else gamma
    if delta <= 0 or gamma <= 0 or delta + gamma <= 1:
        raise ParameterError(f"need delta, gamma > 0 and delta + gamma > 1, got {delta}, {gamma}")
    if cfg.rho_r <= 0:
        raise ParameterError("rho_r must be > 0")
    rho_k = cfg.rho(_user(cfg, user))
    snr = cfg.M_e * rho_k * (M ** (-delta) + M ** (1.0 - delta - gamma) * cfg.rho_jam / cfg.rho_r)
    return cfg.td_over_t * math.log2(1.0 + snr)


def defense_decodable_rate_delta(cfg: SystemConfig, M: float | None = None,
                                 delta: float | None = None, user: int = 0,
                                 conservative: bool = True) -> float:
    """Decodable rate under the pilot defense with delta-conjugate beamforming.

    ``conservative=True`` replaces the estimator gain by its floor
    ``rho_r / (rho_r + rho_jam + 1)`` and keeps the full interference
    ``rho_f``; this is the map inverted by :func:`mimosec.thresholds.v1_of_r`.
    Otherwise the exact gain :func:`defense_a` and interference
    ``M^-delta rho_f`` are used.
    """
    M = _M(cfg, M)
    delta = cfg.delta if delta is None else delta
    if not 0 <= delta < 1:
        raise ParameterError(f"need 0 <= delta < 1, got {delta}")
    if cfg.rho_r <= 0:
        raise ParameterError("rho_r must be > 0")
    k = _user(cfg, user)
    if conservative:
        gain = cfg.rho_r / (cfg.rho_r + cfg.rho_jam + 1.0)
        interference = cfg.rho_f
    else:
        gain = defense_a(cfg)
        interference = M ** (-delta) * cfg.rho_f
    sinr = M ** (1.0 - delta) * gain * cfg.rho(k) / (interference + cfg.rho_jam + 1.0)
    return cfg.td_over_t * math.log2(1.0 + sinr)
