"""MMSE channel estimation from orthogonal pilots.

The BS projects the training signal on each user's pilot and rescales it.
For every adversary regime the scaling is the one that makes the estimate
equal, in distribution, to its closed-form coefficient expression:

* no training jamming: ``a H_k + b V_k``
* pilot matching on user k: ``a H_k + b H_e + c V_k`` for the target,
  ``d H_l + e V_l`` for everybody else
* random pilot subset: ``x1 (sqrt(T_r rho_r) H_k + Pi sqrt(T_r rho_jam / (M_e J)) sum_n H_e,n + V_k)``

The BS is assumed to know the jamming statistics (genie MMSE).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .airsim import BlockChannels, PilotAssignment, PilotSet, TrainingObservation, cn
from .config import AttackKind, AttackSpec, SeedPath, SystemConfig
from .errors import DimensionError, ParameterError, RegimeMismatch

__all__ = [
    "Regime",
    "regime_for",
    "CoefficientRecord",
    "ChannelEstimate",
    "mmse_coefficients",
    "estimate_channels",
    "surrogate_estimate",
    "construct_tilde_channel",
]


class Regime(str, enum.Enum):
    NO_JAM = "no_jam"
    PILOT_MATCHING = "pilot_matching"
    RANDOM_SUBSET = "random_subset"


def regime_for(attack: AttackSpec) -> Regime:
    if attack.kind is AttackKind.PILOT_MATCHING:
        return Regime.PILOT_MATCHING
    if attack.kind is AttackKind.RANDOM_SUBSET_JAM:
        return Regime.RANDOM_SUBSET
    return Regime.NO_JAM


@dataclass(frozen=True)
class CoefficientRecord:
    """Closed-form description of the estimator in force.

    Attributes
    ----------
    regime : Regime
    target : int
        Attacked user (0-based); meaningful for the jamming regimes.
    coefficients : mapping
        ``a, b`` (no jamming), ``a, b, c, d, e`` (pilot matching) or
        ``x1, p_hit, a_rate`` (random subset).
    scale : tuple of float
        Per-user factor applied to the unit-noise projection of the pilot.
    alpha : tuple of float
        Per-user, per-antenna second moment ``E|Hhat_km|^2``.  For the
        random-subset regime it is averaged over the hit indicator.
    alpha_given_hit : float or None
        Random-subset only: ``E|Hhat_km|^2`` conditioned on a hit, which is
        ``1/M`` (so that ``E||Hhat_k||^2 = 1``).
    mismatched : bool
        True when the BS scales as if nobody jammed the training.
    """

    regime: Regime
    target: int
    coefficients: Mapping[str, float]
    scale: tuple[float, ...]
    alpha: tuple[float, ...]
    M: int
    alpha_given_hit: float | None = None
    mismatched: bool = False

    def __getitem__(self, name):
        return self.coefficients[name]

    @property
    def K(self) -> int:
        return len(self.scale)


@dataclass(frozen=True)
class ChannelEstimate:
    Hhat: np.ndarray
    record: CoefficientRecord
    hits: tuple[bool, ...] = field(default=())

    @property
    def alpha(self) -> np.ndarray:
        return np.asarray(self.record.alpha)

    @property
    def pi(self) -> bool | None:
        if not self.hits:
            return None
        return self.hits[self.record.target]


def _no_jam_ab(E):
    return E / (E + 1.0), math.sqrt(E) / (E + 1.0)


def mmse_coefficients(cfg: SystemConfig, regime: Regime | str, target: int = 0,
                      M: int | None = None, J: int | None = None,
                      mismatched: bool = False) -> CoefficientRecord:
    """Estimator coefficients for ``regime`` under ``cfg``.

    ``E = T_r rho_r`` is the per-user pilot energy.  Pilot matching uses
    ``D = E + 1 + T_r rho_jam``; random subset uses ``J`` pilots out of ``L``
    (``J`` defaults to ``cfg.J``).
    """
    regime = Regime(regime)
    M = cfg.M if M is None else M
    E = cfg.pilot_energy
    if E <= 0:
        raise ParameterError("channel estimation needs rho_r * T_r > 0")
    K = cfg.K
    Ej = cfg.T_r * cfg.rho_jam
    a0, b0 = _no_jam_ab(E)
    mm = float(mismatched)

    if regime is Regime.NO_JAM:
        coeffs = {"a": a0, "b": b0}
        scale = (b0,) * K
        alpha = (a0,) * K
        return CoefficientRecord(regime, target, MappingProxyType(coeffs), scale, alpha, M,
                                 mismatched=mismatched)

    if not 0 <= target < K:
        raise ParameterError(f"target {target} outside [0, {K})")

    if regime is Regime.PILOT_MATCHING:
        D = E + 1.0 + Ej
        coeffs = {
            "a": E / D,
            "b": cfg.T_r * math.sqrt(cfg.rho_r * cfg.rho_jam) / D,
            "c": math.sqrt(E) / D,
            "d": a0,
            "e": b0,
            "D": D,
        }
        scale = [b0] * K
        alpha = [a0] * K
        if mismatched:
            alpha[target] = b0 * b0 * D
        else:
            scale[target] = coeffs["c"]
            alpha[target] = E / D
        return CoefficientRecord(regime, target, MappingProxyType(coeffs), tuple(scale),
                                 tuple(alpha), M, mismatched=mismatched)

    J = cfg.J if J is None else J
    if not 1 <= J <= cfg.L:
        raise ParameterError(f"need 1 <= J <= L, got J={J}, L={cfg.L}")
    hit_var = E + 1.0 + Ej / J
    mix_var = E + 1.0 + Ej / cfg.L
    x1 = 1.0 / (math.sqrt(M) * math.sqrt(hit_var))
    coeffs = {"x1": x1, "p_hit": J / cfg.L, "a_rate": E / mix_var, "J": J}
    s = b0 if mismatched else x1
    return CoefficientRecord(regime, target, MappingProxyType(coeffs), (s,) * K,
                             (s * s * mix_var,) * K, M,
                             alpha_given_hit=s * s * hit_var, mismatched=mismatched)


def _unit_projection(Y_tr, pilots: PilotSet, assignment: PilotAssignment):
    Phi = pilots.Phi[list(assignment.pilot_of)]
    E = pilots.T_r * pilots.rho_r
    return (Y_tr @ Phi.conj().T) / math.sqrt(E)


def _check(record: CoefficientRecord, assignment: PilotAssignment, M: int):
    if record.K != assignment.K:
        raise RegimeMismatch(f"record covers {record.K} users, assignment {assignment.K}")
    if record.regime is Regime.PILOT_MATCHING and assignment.hidden:
        raise RegimeMismatch("pilot-matching record with a hidden pilot assignment")
    if record.regime is Regime.RANDOM_SUBSET and record.M != M:
        raise RegimeMismatch(f"record normalized for M={record.M}, signal has M={M}")


def estimate_channels(Y_tr: np.ndarray | TrainingObservation, pilots: PilotSet,
                      assignment: PilotAssignment, record: CoefficientRecord) -> ChannelEstimate:
    """Project the training signal on each assigned pilot and rescale it."""
    hits: tuple[bool, ...] = ()
    if isinstance(Y_tr, TrainingObservation):
        hits = Y_tr.hits
        Y_tr = Y_tr.Y_tr
    if Y_tr.ndim != 2 or Y_tr.shape[1] != pilots.T_r:
        raise DimensionError(f"Y_tr must be (M, {pilots.T_r}), got {Y_tr.shape}")
    _check(record, assignment, Y_tr.shape[0])
    y = _unit_projection(Y_tr, pilots, assignment)
    Hhat = (y * np.asarray(record.scale)).T
    return ChannelEstimate(Hhat=Hhat, record=record, hits=hits)


def surrogate_estimate(cfg: SystemConfig, channels: BlockChannels, obs: TrainingObservation,
                       pilots: PilotSet, assignment: PilotAssignment,
                       record: CoefficientRecord) -> np.ndarray:
    """Coefficient-form estimate rebuilt from the same channel and noise draws.

    Used to check that :func:`estimate_channels` really produces the closed
    forms listed in the module docstring.
    """
    Phi = pilots.Phi[list(assignment.pilot_of)]
    V = ((obs.noise @ Phi.conj().T) / math.sqrt(pilots.T_r * pilots.rho_r)).T
    H, H_e = channels.H, channels.H_e
    c = record.coefficients
    out = np.empty_like(H)
    if record.mismatched:
        raise RegimeMismatch("no closed-form surrogate for the mismatched estimator")
    if record.regime is Regime.NO_JAM:
        return c["a"] * H + c["b"] * V
    if record.regime is Regime.PILOT_MATCHING:
        for k in range(H.shape[0]):
            if k == record.target:
                out[k] = c["a"] * H[k] + c["b"] * H_e[0] + c["c"] * V[k]
            else:
                out[k] = c["d"] * H[k] + c["e"] * V[k]
        return out
    J = c["J"]
    jam = math.sqrt(cfg.T_r * cfg.rho_jam / (cfg.M_e * J)) * H_e.sum(axis=0)
    for k in range(H.shape[0]):
        out[k] = c["x1"] * (math.sqrt(cfg.pilot_energy) * H[k] + obs.hits[k] * jam + V[k])
    return out


def construct_tilde_channel(channels: BlockChannels, record: CoefficientRecord,
                            seed: SeedPath) -> np.ndarray:
    """``b H_k + a H_e + c V`` for the pilot-matching target, with fresh ``V``.

    Swapping the roles of ``H_k`` and ``H_e`` in the target's estimate gives a
    vector whose joint law with ``H_k`` matches that of ``Hhat_k`` with ``H_e``.
    """
    if record.regime is not Regime.PILOT_MATCHING:
        raise RegimeMismatch(f"tilde channel needs a pilot-matching record, got {record.regime.value}")
    c = record.coefficients
    k = record.target
    H_k = channels.H[k]
    V = cn(seed.child("V_tilde").rng(), H_k.shape[0])
    return c["b"] * H_k + c["a"] * channels.H_e[0] + c["c"] * V
