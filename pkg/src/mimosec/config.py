"""System parameters, adversary description and deterministic seed paths.

Everything here is immutable once built.  Symbols follow the usual massive
MIMO notation: ``M`` BS antennas, ``M_e`` adversary antennas, ``K`` users,
a block of ``T`` channel uses split into ``T_r`` training and ``T_d`` data
uses.  All powers are linear (noise power is 1).
"""

from __future__ import annotations

import enum
import hashlib
import math
import struct
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import DimensionError, ViolatedInvariant

__all__ = [
    "SystemConfig",
    "AttackKind",
    "AttackSpec",
    "SeedPath",
    "validate",
    "derive_seed",
]

_INT_FIELDS = ("M", "M_e", "K", "T", "T_r", "L", "J")


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of one single-cell TDD downlink scenario.

    Build instances through :func:`validate`; the constructor itself does
    not check anything.
    """

    M: int
    M_e: int
    K: int
    T: int
    T_r: int
    rho_r: float
    rho_users: tuple[float, ...]
    rho_jam: float
    delta: float = 0.0
    gamma: float = 1.0
    L: int = 0
    J: int = 1

    @property
    def T_d(self) -> int:
        return self.T - self.T_r

    @property
    def td_over_t(self) -> float:
        return self.T_d / self.T

    @property
    def rho_f(self) -> float:
        return math.fsum(self.rho_users)

    @property
    def rho_max(self) -> float:
        return max(self.rho_users)

    @property
    def rho_min(self) -> float:
        return min(self.rho_users)

    @property
    def pilot_energy(self) -> float:
        """Training energy per user, ``rho_r * T_r``."""
        return self.rho_r * self.T_r

    def rho(self, k: int) -> float:
        return self.rho_users[k]

    def with_(self, **changes) -> "SystemConfig":
        """Return a validated copy with some fields replaced."""
        return validate(replace(self, **changes))

    def as_dict(self) -> dict[str, Any]:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["rho_users"] = list(self.rho_users)
        return d


def _as_count(name, value, minimum=1):
    if isinstance(value, bool) or value is None:
        raise ViolatedInvariant(name, f"{name} must be an integer, got {value!r}")
    if isinstance(value, float):
        if not value.is_integer():
            raise ViolatedInvariant(name, f"{name} must be an integer, got {value!r}")
        value = int(value)
    try:
        value = int(value)
    except (TypeError, ValueError):
        raise ViolatedInvariant(name, f"{name} must be an integer, got {value!r}") from None
    if value < minimum:
        raise ViolatedInvariant(name, f"{name} must be >= {minimum}, got {value}")
    return value


def _as_power(name, value):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ViolatedInvariant(name, f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(value) or value < 0:
        raise ViolatedInvariant(name, f"{name} must be finite and >= 0, got {value}")
    return value


def validate(raw: Mapping[str, Any] | SystemConfig) -> SystemConfig:
    """Check a raw parameter mapping and return a normalized config.

    Required keys are ``M, M_e, K, T, T_r, rho_r, rho_users, rho_jam``.
    ``delta`` defaults to 0, ``gamma`` to 1, ``L`` to ``K`` and ``J`` to 1.
    A declared ``rho_f`` is accepted only if it equals the sum of
    ``rho_users``.  ``M_e = 0`` is allowed and describes a scenario with no
    eavesdropping antennas.

    Raises
    ------
    DimensionError
        If the pilot set does not fit in the training window (``L > T_r``).
    ViolatedInvariant
        For any other failed constraint; ``err.name`` names it.
    """
    if isinstance(raw, SystemConfig):
        raw = {f.name: getattr(raw, f.name) for f in fields(raw)}
    else:
        raw = dict(raw)

    missing = [k for k in ("M", "M_e", "K", "T", "T_r", "rho_r", "rho_users", "rho_jam")
               if k not in raw]
    if missing:
        raise ViolatedInvariant(missing[0], f"missing parameter(s): {', '.join(missing)}")

    M = _as_count("M", raw["M"])
    M_e = _as_count("M_e", raw["M_e"], minimum=0)
    K = _as_count("K", raw["K"])
    T = _as_count("T", raw["T"])
    T_r = _as_count("T_r", raw["T_r"])
    if T_r >= T:
        raise ViolatedInvariant("T_d", f"T_d = T - T_r must be >= 1 (T={T}, T_r={T_r})")

    rho_users = raw["rho_users"]
    if np.isscalar(rho_users):
        rho_users = [rho_users] * K
    rho_users = tuple(_as_power("rho_users", r) for r in rho_users)
    if len(rho_users) != K:
        raise ViolatedInvariant("rho_users", f"expected {K} user powers, got {len(rho_users)}")
    rho_f = math.fsum(rho_users)
    declared = raw.get("rho_f")
    if declared is not None and not math.isclose(float(declared), rho_f, rel_tol=1e-12, abs_tol=1e-12):
        raise ViolatedInvariant("rho_f", f"declared rho_f={declared} != sum(rho_users)={rho_f}")

    rho_r = _as_power("rho_r", raw["rho_r"])
    rho_jam = _as_power("rho_jam", raw["rho_jam"])

    delta = float(raw.get("delta", 0.0))
    if not math.isfinite(delta) or delta < 0:
        raise ViolatedInvariant("delta", f"delta must be >= 0, got {delta}")
    gamma = float(raw.get("gamma", 1.0))
    if not math.isfinite(gamma) or gamma <= 0:
        raise ViolatedInvariant("gamma", f"gamma must be > 0, got {gamma}")

    L = raw.get("L") or K
    L = _as_count("L", L)
    if L < K:
        raise ViolatedInvariant("L", f"need K <= L, got K={K}, L={L}")
    if L > T_r:
        raise DimensionError(f"{L} orthogonal pilots do not fit in T_r={T_r} uses", name="L")
    J = _as_count("J", raw.get("J", 1))
    if J > L:
        raise ViolatedInvariant("J", f"need 1 <= J <= L, got J={J}, L={L}")

    return SystemConfig(M=M, M_e=M_e, K=K, T=T, T_r=T_r, rho_r=rho_r, rho_users=rho_users,
                        rho_jam=rho_jam, delta=delta, gamma=gamma, L=L, J=J)


class AttackKind(str, enum.Enum):
    NONE = "none"
    DATA_ONLY_JAM = "data_only_jam"
    PILOT_MATCHING = "pilot_matching"
    RANDOM_SUBSET_JAM = "random_subset_jam"

    @property
    def jams_data(self) -> bool:
        return self is not AttackKind.NONE

    @property
    def jams_training(self) -> bool:
        return self in (AttackKind.PILOT_MATCHING, AttackKind.RANDOM_SUBSET_JAM)


@dataclass(frozen=True)
class AttackSpec:
    """Adversary behaviour for a simulation.

    ``target`` is a 0-based user index.  For :attr:`AttackKind.RANDOM_SUBSET_JAM`
    ``J`` overrides ``cfg.J`` when given.  The jamming power is always
    ``cfg.rho_jam``.
    """

    kind: AttackKind = AttackKind.NONE
    target: int = 0
    J: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))

    def subset_size(self, cfg: SystemConfig) -> int:
        return cfg.J if self.J is None else self.J

    def check(self, cfg: SystemConfig) -> "AttackSpec":
        if not 0 <= self.target < cfg.K:
            raise ViolatedInvariant("target", f"target user {self.target} outside [0, {cfg.K})")
        if self.kind is AttackKind.RANDOM_SUBSET_JAM:
            J = self.subset_size(cfg)
            if not 1 <= J <= cfg.L:
                raise ViolatedInvariant("J", f"need 1 <= J <= L, got J={J}, L={cfg.L}")
        if self.kind.jams_training and cfg.M_e < 1:
            raise ViolatedInvariant("M_e", "training-phase jamming needs at least one adversary antenna")
        return self


def _encode_label(label) -> bytes:
    if isinstance(label, (bool, np.bool_)):
        raise TypeError("seed path labels must be str or int")
    if isinstance(label, (int, np.integer)):
        return b"i" + str(int(label)).encode()
    if isinstance(label, str):
        return b"s" + label.encode("utf-8")
    raise TypeError(f"seed path labels must be str or int, got {type(label).__name__}")


def derive_seed(path: "SeedPath") -> int:
    """Mix a master seed and a label path into a 64-bit substream seed.

    BLAKE2b over a length-prefixed encoding of the path, so the result does
    not depend on platform, process or execution order.
    """
    h = hashlib.blake2b(digest_size=8, person=b"mimosec-seed")
    h.update(struct.pack("<Q", path.master & 0xFFFFFFFFFFFFFFFF))
    for label in path.path:
        enc = _encode_label(label)
        h.update(struct.pack("<I", len(enc)))
        h.update(enc)
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class SeedPath:
    """A master seed plus a label path naming one random substream."""

    master: int
    path: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "master", int(self.master) & 0xFFFFFFFFFFFFFFFF)
        object.__setattr__(self, "path", tuple(self.path))
        for label in self.path:
            _encode_label(label)

    def child(self, *labels) -> "SeedPath":
        return SeedPath(self.master, self.path + labels)

    @property
    def seed(self) -> int:
        return derive_seed(self)

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed))

    def __str__(self):
        return f"{self.master}:" + "/".join(str(p) for p in self.path)
