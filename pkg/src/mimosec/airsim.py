"""Block-fading channels, orthogonal pilots and received-signal synthesis.

Every random draw is keyed by its own seed path, laid out as
``(component, block, draw-kind)`` by the callers, so switching the attack on
or off never changes the channel realization under the same master seed.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import AttackKind, AttackSpec, SeedPath, SystemConfig
from .errors import AttackMismatch, DimensionError

__all__ = [
    "cn",
    "BlockChannels",
    "PilotSet",
    "AssignmentPolicy",
    "PilotAssignment",
    "TrainingObservation",
    "DataObservation",
    "sample_block_channels",
    "build_orthogonal_pilots",
    "assign_pilots",
    "synth_training",
    "synth_data",
    "dump_complex",
    "load_complex",
]


def cn(rng: np.random.Generator, shape, var=1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with variance ``var``."""
    scale = np.sqrt(var / 2.0)
    z = rng.standard_normal(shape + (2,) if isinstance(shape, tuple) else (shape, 2))
    return scale * (z[..., 0] + 1j * z[..., 1])


@dataclass(frozen=True)
class BlockChannels:
    """Channel gains of one coherence block.

    Attributes
    ----------
    H : (K, M) complex
        BS-to-user gains, row ``k`` is user ``k``.
    H_e : (M_e, M) complex
        BS-to-adversary gains.
    H_jam : (K, M_e) complex
        Adversary-to-user gains.
    block : int
    """

    H: np.ndarray
    H_e: np.ndarray
    H_jam: np.ndarray
    block: int = 0


@dataclass(frozen=True)
class PilotSet:
    Phi: np.ndarray
    rho_r: float

    @property
    def L(self) -> int:
        return self.Phi.shape[0]

    @property
    def T_r(self) -> int:
        return self.Phi.shape[1]


class AssignmentPolicy(str, enum.Enum):
    STATIC = "static"
    RANDOM_PER_BLOCK = "random_per_block"


@dataclass(frozen=True)
class PilotAssignment:
    """Injective map user -> pilot row (both 0-based)."""

    pilot_of: tuple[int, ...]
    policy: AssignmentPolicy = AssignmentPolicy.STATIC
    hidden: bool = False

    def __post_init__(self):
        if len(set(self.pilot_of)) != len(self.pilot_of):
            raise ValueError(f"pilot assignment must be injective, got {self.pilot_of}")

    @property
    def K(self) -> int:
        return len(self.pilot_of)


@dataclass(frozen=True)
class TrainingObservation:
    """Received training signals of one block.

    ``noise`` keeps the BS noise draw ``W`` so that closed-form surrogates can
    be rebuilt from the same realization.  ``jammed`` is the pilot index set
    picked by a random-subset jammer (empty otherwise) and ``hits[k]`` tells
    whether user ``k``'s pilot is in it.
    """

    Y_tr: np.ndarray
    Z_tr: np.ndarray
    noise: np.ndarray
    jammed: tuple[int, ...]
    hits: tuple[bool, ...]
    target: int = 0

    @property
    def pi(self) -> bool:
        """Bernoulli hit indicator of the targeted user."""
        return self.hits[self.target]


@dataclass(frozen=True)
class DataObservation:
    """Data-phase signals: ``Y`` is (K, n), ``Z`` is (M_e, n), ``V_jam`` is (M_e, n)."""

    Y: np.ndarray
    Z: np.ndarray
    V_jam: np.ndarray


def sample_block_channels(cfg: SystemConfig, seed: SeedPath, M: int | None = None,
                          block: int = 0) -> BlockChannels:
    """Draw ``H``, ``H_e`` and ``H_jam`` with i.i.d. CN(0, 1) entries.

    Each matrix comes from its own child stream of ``seed``.
    """
    M = cfg.M if M is None else M
    H = cn(seed.child("H").rng(), (cfg.K, M))
    H_e = cn(seed.child("H_e").rng(), (cfg.M_e, M))
    H_jam = cn(seed.child("H_jam").rng(), (cfg.K, cfg.M_e))
    return BlockChannels(H=H, H_e=H_e, H_jam=H_jam, block=block)


def build_orthogonal_pilots(L: int, T_r: int, rho_r: float) -> PilotSet:
    """First ``L`` rows of the ``T_r``-point DFT basis scaled by ``sqrt(rho_r)``.

    Rows satisfy ``phi_k phi_l^* = T_r rho_r`` when ``k == l`` and 0 otherwise.
    """
    if L > T_r:
        raise DimensionError(f"cannot build {L} orthogonal pilots of length {T_r}", name="L")
    if L < 1:
        raise DimensionError("need at least one pilot", name="L")
    rows = np.arange(L)[:, None]
    cols = np.arange(T_r)[None, :]
    # integer product reduced mod T_r keeps the phase exact for long pilots
    phase = -2j * np.pi * ((rows * cols) % T_r) / T_r
    return PilotSet(Phi=np.sqrt(rho_r) * np.exp(phase), rho_r=float(rho_r))


def assign_pilots(policy: AssignmentPolicy | str, cfg: SystemConfig, seed: SeedPath | None = None,
                  hidden: bool | None = None) -> PilotAssignment:
    """Map users to pilots.

    ``STATIC`` maps user ``k`` to pilot ``k``.  ``RANDOM_PER_BLOCK`` draws a
    uniform injection of the ``K`` users into the ``L`` pilots from ``seed``
    (pass a per-block seed path to get a fresh draw every block).
    """
    policy = AssignmentPolicy(policy)
    if policy is AssignmentPolicy.STATIC:
        return PilotAssignment(tuple(range(cfg.K)), policy, bool(hidden))
    if seed is None:
        raise ValueError("random pilot assignment needs a seed path")
    picks = seed.rng().permutation(cfg.L)[: cfg.K]
    return PilotAssignment(tuple(int(p) for p in picks), policy,
                           True if hidden is None else bool(hidden))


def synth_training(cfg: SystemConfig, channels: BlockChannels, pilots: PilotSet,
                   assignment: PilotAssignment, attack: AttackSpec,
                   seed: SeedPath) -> TrainingObservation:
    """Training-phase signals at the BS and at the adversary.

    The BS sees ``sum_k H_k^T phi_k + jam + W``.  A pilot-matching adversary
    adds ``sqrt(rho_jam/rho_r) H_e^T phi_target`` from its first antenna; a
    random-subset adversary spreads ``rho_jam / J`` over ``J`` uniformly drawn
    pilots and all of its antennas.
    """
    attack.check(cfg)
    H, H_e, H_jam = channels.H, channels.H_e, channels.H_jam
    M = H.shape[1]
    if assignment.K != H.shape[0]:
        raise DimensionError(f"assignment covers {assignment.K} users, channels have {H.shape[0]}")
    if max(assignment.pilot_of) >= pilots.L:
        raise DimensionError("assignment refers to a pilot outside the pilot set")

    Phi_users = pilots.Phi[list(assignment.pilot_of)]
    W = cn(seed.child("W").rng(), (M, pilots.T_r))
    Y = H.T @ Phi_users + W

    jammed: tuple[int, ...] = ()
    rho_r = pilots.rho_r
    if attack.kind is AttackKind.PILOT_MATCHING:
        if assignment.hidden or attack.target >= assignment.K:
            raise AttackMismatch("pilot-matching needs the target's pilot to be known")
        if cfg.rho_jam > 0:
            phi_t = pilots.Phi[assignment.pilot_of[attack.target]]
            Y = Y + np.sqrt(cfg.rho_jam / rho_r) * np.outer(H_e[0], phi_t)
    elif attack.kind is AttackKind.RANDOM_SUBSET_JAM:
        J = attack.subset_size(cfg)
        picks = seed.child("jam_subset").rng().choice(pilots.L, size=J, replace=False)
        jammed = tuple(sorted(int(p) for p in picks))
        if cfg.rho_jam > 0:
            amp = np.sqrt(cfg.rho_jam / (cfg.M_e * J * rho_r))
            Y = Y + amp * np.outer(H_e.sum(axis=0), pilots.Phi[list(jammed)].sum(axis=0))

    W_e = cn(seed.child("W_e").rng(), (H_jam.shape[1], pilots.T_r))
    Z = H_jam.T @ Phi_users + W_e
    jam_set = set(jammed)
    hits = tuple(p in jam_set for p in assignment.pilot_of)
    return TrainingObservation(Y_tr=Y, Z_tr=Z, noise=W, jammed=jammed, hits=hits,
                               target=attack.target)


def synth_data(cfg: SystemConfig, channels: BlockChannels, X: np.ndarray, attack: AttackSpec,
               seed: SeedPath) -> DataObservation:
    """Data-phase signals ``Y_k = H_k X + H_jam,k V_jam + V_k`` and ``Z = H_e X + V_e``.

    ``X`` is (M, n).  ``V_jam ~ CN(0, rho_jam I_{M_e})`` per channel use and is
    omitted when the attack kind is ``NONE``.
    """
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != channels.H.shape[1]:
        raise DimensionError(f"X must be (M, n) with M={channels.H.shape[1]}, got {X.shape}")
    n = X.shape[1]
    K, M_e = channels.H_jam.shape
    V = cn(seed.child("V").rng(), (K, n))
    V_e = cn(seed.child("V_e").rng(), (M_e, n))
    if attack.kind.jams_data:
        V_jam = cn(seed.child("V_jam").rng(), (M_e, n), var=cfg.rho_jam)
    else:
        V_jam = np.zeros((M_e, n), dtype=complex)
    Y = channels.H @ X + channels.H_jam @ V_jam + V
    Z = channels.H_e @ X + V_e
    return DataObservation(Y=Y, Z=Z, V_jam=V_jam)


_MAGIC = b"MMSC"


def dump_complex(path, arr: np.ndarray) -> None:
    """Write a complex array as little-endian interleaved float64 re/im.

    Header: 4-byte magic, uint32 ndim, then one uint64 per dimension.
    """
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    with open(Path(path), "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(arr.astype("<c16").tobytes())


def load_complex(path) -> np.ndarray:
    with open(Path(path), "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path} is not an observation dump")
        (ndim,) = struct.unpack("<I", fh.read(4))
        shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
        data = np.frombuffer(fh.read(), dtype="<c16")
    return data.reshape(shape).astype(np.complex128)
