"""Conjugate and delta-conjugate beamforming plus power bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .airsim import cn
from .config import SeedPath, SystemConfig
from .errors import DegenerateEstimate, DimensionError
from .estimation import ChannelEstimate

__all__ = [
    "SymbolBlock",
    "ChannelInput",
    "PowerReport",
    "sample_symbols",
    "conjugate_precode",
    "delta_conjugate_precode",
    "audit_power",
]


@dataclass(frozen=True)
class SymbolBlock:
    """Per-user data symbols, ``s`` is (K, n) for n data channel uses."""

    s: np.ndarray
    rho: tuple[float, ...]

    def __add__(self, other: "SymbolBlock") -> "SymbolBlock":
        return SymbolBlock(self.s + other.s, self.rho)


@dataclass(frozen=True)
class ChannelInput:
    X: np.ndarray
    kind: str
    delta: float
    symbols: SymbolBlock | None = None

    def power(self) -> np.ndarray:
        """Squared norm of ``X`` at each channel use."""
        return np.sum(np.abs(self.X) ** 2, axis=0)


@dataclass(frozen=True)
class PowerReport:
    user_power: np.ndarray
    user_stderr: np.ndarray
    total_power: float
    total_stderr: float
    user_flags: tuple[bool, ...]
    total_flag: bool

    @property
    def ok(self) -> bool:
        return not (any(self.user_flags) or self.total_flag)


def sample_symbols(cfg: SystemConfig, seed: SeedPath, n: int | None = None) -> SymbolBlock:
    """Gaussian stand-ins for codeword symbols: user ``k`` draws CN(0, rho_k).

    ``n`` defaults to ``T_d``.  Each user has its own substream.
    """
    n = cfg.T_d if n is None else n
    s = np.vstack([cn(seed.child("s", k).rng(), n, var=r) for k, r in enumerate(cfg.rho_users)])
    return SymbolBlock(s=s, rho=cfg.rho_users)


def _precode(estimate: ChannelEstimate, symbols: SymbolBlock, exponent: float, kind, delta):
    Hhat = estimate.Hhat
    K, M = Hhat.shape
    if symbols.s.shape[0] != K:
        raise DimensionError(f"{symbols.s.shape[0]} symbol streams for {K} estimated users")
    alpha = estimate.alpha
    if np.any(alpha <= 0):
        raise DegenerateEstimate(f"estimate second moment must be positive, got {alpha}")
    weights = Hhat.conj().T / np.sqrt(float(M) ** exponent * alpha)
    return ChannelInput(X=weights @ symbols.s, kind=kind, delta=delta, symbols=symbols)


def conjugate_precode(estimate: ChannelEstimate, symbols: SymbolBlock) -> ChannelInput:
    """``X = sum_k s_k Hhat_k^* / sqrt(M alpha_k)``."""
    return _precode(estimate, symbols, 1.0, "conjugate", 0.0)


def delta_conjugate_precode(estimate: ChannelEstimate, symbols: SymbolBlock,
                            delta: float) -> ChannelInput:
    """``X = sum_k s_k Hhat_k^* / sqrt(M^(1+delta) alpha_k)``.

    Spends ``M^-delta`` of the conjugate power; ``delta = 0`` is plain
    conjugate beamforming.
    """
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    return _precode(estimate, symbols, 1.0 + delta, "delta_conjugate", float(delta))


def audit_power(channel_input: ChannelInput, cfg: SystemConfig, n_sigma: float = 3.0) -> PowerReport:
    """Average per-user symbol power and average ``||X||^2`` against budgets.

    A budget counts as violated when the empirical average exceeds it by more
    than ``n_sigma`` standard errors.  The total budget is ``rho_f M^-delta``.
    """
    X = channel_input.X
    n = X.shape[1]
    total = channel_input.power()
    total_mean = float(total.mean()) if n else 0.0
    total_se = float(total.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    M = X.shape[0]
    budget = cfg.rho_f * float(M) ** (-channel_input.delta)
    total_flag = total_mean - budget > n_sigma * total_se and total_mean > budget * (1 + 1e-12)

    if channel_input.symbols is None:
        up = np.zeros(0)
        use = np.zeros(0)
        flags: tuple[bool, ...] = ()
    else:
        p = np.abs(channel_input.symbols.s) ** 2
        up = p.mean(axis=1) if n else np.zeros(p.shape[0])
        use = p.std(axis=1, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(p.shape[0])
        rho = np.asarray(cfg.rho_users)
        flags = tuple(bool(f) for f in (up - rho > n_sigma * use) & (up > rho * (1 + 1e-12)))
    return PowerReport(user_power=up, user_stderr=use, total_power=total_mean,
                       total_stderr=total_se, user_flags=flags, total_flag=bool(total_flag))
