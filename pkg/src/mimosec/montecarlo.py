"""Monte-Carlo experiments that check the closed forms.

Every experiment draws independent trials whose seeds are derived from
``(seed, trial index, draw kind)``.  Trials may run on a thread pool, but
results are always reduced in trial order, so estimates are bit-identical
for any worker count.
"""

from __future__ import annotations

import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, stats

from . import analytics as an
from .airsim import (AssignmentPolicy, assign_pilots, build_orthogonal_pilots,
                     sample_block_channels, synth_data, synth_training)
from .config import AttackKind, AttackSpec, SeedPath, SystemConfig
from .errors import ConvergenceError, ParameterError, RegimeMismatch
from .estimation import (Regime, construct_tilde_channel, estimate_channels, mmse_coefficients,
                         regime_for)
from .precoding import conjugate_precode, delta_conjugate_precode, sample_symbols

__all__ = [
    "McEstimate",
    "run_trials",
    "mc_estimator_moments",
    "SinrExperiment",
    "mc_sinr",
    "LeakageExperiment",
    "mc_leakage",
    "LlnPoint",
    "mc_lln",
    "MomentComparison",
    "IdentityReport",
    "mc_distribution_identity",
    "WaterfillingSolution",
    "solve_waterfilling",
    "EndToEndReport",
    "mc_end_to_end",
]

Z_GATE = 4.0


@dataclass(frozen=True)
class McEstimate:
    """Monte-Carlo mean with its standard error and analytic target.

    ``stderr`` is the sample standard deviation over ``sqrt(trials)`` (or a
    delta-method equivalent for derived ratios).
    """

    label: str
    estimate: float
    stderr: float
    trials: int
    seed: str
    target: float | None = None

    def __post_init__(self):
        if self.trials < 2:
            raise ParameterError(f"an estimate needs at least 2 trials, got {self.trials}")

    @classmethod
    def from_samples(cls, label, samples, seed, target=None) -> "McEstimate":
        x = np.asarray(samples, dtype=float)
        n = x.size
        if n < 2:
            raise ParameterError(f"an estimate needs at least 2 trials, got {n}")
        return cls(label, float(x.mean()), float(x.std(ddof=1) / math.sqrt(n)), n, str(seed),
                   None if target is None else float(target))

    @property
    def z(self) -> float:
        if self.target is None:
            return math.nan
        diff = self.estimate - self.target
        if self.stderr == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / self.stderr

    @property
    def rel_error(self) -> float:
        if self.target is None or self.target == 0:
            return math.nan
        return abs(self.estimate - self.target) / abs(self.target)

    def passes(self, gate: float = Z_GATE) -> bool:
        return self.target is None or abs(self.z) <= gate


def run_trials(fn: Callable[[SeedPath], np.ndarray], seed: SeedPath, trials: int,
               workers: int = 1) -> np.ndarray:
    """Evaluate ``fn(seed.child(i))`` for ``i < trials`` and stack the results in order."""
    if trials < 0:
        raise ParameterError(f"trials must be >= 0, got {trials}")
    paths = [seed.child(i) for i in range(trials)]
    if workers > 1 and trials > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(fn, paths))
    else:
        out = [fn(p) for p in paths]
    if not out:
        return np.zeros((0,))
    return np.stack([np.asarray(o) for o in out])


def _min_trials(trials, minimum=2):
    if trials < minimum:
        raise ParameterError(f"need at least {minimum} trials, got {trials}")


@functools.lru_cache(maxsize=32)
def _pilots(L, T_r, rho_r):
    return build_orthogonal_pilots(L, T_r, rho_r)


def _attack_for(regime: Regime, target: int, J=None) -> AttackSpec:
    kind = {Regime.NO_JAM: AttackKind.NONE, Regime.PILOT_MATCHING: AttackKind.PILOT_MATCHING,
            Regime.RANDOM_SUBSET: AttackKind.RANDOM_SUBSET_JAM}[regime]
    return AttackSpec(kind, target, J)


def _train_block(cfg, attack, record, seed, M, randomize):
    channels = sample_block_channels(cfg, seed, M=M)
    pilots = _pilots(cfg.L, cfg.T_r, cfg.rho_r)
    if randomize:
        assignment = assign_pilots(AssignmentPolicy.RANDOM_PER_BLOCK, cfg, seed.child("assign"))
    else:
        assignment = assign_pilots(AssignmentPolicy.STATIC, cfg)
    obs = synth_training(cfg, channels, pilots, assignment, attack, seed.child("train"))
    est = estimate_channels(obs, pilots, assignment, record)
    return channels, obs, est


# estimator moments ---------------------------------------------------------

def mc_estimator_moments(cfg: SystemConfig, regime: Regime | str, trials: int, seed: SeedPath,
                         target: int = 0, M: int | None = None,
                         workers: int = 1) -> dict[str, McEstimate]:
    """Per-antenna moments of the estimate, averaged over antennas within a block.

    Returns ``second_moment`` (``E|Hhat_km|^2``), ``hhat_conj_he_re/_im``
    (``E[Hhat_km^* H_em]`` against the first adversary antenna) and
    ``users_cross_re/_im`` (``E[Hhat_km Hhat_lm^*]`` for the next user),
    each with its analytic target.
    """
    _min_trials(trials)
    regime = Regime(regime)
    M = cfg.M if M is None else M
    record = mmse_coefficients(cfg, regime, target, M=M)
    attack = _attack_for(regime, target)
    randomize = regime is Regime.RANDOM_SUBSET
    k = target
    l = (k + 1) % cfg.K
    has_e = cfg.M_e > 0
    seed = seed.child("estimator_moments", regime.value)

    def trial(s):
        ch, _, est = _train_block(cfg, attack, record, s, M, randomize)
        hk = est.Hhat[k]
        cross_e = np.mean(hk.conj() * ch.H_e[0]) if has_e else 0j
        cross_u = np.mean(hk * est.Hhat[l].conj()) if cfg.K > 1 else 0j
        return np.array([np.mean(np.abs(hk) ** 2), cross_e.real, cross_e.imag,
                         cross_u.real, cross_u.imag])

    x = run_trials(trial, seed, trials, workers)
    c = record.coefficients
    if regime is Regime.NO_JAM:
        t_cross_e = 0.0
        t_cross_u = 0.0
    elif regime is Regime.PILOT_MATCHING:
        t_cross_e = c["b"]
        t_cross_u = 0.0
    else:
        J, L = c["J"], cfg.L
        t_cross_e = c["x1"] * (J / L) * math.sqrt(cfg.T_r * cfg.rho_jam / (cfg.M_e * J))
        both = J * (J - 1) / (L * (L - 1)) if L > 1 else 0.0
        t_cross_u = c["x1"] ** 2 * cfg.T_r * cfg.rho_jam / J * both
    names = [("second_moment", record.alpha[k]), ("hhat_conj_he_re", t_cross_e),
             ("hhat_conj_he_im", 0.0), ("users_cross_re", t_cross_u), ("users_cross_im", 0.0)]
    out = {}
    for i, (name, tgt) in enumerate(names):
        if name.startswith("hhat_conj_he") and not has_e:
            continue
        if name.startswith("users_cross") and cfg.K < 2:
            continue
        out[name] = McEstimate.from_samples(name, x[:, i], seed, tgt)
    return out


# SINR decomposition --------------------------------------------------------

@dataclass(frozen=True)
class SinrExperiment:
    """Empirical variance decomposition of one user's received samples."""

    var_t0: McEstimate
    var_t1: McEstimate
    var_t2: McEstimate
    var_t3: McEstimate
    sinr: McEstimate
    max_reconstruction_error: float

    def estimates(self) -> list[McEstimate]:
        return [self.var_t0, self.var_t1, self.var_t2, self.var_t3, self.sinr]


def _influence_estimate(label, value, psi, seed, target):
    n = psi.shape[0]
    se = float(np.std(psi, ddof=1) / math.sqrt(n))
    return McEstimate(label, float(value), se, n, str(seed), None if target is None else float(target))


def mc_sinr(cfg: SystemConfig, M: int | None, trials: int, seed: SeedPath, user: int = 0,
            uses: int = 4, workers: int = 1) -> SinrExperiment:
    """Split user ``k``'s received sample into the four terms and estimate their variances.

    Per block the BS estimates the channels from silent-adversary training,
    conjugate-precodes ``uses`` symbols per user and the data phase carries
    jamming at ``rho_jam``.  With ``g = H_k Hhat_k^* / sqrt(M alpha_k)``:

    * ``T0 = E[g] s_k`` (coherent part; its variance uses the pooled mean gain)
    * ``T1 = (g - E[g]) s_k`` (centred on the pooled mean in a second pass)
    * ``T2 = sum_{j != k} H_k Hhat_j^* s_j / sqrt(M alpha_j)``
    * ``T3 = H_jam,k V_jam + V_k``

    Standard errors of the derived ratios come from the delta method.
    """
    _min_trials(trials)
    M = cfg.M if M is None else M
    record = mmse_coefficients(cfg, Regime.NO_JAM, M=M)
    attack_train = AttackSpec(AttackKind.NONE)
    attack_data = AttackSpec(AttackKind.DATA_ONLY_JAM if cfg.rho_jam > 0 else AttackKind.NONE)
    k = user
    seed = seed.child("sinr")

    def trial(s):
        ch, _, est = _train_block(cfg, attack_train, record, s, M, False)
        sym = sample_symbols(cfg, s.child("sym"), n=uses)
        x_in = conjugate_precode(est, sym)
        data = synth_data(cfg, ch, x_in.X, attack_data, s.child("data"))
        norm = np.sqrt(M * est.alpha)
        gains = (ch.H[k] @ est.Hhat.conj().T) / norm
        g = gains[k]
        others = np.delete(np.arange(cfg.K), k)
        t2 = gains[others] @ sym.s[others]
        t3 = data.Y[k] - ch.H[k] @ x_in.X
        recon = np.max(np.abs(data.Y[k] - (g * sym.s[k] + t2 + t3)))
        p = np.mean(np.abs(sym.s[k]) ** 2)
        return np.array([g.real, g.imag, p, abs(g) ** 2 * p, np.mean(np.abs(t2) ** 2),
                         np.mean(np.abs(t3) ** 2), recon])

    x = run_trials(trial, seed, trials, workers)
    g = x[:, 0] + 1j * x[:, 1]
    p, v2, v3 = x[:, 2], x[:, 4], x[:, 5]
    gb, pb = g.mean(), p.mean()
    g2 = abs(gb) ** 2
    dg = 2.0 * np.real(np.conj(gb) * (g - gb))
    var0 = g2 * pb
    psi0 = g2 * (p - pb) + pb * dg
    dev = np.abs(g - gb) ** 2 * p
    var1 = dev.mean()
    psi1 = dev - var1
    var2, psi2 = v2.mean(), v2 - v2.mean()
    var3, psi3 = v3.mean(), v3 - v3.mean()
    den = var1 + var2 + var3
    sinr = var0 / den
    psi_s = (psi0 - sinr * (psi1 + psi2 + psi3)) / den

    ref = an.sinr_conjugate(cfg, M, k)
    t3_target = cfg.rho_jam * cfg.M_e + 1.0
    ref_sinr = ref.var_t0 / (ref.var_t1 + ref.var_t2 + t3_target)
    return SinrExperiment(
        var_t0=_influence_estimate("var_t0", var0, psi0, seed, ref.var_t0),
        var_t1=_influence_estimate("var_t1", var1, psi1, seed, ref.var_t1),
        var_t2=_influence_estimate("var_t2", var2, psi2, seed, ref.var_t2),
        var_t3=_influence_estimate("var_t3", var3, psi3, seed, t3_target),
        sinr=_influence_estimate("sinr", sinr, psi_s, seed, ref_sinr),
        max_reconstruction_error=float(x[:, 6].max()),
    )


# leakage ------------------------------------------------------------------

@dataclass(frozen=True)
class LeakageExperiment:
    """``inner_product``: ``(1/M)|Hhat_k H_e1^*|^2`` against ``alpha_k``.
    ``symbol_power``: adversary power of user ``k``'s symbol under delta-conjugate
    beamforming against ``M_e rho_k / M^delta``.
    """

    inner_product: McEstimate | None
    symbol_power: McEstimate

    @property
    def ratio(self) -> float:
        """Empirical symbol power over its target."""
        t = self.symbol_power.target
        return self.symbol_power.estimate / t if t else math.nan


def mc_leakage(cfg: SystemConfig, M: int | None, delta: float, trials: int, seed: SeedPath,
               user: int = 0, uses: int = 4, workers: int = 1) -> LeakageExperiment:
    """Adversary-side moments with silent-adversary training."""
    _min_trials(trials)
    M = cfg.M if M is None else M
    record = mmse_coefficients(cfg, Regime.NO_JAM, M=M)
    attack = AttackSpec(AttackKind.NONE)
    k = user
    seed = seed.child("leakage")

    def trial(s):
        ch, _, est = _train_block(cfg, attack, record, s, M, False)
        sym = sample_symbols(cfg, s.child("sym"), n=uses)
        hk = est.Hhat[k]
        if cfg.M_e == 0:
            return np.array([0.0, 0.0])
        inner = abs(hk @ ch.H_e[0].conj()) ** 2 / M
        w = hk.conj() / math.sqrt(M ** (1.0 + delta) * est.alpha[k])
        received = np.outer(ch.H_e @ w, sym.s[k])
        return np.array([inner, np.mean(np.sum(np.abs(received) ** 2, axis=0))])

    x = run_trials(trial, seed, trials, workers)
    inner = None
    if cfg.M_e > 0:
        inner = McEstimate.from_samples("inner_product", x[:, 0], seed, record.alpha[k])
    power = McEstimate.from_samples("symbol_power", x[:, 1], seed,
                                    cfg.M_e * cfg.rho(k) * M ** (-delta))
    return LeakageExperiment(inner, power)


# law of large numbers -----------------------------------------------------

@dataclass(frozen=True)
class LlnPoint:
    """Pilot-matching statistics at one antenna count.

    ``bound`` estimates ``T_d/T E[[log2(1/M + rho v) - log2(1/M + rho w)]^+]``
    and carries the large-``M`` limit ``T_d/T [log2(rho_r/rho_jam)]^+`` as its
    target; at finite ``M`` the two differ, so its z-score is informative only.
    ``k_m`` is ``||H_e Hhat_k^*||^2 / M^2``, a diagnostic without a target.
    The targets of ``v`` and ``w`` are their exact finite-``M`` means, the
    limits plus ``1/M``.
    """

    M: int
    stats: an.LlnStats
    v: McEstimate
    w: McEstimate
    k_m: McEstimate
    bound: McEstimate

    @property
    def bound_per_log2m(self) -> float:
        return self.bound.estimate / math.log2(self.M)


def mc_lln(cfg: SystemConfig, M_grid: Sequence[int], trials: int, seed: SeedPath,
           target: int = 0, workers: int = 1) -> list[LlnPoint]:
    """Sample ``v_k``, ``w_k`` and the rate bound under pilot matching for each ``M``."""
    _min_trials(trials)
    if cfg.M_e < 1:
        raise ParameterError("pilot matching needs M_e >= 1")
    attack = AttackSpec(AttackKind.PILOT_MATCHING, target)
    gamma_k, pi_k, alpha_k = an.lln_limits(cfg)
    limit = cfg.td_over_t * an.pilot_matching_rate_limit(cfg)
    rho_k = cfg.rho(target)
    points = []
    for M in M_grid:
        M = int(M)
        record = mmse_coefficients(cfg, Regime.PILOT_MATCHING, target, M=M)
        base = seed.child("lln", M)

        def trial(s, M=M, record=record):
            ch, _, est = _train_block(cfg, attack, record, s, M, False)
            hk = est.Hhat[target]
            tilde = construct_tilde_channel(ch, record, s.child("tilde"))
            a = record.alpha[target]
            v = abs(ch.H[target] @ hk.conj()) ** 2 / (a * M * M)
            w = abs(ch.H[target] @ tilde.conj()) ** 2 / (a * M * M)
            km = np.sum(np.abs(ch.H_e @ hk.conj()) ** 2) / (M * M)
            return np.array([v, w, km, an.matched_rate_bound_sample(v, w, rho_k, M)])

        x = run_trials(trial, base, trials, workers)
        stats_ = an.LlnStats(M=M, v=x[:, 0].copy(), w=x[:, 1].copy(), gamma_k=gamma_k,
                             pi_k=pi_k, alpha_k=alpha_k)
        points.append(LlnPoint(
            M=M,
            stats=stats_,
            v=McEstimate.from_samples("v", x[:, 0], base, stats_.v_limit + 1.0 / M),
            w=McEstimate.from_samples("w", x[:, 1], base, stats_.w_limit + 1.0 / M),
            k_m=McEstimate.from_samples("K_M", x[:, 2], base),
            bound=McEstimate.from_samples("bound", cfg.td_over_t * x[:, 3], base,
                                          limit if math.isfinite(limit) else None),
        ))
    return points


# distribution identity ----------------------------------------------------

@dataclass(frozen=True)
class MomentComparison:
    """One moment of ``(H_e, Hhat_k)`` next to the same moment of ``(H_k, Htilde_k)``.

    ``z`` uses the standard error of the per-block difference, which accounts
    for both pairs sharing ``H_k``.
    """

    name: str
    original: float
    tilde: float
    z: float
    stderr: float

    def passes(self, gate: float = Z_GATE) -> bool:
        return abs(self.z) <= gate


@dataclass(frozen=True)
class IdentityReport:
    comparisons: tuple[MomentComparison, ...]
    trials: int
    samples: int
    seed: str
    expected_cross: float
    expected_second: float

    @property
    def max_abs_z(self) -> float:
        return max(abs(c.z) for c in self.comparisons)

    def passes(self, gate: float = Z_GATE) -> bool:
        return all(c.passes(gate) for c in self.comparisons)

    def __getitem__(self, name) -> MomentComparison:
        for c in self.comparisons:
            if c.name == name:
                return c
        raise KeyError(name)


_MOMENTS = ("mean_x", "mean_y", "abs2_x", "abs2_y", "x_conj_y", "y_conj_x", "x_y", "x_x", "y_y")


def _moment_row(X, Y):
    vals = [X.mean(), Y.mean(), np.mean(np.abs(X) ** 2), np.mean(np.abs(Y) ** 2),
            np.mean(X.conj() * Y), np.mean(Y.conj() * X), np.mean(X * Y), np.mean(X * X),
            np.mean(Y * Y)]
    out = []
    for v in vals:
        out.extend([np.real(v), np.imag(v)])
    return out


def mc_distribution_identity(cfg: SystemConfig, trials: int, seed: SeedPath, target: int = 0,
                             workers: int = 1) -> IdentityReport:
    """Compare first and second moments, pseudo-moments included, of the two pairs.

    Each block yields ``M`` per-antenna samples of ``(H_e1, Hhat_k)`` and of
    ``(H_k, Htilde_k)``; moments are averaged over antennas within a block.
    """
    _min_trials(trials)
    if cfg.M_e < 1:
        raise ParameterError("pilot matching needs M_e >= 1")
    record = mmse_coefficients(cfg, Regime.PILOT_MATCHING, target)
    attack = AttackSpec(AttackKind.PILOT_MATCHING, target)
    seed = seed.child("identity")

    def trial(s):
        ch, _, est = _train_block(cfg, attack, record, s, cfg.M, False)
        tilde = construct_tilde_channel(ch, record, s.child("tilde"))
        first = _moment_row(ch.H_e[0], est.Hhat[target])
        second = _moment_row(ch.H[target], tilde)
        return np.array(first + second)

    x = run_trials(trial, seed, trials, workers)
    half = x.shape[1] // 2
    comps = []
    for i in range(half):
        name = _MOMENTS[i // 2] + ("_re" if i % 2 == 0 else "_im")
        d = x[:, i] - x[:, half + i]
        se = float(d.std(ddof=1) / math.sqrt(trials))
        mean_d = float(d.mean())
        z = 0.0 if se == 0 and mean_d == 0 else (mean_d / se if se > 0 else math.inf)
        comps.append(MomentComparison(name, float(x[:, i].mean()), float(x[:, half + i].mean()), z, se))
    c = record.coefficients
    return IdentityReport(tuple(comps), trials, trials * cfg.M, str(seed), c["b"],
                          c["a"] ** 2 + c["b"] ** 2 + c["c"] ** 2)


# water-filling ------------------------------------------------------------

@dataclass(frozen=True)
class WaterfillingSolution:
    """Water level ``lam`` of ``P(q) = (lam - 1/q)^+`` with ``E[P(Q)] = rho_f``.

    ``Q`` is Gamma(M, 1), the squared norm of an M-antenna CN(0, I) channel.
    ``capacity`` is ``T_d/T E[log2(1 + P(Q) Q)]``.
    """

    lam: float
    residual: float
    capacity: float
    M: int
    rho_f: float
    td_over_t: float
    iterations: int

    @property
    def bound(self) -> float:
        """Upper bound ``rho_f + 1/(M-1)`` on the water level."""
        return self.rho_f + 1.0 / (self.M - 1)

    @property
    def dof_ratio(self) -> float:
        return self.capacity / math.log2(self.M)

    def power(self, q):
        q = np.asarray(q, dtype=float)
        with np.errstate(divide="ignore"):
            return np.maximum(0.0, self.lam - 1.0 / q)


_QUAD_TAIL = 1e-17


def _gamma_integral(f, M, lower):
    """``int_lower^inf f(q) Gamma(M,1).pdf(q) dq`` by adaptive quadrature.

    The upper limit sits where the tail mass drops below ``1e-17``; the
    mode is passed as a breakpoint so the peak is never stepped over.
    """
    dist = stats.gamma(M)
    hi = dist.isf(_QUAD_TAIL)
    lo = max(lower, dist.ppf(_QUAD_TAIL))
    if lo >= hi:
        return 0.0
    mode = M - 1.0
    pts = [mode] if lo < mode < hi else None
    val, _ = integrate.quad(lambda q: f(q) * dist.pdf(q), lo, hi, points=pts,
                            epsabs=0.0, epsrel=1e-12, limit=500)
    return val


def _expected_power(lam, M):
    if lam <= 0:
        return 0.0
    return _gamma_integral(lambda q: lam - 1.0 / q, M, 1.0 / lam)


def solve_waterfilling(M: int, rho_f: float, tolerance: float = 1e-8, td_over_t: float = 1.0,
                       max_iter: int = 200) -> WaterfillingSolution:
    """Bisection on ``lam -> E[(lam - 1/Q)^+]`` until it matches ``rho_f`` within ``tolerance``.

    The bracket is ``[0, rho_f + 1/(M-1)]``: by Jensen
    ``E[(lam - 1/Q)^+] >= lam - E[1/Q] = lam - 1/(M-1)``.

    Raises
    ------
    ConvergenceError
        If ``max_iter`` halvings do not reach the tolerance.
    """
    if M < 2:
        raise ParameterError(f"water-filling needs M >= 2, got {M}")
    if rho_f <= 0:
        raise ParameterError(f"rho_f must be > 0, got {rho_f}")
    lo, hi = 0.0, rho_f + 1.0 / (M - 1)
    for it in range(1, max_iter + 1):
        lam = 0.5 * (lo + hi)
        resid = _expected_power(lam, M) - rho_f
        if abs(resid) <= tolerance:
            break
        if resid < 0:
            lo = lam
        else:
            hi = lam
    else:
        raise ConvergenceError(f"bisection did not reach {tolerance} in {max_iter} steps")
    cap = _gamma_integral(lambda q: math.log2(lam * q), M, 1.0 / lam)
    return WaterfillingSolution(lam=lam, residual=resid, capacity=td_over_t * cap, M=M,
                                rho_f=rho_f, td_over_t=td_over_t, iterations=it)


# end to end ---------------------------------------------------------------

@dataclass(frozen=True)
class EndToEndReport:
    """Empirical per-user rates from full block simulations.

    The decodable rate uses the SINR of the received samples split into the
    coherent part ``E[g_kk] s_k`` (``g_kj`` is the realized beamforming gain
    from user ``j``'s beam to user ``k``) and everything else: gain
    uncertainty, cross-user interference and the observed jamming plus noise
    ``Y_k - H_k X``.  The leakage
    uses the adversary's mean beamforming gain for the user's symbol,
    ``rho_k ||H_e Hhat_k^*||^2 / (M^(1+delta) alpha_k)``.  ``analytic`` holds the
    matching closed form where one exists.
    """

    attack: AttackSpec
    randomized_pilots: bool
    delta: float
    M: int
    blocks: int
    decodable: tuple[McEstimate, ...]
    leakage: tuple[McEstimate, ...]
    rate: tuple[McEstimate, ...]
    reports: tuple[an.RateReport, ...]
    analytic: tuple[an.RateReport, ...] | None
    per_block: np.ndarray = field(repr=False)


def _jackknife(fn, cols):
    """Value of ``fn`` at the column means and its jackknife standard error."""
    n = cols.shape[0]
    tot = cols.sum(axis=0)
    full = fn(tot / n)[0]
    loo = fn((tot[None, :] - cols) / (n - 1))
    se = math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return float(full), se


def _analytic(cfg, attack, randomize, delta, M):
    ceff = cfg if attack.kind.jams_data else cfg.with_(rho_jam=0.0)
    out = []
    for k in range(cfg.K):
        if attack.kind is AttackKind.PILOT_MATCHING:
            return None
        if attack.kind is AttackKind.RANDOM_SUBSET_JAM:
            if delta != 0:
                return None
            out.append(an.defense_rate(cfg, M, k))
        elif delta == 0:
            out.append(an.rate_no_training_jamming(ceff, M, k, warn=False))
        else:
            dec = an.decodable_rate_delta(ceff, M, delta, k, conservative=False)
            leak = (an.leakage_delta_conjugate(ceff, M, delta, k) if ceff.M_e > 0 else 0.0)
            sinr = 2.0 ** (dec / ceff.td_over_t) - 1.0
            out.append(an.RateReport(rate=dec - leak, decodable=dec, leakage=leak, sinr=sinr,
                                     leak_snr=ceff.M_e * ceff.rho(k) * M ** (-delta),
                                     td_over_t=ceff.td_over_t, M=M, user=k,
                                     formula="delta_conjugate", clamped=False))
    return tuple(out)


def mc_end_to_end(cfg: SystemConfig, attack: AttackSpec, blocks: int, seed: SeedPath,
                  randomized_pilots: bool = False, delta: float | None = None,
                  uses: int = 8, workers: int = 1) -> EndToEndReport:
    """Run ``blocks`` coherence blocks through training, estimation, precoding and data.

    ``randomized_pilots`` turns on the defense: a fresh hidden pilot
    assignment every block.  The BS estimator matches the attack regime.
    Random-subset rates are clamped at zero, the others are not.
    """
    _min_trials(blocks)
    attack = attack.check(cfg)
    delta = cfg.delta if delta is None else delta
    M = cfg.M
    regime = regime_for(attack)
    if regime is Regime.PILOT_MATCHING and randomized_pilots:
        raise RegimeMismatch("pilot matching needs the static assignment it targets")
    record = mmse_coefficients(cfg, regime, attack.target, M=M, J=attack.subset_size(cfg))
    train_attack = attack if attack.kind.jams_training else AttackSpec(AttackKind.NONE, attack.target)
    K = cfg.K
    rho = np.asarray(cfg.rho_users)
    seed = seed.child("end_to_end")

    def trial(s):
        ch, _, est = _train_block(cfg, train_attack, record, s, M, randomized_pilots)
        sym = sample_symbols(cfg, s.child("sym"), n=uses)
        x_in = (conjugate_precode(est, sym) if delta == 0
                else delta_conjugate_precode(est, sym, delta))
        data = synth_data(cfg, ch, x_in.X, attack, s.child("data"))
        W = est.Hhat.conj().T / np.sqrt(M ** (1.0 + delta) * est.alpha)
        G = ch.H @ W
        g = np.diag(G)
        p = np.mean(np.abs(sym.s) ** 2, axis=1)
        interf = np.mean(np.abs(G @ sym.s - g[:, None] * sym.s) ** 2, axis=1)
        resid = np.mean(np.abs(data.Y - ch.H @ x_in.X) ** 2, axis=1)
        if cfg.M_e > 0:
            leak = rho * np.sum(np.abs(ch.H_e @ W) ** 2, axis=0)
        else:
            leak = np.zeros(K)
        return np.column_stack([g.real, g.imag, p, np.abs(g) ** 2 * p, interf, resid, leak]).ravel()

    x = run_trials(trial, seed, blocks, workers)
    td = cfg.td_over_t
    clamped = attack.kind is AttackKind.RANDOM_SUBSET_JAM
    dec_est, leak_est, rate_est, reports = [], [], [], []
    analytic = _analytic(cfg, attack, randomized_pilots, delta, M)

    x3 = x.reshape(blocks, K, 7)
    for k in range(K):
        cols = x3[:, k, :]

        def sinr_of(m):
            m = np.atleast_2d(m)
            sig = (m[:, 0] ** 2 + m[:, 1] ** 2) * m[:, 2]
            return sig / (m[:, 3] - sig + m[:, 4] + m[:, 5])

        def dec_of(m):
            # few blocks can give a negative noise estimate; that shows up as nan
            with np.errstate(invalid="ignore"):
                return td * np.log2(1.0 + sinr_of(m))

        def leak_of(m):
            return td * np.log2(1.0 + np.atleast_2d(m)[:, 6])

        def rate_of(m):
            d = dec_of(m) - leak_of(m)
            return np.maximum(0.0, d) if clamped else d

        ref = analytic[k] if analytic else None
        d, dse = _jackknife(dec_of, cols)
        lk, lse = _jackknife(leak_of, cols)
        r, rse = _jackknife(rate_of, cols)
        dec_est.append(McEstimate(f"decodable_{k}", d, dse, blocks, str(seed),
                                  ref.decodable if ref else None))
        leak_est.append(McEstimate(f"leakage_{k}", lk, lse, blocks, str(seed),
                                   ref.leakage if ref else None))
        rate_est.append(McEstimate(f"rate_{k}", r, rse, blocks, str(seed),
                                   ref.rate if ref else None))
        sinr = float(sinr_of(cols.mean(axis=0))[0])
        lsnr = float(cols[:, 6].mean())
        reports.append(an.RateReport(rate=r, decodable=d, leakage=lk, sinr=sinr, leak_snr=lsnr,
                                     td_over_t=td, M=M, user=k,
                                     formula=f"empirical:{attack.kind.value}", clamped=clamped))

    return EndToEndReport(attack=attack, randomized_pilots=randomized_pilots, delta=delta, M=M,
                          blocks=blocks, decodable=tuple(dec_est), leakage=tuple(leak_est),
                          rate=tuple(rate_est), reports=tuple(reports), analytic=analytic,
                          per_block=x)
