"""Property-verification suites.

``formulas`` checks closed-form identities (round trips, degeneracies,
invariances, the water-filling bound) over a seeded random parameter sweep.
``statistics`` runs the Monte-Carlo experiments and gates every estimate
with a known target at ``|z| <= 4``.  Both are deterministic for a given
seed and independent of the worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import analytics as an
from . import montecarlo as mc
from . import thresholds as th
from .config import SeedPath, validate
from .estimation import Regime
from .io import ResultTable, config_hash

__all__ = ["Check", "VerifyReport", "run_verify", "SUITES"]

SUITES = ("formulas", "statistics", "all")


@dataclass(frozen=True)
class Check:
    """One verified property.

    ``metric`` is what gets compared with ``threshold``: a residual, a
    ``|z|`` score or a margin, depending on ``kind``.
    """

    suite: str
    name: str
    kind: str
    value: float
    target: float
    metric: float
    threshold: float
    passed: bool


@dataclass(frozen=True)
class VerifyReport:
    checks: tuple[Check, ...]
    seed: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def table(self) -> ResultTable:
        t = ResultTable(("suite", "check", "kind", "value", "target", "metric", "threshold", "passed"),
                        {"command": "verify", "seed": self.seed,
                         "config_hash": config_hash([c.name for c in self.checks])})
        for c in self.checks:
            t.add(c.suite, c.name, c.kind, c.value, c.target, c.metric, c.threshold, c.passed)
        return t


def _rel(a, b):
    return abs(a - b) / abs(b) if b else abs(a - b)


def _residual(suite, name, value, target, tol, relative=True):
    metric = _rel(value, target) if relative else abs(value - target)
    return Check(suite, name, "residual", float(value), float(target), float(metric), tol,
                 bool(metric <= tol))


def _at_most(suite, name, value, bound, slack=0.0):
    return Check(suite, name, "upper_bound", float(value), float(bound), float(value - bound),
                 slack, bool(value - bound <= slack))


def _z(suite, est: mc.McEstimate, gate=mc.Z_GATE, name=None):
    z = est.z
    return Check(suite, name or est.label, "z", est.estimate, est.target, abs(z), gate,
                 bool(abs(z) <= gate))


def _flag(suite, name, ok, value=math.nan, target=math.nan):
    return Check(suite, name, "property", float(value), float(target), 0.0 if ok else 1.0, 0.0, bool(ok))


def _sweep_cfgs(rng, n):
    """Random but valid configs for identity checks."""
    out = []
    for _ in range(n):
        K = int(rng.integers(1, 6))
        T_r = int(rng.integers(K, 4 * K + 1))
        T = T_r + int(rng.integers(1, 200))
        rho_r = float(rng.uniform(0.1, 20))
        out.append(validate(dict(
            M=int(rng.integers(2, 2000)), M_e=int(rng.integers(1, 9)), K=K, T=T, T_r=T_r,
            rho_r=rho_r, rho_users=list(rng.uniform(0.1, 5, K)),
            rho_jam=float(rng.uniform(0, rho_r)), delta=float(rng.uniform(0.05, 0.95)),
            gamma=float(rng.uniform(0.3, 2.0)), L=T_r, J=int(rng.integers(1, T_r + 1)),
        )))
    return out


def formula_checks(seed: int, sweep: int = 100) -> list[Check]:
    S = "formulas"
    rng = SeedPath(seed, ("verify", "sweep")).rng()
    cfgs = _sweep_cfgs(rng, sweep)
    eps = rng.uniform(0.005, 1.0, sweep)
    rates = rng.uniform(0.0, 3.0, (sweep, 5))
    out = []

    s_res = v_res = v1_res = s1_deg = s1_root = recomb = 0.0
    j_diff = 0.0
    for i, c in enumerate(cfgs):
        R = rates[i, : c.K]
        s = th.s_epsilon(c, eps[i])
        s_res = max(s_res, _rel(an.leakage_delta_conjugate(c, s.value, c.delta), eps[i]))
        v = th.v_of_r(c, R)
        if v.value > 0:
            k = v.argmax_user
            v_res = max(v_res, _rel(an.decodable_rate_delta(c, v.value, user=k), R[k]))
        v1 = th.v1_of_r(c, R)
        if v1.value > 0:
            k = v1.argmax_user
            v1_res = max(v1_res, _rel(an.defense_decodable_rate_delta(c, v1.value, user=k), R[k]))
        g1 = c.with_(gamma=1.0)
        s1_deg = max(s1_deg, _rel(th.s1_epsilon(g1, eps[i]).value, th.s_epsilon(g1, eps[i]).value))
        r = th.defense_secrecy_antennas(c, eps[i]) if c.delta + c.gamma > 1 else None
        if r is not None and math.isfinite(r.value):
            s1_root = max(s1_root, abs(r.residual) / eps[i])
        for k in range(c.K):
            for rep in (an.rate_no_training_jamming(c, user=k, warn=False), an.defense_rate(c, user=k)):
                recomb = max(recomb, _rel(rep.recombine(), rep.rate) if rep.rate else abs(rep.recombine()))
        base = an.defense_rate(c).rate
        for J in sorted({1, max(1, c.L // 2), c.L}):
            j_diff = max(j_diff, abs(an.defense_rate(c.with_(J=J)).rate - base))

    out += [
        _residual(S, "s_epsilon_round_trip", s_res, 0.0, 1e-9, relative=False),
        _residual(S, "v_of_r_round_trip", v_res, 0.0, 1e-9, relative=False),
        _residual(S, "v1_of_r_round_trip", v1_res, 0.0, 1e-9, relative=False),
        _residual(S, "s1_equals_s_when_gamma_1", s1_deg, 0.0, 1e-12, relative=False),
        _residual(S, "s1_exact_root_residual", s1_root, 0.0, 1e-9, relative=False),
        _residual(S, "rate_components_recombine", recomb, 0.0, 1e-12, relative=False),
        _residual(S, "defense_rate_j_invariance", j_diff, 0.0, 0.0, relative=False),
    ]

    fig3 = validate(dict(M=100, M_e=1, K=1, T=5, T_r=1, rho_r=1, rho_users=1, rho_jam=0, delta=0.7))
    out.append(_at_most(S, "fig3_s_0.05_at_most_100", th.s_epsilon(fig3, 0.05).value, 100.0))
    fig5 = validate(dict(M=200, M_e=1, K=5, T=300000, T_r=100000, rho_r=10, rho_users=1, rho_jam=1))
    out.append(_residual(S, "fig5_g_two_thirds", th.g_epsilon(fig5, 2 / 3).value, 17.64, 1e-9))
    pm = validate(dict(M=100, M_e=1, K=1, T=100, T_r=10, rho_r=10, rho_users=1, rho_jam=1))
    out.append(_residual(S, "pilot_matching_limit", an.pilot_matching_rate_limit(pm), math.log2(10), 1e-12))

    fig2 = validate(dict(M=1000, M_e=1, K=10, T=1000, T_r=10, rho_r=0.9, rho_users=1, rho_jam=1))
    ratios = [an.rate_no_training_jamming(fig2, 2.0 ** e).dof_ratio for e in (10, 14, 18)]
    gaps = [fig2.td_over_t - r for r in ratios]
    out.append(_flag(S, "dof_ratio_increases_to_td_over_t",
                     all(0 < gaps[i + 1] < gaps[i] for i in range(2)), ratios[-1], fig2.td_over_t))
    scaled = [g * e for g, e in zip(gaps, (10, 14, 18))]
    out.append(_residual(S, "dof_gap_times_log2m_constant", max(scaled) / min(scaled), 1.0, 0.02))

    for M in (2, 8, 64, 1024):
        w = mc.solve_waterfilling(M, 10.0, 1e-8, 0.99)
        out.append(_at_most(S, f"waterfilling_level_bound_M{M}", w.lam, w.bound))
        out.append(_at_most(S, f"waterfilling_power_residual_M{M}", abs(w.residual), 1e-8))
        x = 1.0 / w.lam
        closed = w.lam * stats.gamma(M).sf(x) - stats.gamma(M - 1).sf(x) / (M - 1) if M > 1 else math.nan
        out.append(_residual(S, f"waterfilling_quadrature_vs_closed_form_M{M}", closed, 10.0, 1e-8))
    caps = [mc.solve_waterfilling(M, 10.0, 1e-8, 0.99).dof_ratio for M in (2 ** 10, 2 ** 14)]
    out.append(_flag(S, "waterfilling_dof_ratio_decreasing", caps[0] > caps[1] > 0.99, caps[1], 0.99))
    return out


def statistic_checks(seed: int, trials: int | None = None, workers: int = 1) -> list[Check]:
    S = "statistics"
    root = SeedPath(seed, ("verify",))
    n = (lambda default: default if trials is None else trials)
    out = []

    sm = validate(dict(M=100, M_e=1, K=2, T=100, T_r=10, rho_r=0.9, rho_users=1, rho_jam=1))
    for e in mc.mc_estimator_moments(sm, Regime.NO_JAM, n(1000), root, workers=workers).values():
        out.append(_z(S, e, name=f"no_jam_{e.label}"))
    pm = sm.with_(rho_r=1.0)
    for e in mc.mc_estimator_moments(pm, Regime.PILOT_MATCHING, n(1000), root, workers=workers).values():
        out.append(_z(S, e, name=f"pilot_matching_{e.label}"))
    rs = sm.with_(rho_r=1.0, L=10, J=3)
    for e in mc.mc_estimator_moments(rs, Regime.RANDOM_SUBSET, n(1000), root, workers=workers).values():
        out.append(_z(S, e, name=f"random_subset_{e.label}"))

    sc = validate(dict(M=256, M_e=1, K=4, T=100, T_r=4, rho_r=2.25, rho_users=1, rho_jam=1))
    sinr = mc.mc_sinr(sc, 256, n(2000), root, workers=workers)
    for e in sinr.estimates():
        out.append(_z(S, e, name=f"sinr_{e.label}"))
    out.append(_at_most(S, "sinr_term_reconstruction", sinr.max_reconstruction_error, 1e-9))

    leak = mc.mc_leakage(sc.with_(M=100), 100, 0.7, n(4000), root, workers=workers)
    out.append(_z(S, leak.inner_product, name="leakage_inner_product"))
    out.append(_z(S, leak.symbol_power, name="leakage_symbol_power"))

    ident = mc.mc_distribution_identity(pm, n(1000), root, workers=workers)
    for c in ident.comparisons:
        out.append(Check(S, f"tilde_identity_{c.name}", "z", c.original, c.tilde, abs(c.z),
                         mc.Z_GATE, c.passes()))

    lln = pm.with_(rho_r=10.0)
    for p in mc.mc_lln(lln, [1000], n(200), root, workers=workers):
        out.append(_z(S, p.v, name=f"lln_v_M{p.M}"))
        out.append(_z(S, p.w, name=f"lln_w_M{p.M}"))

    q = SeedPath(seed, ("verify", "waterfilling_mc")).rng().gamma(8, size=n(1000) * 100)
    w = mc.solve_waterfilling(8, 10.0, 1e-10)
    est = mc.McEstimate.from_samples("waterfilling_mc_power_M8", w.power(q), "waterfilling_mc", 10.0)
    out.append(_z(S, est))
    return out


def run_verify(suite: str = "all", seed: int = 20240601, trials: int | None = None,
               workers: int = 1) -> VerifyReport:
    """Run a suite and collect every check."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")
    checks: list[Check] = []
    if suite in ("formulas", "all"):
        checks += formula_checks(seed)
    if suite in ("statistics", "all"):
        checks += statistic_checks(seed, trials, workers)
    return VerifyReport(tuple(checks), seed)
