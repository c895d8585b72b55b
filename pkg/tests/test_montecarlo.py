import math

import mpmath as mp
import numpy as np
import pytest

from mimosec import analytics as an
from mimosec import montecarlo as mc
from mimosec.config import AttackKind, AttackSpec, SeedPath, validate
from mimosec.errors import ConvergenceError, ParameterError, RegimeMismatch
from mimosec.estimation import Regime


@pytest.fixture
def small():
    return validate(dict(M=64, M_e=1, K=2, T=100, T_r=10, rho_r=0.9, rho_users=1, rho_jam=1))


def test_estimate_from_samples():
    e = mc.McEstimate.from_samples("x", [1.0, 2.0, 3.0, 4.0], "s", target=2.0)
    assert e.estimate == 2.5
    assert e.stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert e.z == pytest.approx(0.5 / e.stderr)
    assert e.rel_error == 0.25 and e.passes()
    assert math.isnan(mc.McEstimate.from_samples("x", [1.0, 2.0], "s").z)
    with pytest.raises(ParameterError):
        mc.McEstimate.from_samples("x", [1.0], "s")
    assert mc.McEstimate("x", 1.0, 0.0, 5, "s", 1.0).z == 0.0
    assert mc.McEstimate("x", 2.0, 0.0, 5, "s", 1.0).z == math.inf


def test_run_trials_is_ordered_and_worker_independent():
    fn = lambda s: s.rng().standard_normal(3)
    root = SeedPath(5, ("t",))
    a = mc.run_trials(fn, root, 20, workers=1)
    b = mc.run_trials(fn, root, 20, workers=4)
    assert np.array_equal(a, b)
    assert np.array_equal(a[7], root.child(7).rng().standard_normal(3))
    assert mc.run_trials(fn, root, 0).shape == (0,)
    with pytest.raises(ParameterError):
        mc.run_trials(fn, root, -1)


def test_estimator_moments_no_jam(small, seed):
    out = mc.mc_estimator_moments(small, Regime.NO_JAM, 200, seed)
    assert set(out) >= {"second_moment", "hhat_conj_he_re", "hhat_conj_he_im"}
    for e in out.values():
        assert e.passes(), e
    assert out["second_moment"].target == pytest.approx(small.pilot_energy / (small.pilot_energy + 1))


@pytest.mark.parametrize("regime", [Regime.PILOT_MATCHING, Regime.RANDOM_SUBSET])
def test_estimator_moments_under_attack(small, seed, regime):
    cfg = small.with_(rho_r=1.0, J=2)
    for e in mc.mc_estimator_moments(cfg, regime, 200, seed).values():
        assert e.passes(), e


def test_sinr_terms_match_decomposition(seed):
    cfg = validate(dict(M=128, M_e=1, K=4, T=100, T_r=4, rho_r=2.25, rho_users=1, rho_jam=1))
    r = mc.mc_sinr(cfg, 128, 800, seed)
    ref = an.sinr_conjugate(cfg, 128)
    assert r.var_t0.target == pytest.approx(ref.var_t0)
    assert r.sinr.target == pytest.approx(ref.sinr)
    for e in r.estimates():
        assert e.passes(), e
    assert r.max_reconstruction_error < 1e-9


def test_leakage_symbol_power(small, seed):
    r = mc.mc_leakage(small, 64, 0.7, 2000, seed)
    assert r.symbol_power.target == pytest.approx(64 ** -0.7)
    assert r.inner_product.passes() and r.symbol_power.passes()
    assert 0.9 < r.ratio < 1.1


def test_lln_targets_and_bound(seed):
    cfg = validate(dict(M=100, M_e=1, K=2, T=100, T_r=10, rho_r=10, rho_users=1, rho_jam=1))
    (p,) = mc.mc_lln(cfg, [500], 100, seed)
    gamma, pi, alpha = an.lln_limits(cfg)
    # exact finite-M means
    assert p.v.target == pytest.approx(gamma / alpha + 1 / 500)
    assert p.w.target == pytest.approx(pi / alpha + 1 / 500)
    assert p.v.passes() and p.w.passes()
    assert p.bound_per_log2m == pytest.approx(p.bound.estimate / math.log2(500))


def test_distribution_identity(seed):
    cfg = validate(dict(M=64, M_e=1, K=2, T=100, T_r=10, rho_r=1, rho_users=1, rho_jam=1))
    rep = mc.mc_distribution_identity(cfg, 300, seed)
    assert len(rep.comparisons) == 18
    assert rep.passes(), [c for c in rep.comparisons if not c.passes()]
    assert rep[rep.comparisons[0].name] is rep.comparisons[0]


def _oracle_power(lam, M):
    # E[(lam - 1/Q)^+] for Q ~ Gamma(M, 1) via upper incomplete gamma functions
    mp.mp.dps = 30
    x = 1 / mp.mpf(lam)
    return lam * mp.gammainc(M, x, mp.inf, regularized=True) - mp.gammainc(M - 1, x, mp.inf) / mp.gamma(M)


@pytest.mark.parametrize("M", [2, 8, 64, 1024])
def test_waterfilling_level(M):
    w = mc.solve_waterfilling(M, 10.0, 1e-8)
    assert w.lam < w.bound
    assert abs(w.residual) <= 1e-8
    assert float(_oracle_power(w.lam, M)) == pytest.approx(10.0, abs=1e-8)
    q = np.array([0.5 / w.lam, 2 / w.lam])
    assert w.power(q)[0] == 0.0 and w.power(q)[1] == pytest.approx(w.lam / 2)


def test_waterfilling_capacity_trend():
    r10 = mc.solve_waterfilling(2 ** 10, 10.0, 1e-8, 0.99).dof_ratio
    r14 = mc.solve_waterfilling(2 ** 14, 10.0, 1e-8, 0.99).dof_ratio
    assert r10 > r14 > 0.99


def test_waterfilling_errors():
    with pytest.raises(ParameterError):
        mc.solve_waterfilling(1, 10.0)
    with pytest.raises(ParameterError):
        mc.solve_waterfilling(8, 0.0)
    with pytest.raises(ConvergenceError):
        mc.solve_waterfilling(8, 10.0, tolerance=1e-30, max_iter=3)


def test_end_to_end_no_attack_matches_closed_form(seed):
    cfg = validate(dict(M=64, M_e=1, K=2, T=20, T_r=4, rho_r=2.25, rho_users=1, rho_jam=1))
    rep = mc.mc_end_to_end(cfg, AttackSpec(), 600, seed)
    # the closed form is evaluated without jamming when nobody jams
    assert rep.analytic[0].rate == pytest.approx(an.rate_no_training_jamming(cfg.with_(rho_jam=0.0)).rate)
    for e in rep.decodable + rep.leakage:
        assert e.passes(), e
    assert rep.per_block.shape == (600, 2 * 7)


def test_end_to_end_worker_independent(seed):
    cfg = validate(dict(M=16, M_e=1, K=2, T=20, T_r=4, rho_r=2.25, rho_users=1, rho_jam=1))
    atk = AttackSpec(AttackKind.DATA_ONLY_JAM)
    a = mc.mc_end_to_end(cfg, atk, 20, seed, workers=1)
    b = mc.mc_end_to_end(cfg, atk, 20, seed, workers=3)
    assert np.array_equal(a.per_block, b.per_block)
    assert a.rate[0].estimate == b.rate[0].estimate


def test_end_to_end_defense_is_j_insensitive(seed):
    cfg = validate(dict(M=64, M_e=1, K=2, T=30, T_r=10, rho_r=1, rho_users=1, rho_jam=1, L=10))
    reps = [mc.mc_end_to_end(cfg, AttackSpec(AttackKind.RANDOM_SUBSET_JAM, 0, J=J), 300, seed,
                             randomized_pilots=True) for J in (1, 10)]
    a, b = reps[0].rate[0], reps[1].rate[0]
    assert abs(a.estimate - b.estimate) <= 4 * math.hypot(a.stderr, b.stderr)
    assert reps[0].analytic[0].rate == reps[1].analytic[0].rate


def test_end_to_end_guards(small, seed):
    with pytest.raises(RegimeMismatch):
        mc.mc_end_to_end(small, AttackSpec(AttackKind.PILOT_MATCHING), 5, seed, randomized_pilots=True)
    with pytest.raises(ParameterError):
        mc.mc_end_to_end(small, AttackSpec(), 1, seed)
    pm = mc.mc_end_to_end(small, AttackSpec(AttackKind.PILOT_MATCHING), 5, seed)
    assert pm.analytic is None
