import math

import numpy as np
import pytest

from mimosec.airsim import sample_block_channels
from mimosec.config import AttackKind, AttackSpec
from mimosec.errors import DegenerateEstimate, DimensionError
from mimosec.estimation import ChannelEstimate, Regime, mmse_coefficients
from mimosec.montecarlo import _train_block
from mimosec.precoding import audit_power, conjugate_precode, delta_conjugate_precode, sample_symbols


def _estimate(cfg, seed):
    rec = mmse_coefficients(cfg, Regime.NO_JAM)
    _, _, est = _train_block(cfg, AttackSpec(), rec, seed, cfg.M, False)
    return est


def test_symbols_have_requested_power(cfg, seed):
    c = cfg.with_(rho_users=[0.5, 1.0, 2.0, 4.0])
    s = sample_symbols(c, seed, n=50000)
    assert s.s.shape == (4, 50000)
    assert np.allclose(np.mean(np.abs(s.s) ** 2, axis=1), [0.5, 1, 2, 4], rtol=0.03)
    assert sample_symbols(c, seed).s.shape == (4, c.T_d)


def test_conjugate_is_delta_zero(cfg, seed):
    est = _estimate(cfg, seed)
    sym = sample_symbols(cfg, seed, 6)
    a = conjugate_precode(est, sym)
    b = delta_conjugate_precode(est, sym, 0.0)
    assert np.allclose(a.X, b.X)
    assert a.X.shape == (cfg.M, 6)
    expected = sum(np.outer(est.Hhat[k].conj(), sym.s[k]) / math.sqrt(cfg.M * est.alpha[k])
                   for k in range(cfg.K))
    assert np.allclose(a.X, expected)


def test_delta_scales_power(cfg, seed):
    est = _estimate(cfg, seed)
    sym = sample_symbols(cfg, seed, 6)
    a = conjugate_precode(est, sym)
    d = delta_conjugate_precode(est, sym, 0.5)
    assert np.allclose(d.X, a.X * cfg.M ** -0.25)
    with pytest.raises(ValueError):
        delta_conjugate_precode(est, sym, -0.1)


def test_power_budget_holds_on_average(cfg, seed):
    vals = []
    for i in range(300):
        s = seed.child(i)
        est = _estimate(cfg, s)
        x = delta_conjugate_precode(est, sample_symbols(cfg, s, 20), 0.3)
        rep = audit_power(x, cfg)
        vals.append(rep.total_power)
    budget = cfg.rho_f * cfg.M ** -0.3
    assert abs(np.mean(vals) - budget) < 4 * np.std(vals) / math.sqrt(len(vals))


def test_audit_flags_overdrive(cfg, seed):
    est = _estimate(cfg, seed)
    x = conjugate_precode(est, sample_symbols(cfg.with_(rho_users=4.0), seed, 2000))
    rep = audit_power(x, cfg)
    assert all(rep.user_flags) and rep.total_flag and not rep.ok


def test_degenerate_and_mismatched_inputs(cfg, seed):
    est = _estimate(cfg, seed)
    sym = sample_symbols(cfg, seed, 3)
    rec = mmse_coefficients(cfg, Regime.NO_JAM)
    bad = ChannelEstimate(est.Hhat, type(rec)(rec.regime, 0, rec.coefficients, rec.scale, (0.0,) * 4, rec.M))
    with pytest.raises(DegenerateEstimate):
        conjugate_precode(bad, sym)
    with pytest.raises(DimensionError):
        conjugate_precode(ChannelEstimate(est.Hhat[:2], rec), sym)
