import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mimosec import analytics as an
from mimosec import thresholds as th
from mimosec.config import validate
from mimosec.errors import EmptyGrid, ParameterError

mp.mp.dps = 40


def _fig3():
    return validate(dict(M=100, M_e=1, K=1, T=5, T_r=1, rho_r=1, rho_users=1, rho_jam=0, delta=0.7))


def _oracle_s(eps, delta, M_e, rho_max, T, T_d):
    return mp.power(M_e * mp.mpf(rho_max) / (mp.power(2, mp.mpf(T) * eps / T_d) - 1), 1 / mp.mpf(delta))


def test_s_epsilon_fig3_value():
    r = th.s_epsilon(_fig3(), 0.05)
    assert r.value == pytest.approx(float(_oracle_s(mp.mpf("0.05"), mp.mpf("0.7"), 1, 1, 5, 4)), rel=1e-12)
    assert r.value == pytest.approx(85.9164349324125, rel=1e-12)
    assert r.ceil == 86
    assert abs(r.residual) < 1e-12


def test_s_epsilon_decreases_in_epsilon():
    vals = [th.s_epsilon(_fig3(), e).value for e in np.linspace(0.01, 0.2, 20)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


@settings(max_examples=100, deadline=None)
@given(eps=st.floats(1e-3, 2.0), delta=st.floats(0.05, 2.0), M_e=st.integers(1, 16), rho=st.floats(0.05, 20))
def test_s_epsilon_round_trip(eps, delta, M_e, rho):
    cfg = validate(dict(M=10, M_e=M_e, K=1, T=5, T_r=1, rho_r=1, rho_users=rho, rho_jam=0))
    s = th.s_epsilon(cfg, eps, delta)
    assert an.leakage_delta_conjugate(cfg, s.value, delta) == pytest.approx(eps, rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(R=st.lists(st.floats(0.0, 3.0), min_size=3, max_size=3), delta=st.floats(0.05, 0.95),
       rho=st.lists(st.floats(0.1, 5.0), min_size=3, max_size=3))
def test_v_of_r_inverts_the_binding_user(R, delta, rho):
    cfg = validate(dict(M=10, M_e=1, K=3, T=50, T_r=10, rho_r=0.9, rho_users=rho, rho_jam=1))
    v = th.v_of_r(cfg, R, delta)
    k = v.argmax_user
    if v.value > 0:
        assert an.decodable_rate_delta(cfg, v.value, delta, user=k) == pytest.approx(R[k], rel=1e-9, abs=1e-12)
    # every other user decodes at least its target there
    for j in range(3):
        if v.value > 0:
            assert an.decodable_rate_delta(cfg, v.value, delta, user=j) >= R[j] * (1 - 1e-9) - 1e-12


def test_v_of_r_scalar_rate_equal_powers():
    cfg = validate(dict(M=10, M_e=1, K=10, T=50, T_r=10, rho_r=0.9, rho_users=1, rho_jam=1))
    v = th.v_of_r(cfg, 0.2, 0.5)
    ref = ((2 ** (0.2 / 0.8) - 1) * 12 / 0.9) ** 2
    assert v.value == pytest.approx(ref, rel=1e-12)
    assert v.argmax_user == 0
    with pytest.raises(ParameterError):
        th.v_of_r(cfg, -0.1, 0.5)
    with pytest.raises(ParameterError):
        th.v_of_r(cfg, 0.2, 1.0)


def _fig5():
    return validate(dict(M=200, M_e=1, K=5, T=300000, T_r=100000, rho_r=10, rho_users=1, rho_jam=1))


def test_g_two_thirds():
    g = th.g_epsilon(_fig5(), 2 / 3)
    assert g.value == pytest.approx(17.64, rel=1e-9)
    assert g.inputs["base"] == pytest.approx(17.64, rel=1e-12)
    assert g.ceil == 18


def test_g_needs_many_more_antennas_at_small_epsilon():
    # the G form needs about 589 antennas at eps = 0.3, not 200
    assert th.g_epsilon(_fig5(), 0.3).value == pytest.approx(588.84, rel=1e-4)
    vals = [th.g_epsilon(_fig5(), e).value for e in np.linspace(0.05, 0.65, 13)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_epsilon_for_antennas_inverts_g():
    cfg = _fig5()
    for eps in (0.1, 0.3, 2 / 3):
        assert th.epsilon_for_antennas(cfg, th.g_epsilon(cfg, eps).value) == pytest.approx(eps, rel=1e-12)
    with pytest.raises(ParameterError):
        th.epsilon_for_antennas(cfg, 1.0)


@settings(max_examples=100, deadline=None)
@given(eps=st.floats(1e-3, 1.0), delta=st.floats(0.05, 0.95), frac=st.floats(0.0, 1.0),
       rho_r=st.floats(0.1, 20))
def test_s1_reduces_to_s(eps, delta, frac, rho_r):
    cfg = validate(dict(M=10, M_e=2, K=2, T=10, T_r=2, rho_r=rho_r, rho_users=[0.5, 1.5],
                        rho_jam=frac * rho_r))
    s1 = th.s1_epsilon(cfg, eps, delta, 1.0).value
    assert s1 == pytest.approx(th.s_epsilon(cfg, eps, delta).value, rel=1e-12)


def test_s1_can_undershoot_and_exact_root_fixes_it():
    cfg = validate(dict(M=10, M_e=1, K=1, T=5, T_r=1, rho_r=1, rho_users=1, rho_jam=1))
    s1 = th.s1_epsilon(cfg, 0.05, 0.7, 1.0)
    assert s1.residual > 0
    exact = th.defense_secrecy_antennas(cfg, 0.05, 0.7, 1.0)
    assert exact.value > s1.value
    assert abs(exact.residual) < 1e-12
    assert an.defense_leakage_delta(cfg, exact.value, 0.7, 1.0) == pytest.approx(0.05, rel=1e-9)


def test_exact_root_below_s1():
    cfg = validate(dict(M=10, M_e=1, K=1, T=5, T_r=1, rho_r=1, rho_users=1, rho_jam=0.1))
    s1 = th.s1_epsilon(cfg, 0.05, 0.7, 0.5)
    exact = th.defense_secrecy_antennas(cfg, 0.05, 0.7, 0.5)
    assert exact.value < s1.value
    assert an.defense_leakage_delta(cfg, exact.value, 0.7, 0.5) == pytest.approx(0.05, rel=1e-9)


def test_s1_overflow_is_infinite():
    cfg = validate(dict(M=10, M_e=1, K=1, T=5, T_r=1, rho_r=1, rho_users=1, rho_jam=1))
    r = th.s1_epsilon(cfg, 0.01, 0.5, 0.5 + 1e-9)
    assert r.value == math.inf
    with pytest.raises(OverflowError):
        r.ceil
    with pytest.raises(ParameterError):
        th.s1_epsilon(cfg, 0.05, 0.5, 0.4)


def test_v1_round_trip():
    cfg = validate(dict(M=10, M_e=1, K=3, T=50, T_r=10, rho_r=2, rho_users=[1, 2, 3], rho_jam=1))
    R = [0.3, 0.1, 0.2]
    v1 = th.v1_of_r(cfg, R, 0.4)
    k = v1.argmax_user
    assert an.defense_decodable_rate_delta(cfg, v1.value, 0.4, user=k) == pytest.approx(R[k], rel=1e-9)
    assert abs(v1.residual) < 1e-12


def test_optimize_delta():
    cfg = validate(dict(M=100, M_e=1, K=10, T=50, T_r=10, rho_r=0.9, rho_users=1, rho_jam=1))
    grid = np.round(np.arange(0.05, 0.96, 0.01), 2)
    best, value = th.optimize_delta(cfg, 0.2, 0.05, grid[::-1])
    objective = [max(th.v_of_r(cfg, 0.2, d).value, th.s_epsilon(cfg, 0.05, d).value) for d in grid]
    assert value == min(objective)
    assert best == grid[int(np.argmin(objective))]
    # frozen: these powers put the optimum at 0.77 with about 57 antennas
    assert best == pytest.approx(0.77)
    assert value == pytest.approx(57.312735086408495, rel=1e-12)
    with pytest.raises(EmptyGrid):
        th.optimize_delta(cfg, 0.2, 0.05, [])
    with pytest.raises(ParameterError):
        th.optimize_delta(cfg, 0.2, 0.05, [0.0, 0.5])


def test_optimize_delta_with_zero_rate_picks_largest_delta():
    cfg = validate(dict(M=100, M_e=1, K=1, T=50, T_r=10, rho_r=0.9, rho_users=1, rho_jam=1))
    # R = 0 makes V vanish and S decreases in delta
    assert th.optimize_delta(cfg, 0.0, 0.05, [0.9, 0.5, 0.5, 0.7])[0] == 0.9


def test_epsilon_must_be_positive():
    with pytest.raises(ParameterError):
        th.s_epsilon(_fig3(), 0.0)
    with pytest.raises(ParameterError):
        th.g_epsilon(_fig5(), -1.0)
