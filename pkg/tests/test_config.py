import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mimosec.config import AttackKind, AttackSpec, SeedPath, SystemConfig, derive_seed, validate
from mimosec.errors import DimensionError, ViolatedInvariant


def test_valid_config_derived_quantities(base_raw):
    cfg = validate(dict(base_raw, L=4))
    assert cfg.T_d == 16
    assert cfg.td_over_t == 16 / 20
    assert cfg.rho_f == 4.0
    assert cfg.rho_users == (1.0,) * 4
    assert cfg.pilot_energy == 9.0
    assert (cfg.delta, cfg.gamma, cfg.L, cfg.J) == (0.0, 1.0, 4, 1)


def test_pilot_set_larger_than_training_window(base_raw):
    with pytest.raises(DimensionError) as err:
        validate(dict(base_raw, L=5))
    assert err.value.name == "L"


@pytest.mark.parametrize("change, name", [
    (dict(T_r=20), "T_d"),
    (dict(K=0), "K"),
    (dict(M=0), "M"),
    (dict(M=2.5), "M"),
    (dict(rho_jam=-1.0), "rho_jam"),
    (dict(rho_r=math.nan), "rho_r"),
    (dict(rho_users=[1.0, 1.0]), "rho_users"),
    (dict(rho_f=5.0), "rho_f"),
    (dict(L=3), "L"),
    (dict(J=5), "J"),
    (dict(gamma=0.0), "gamma"),
    (dict(delta=-0.1), "delta"),
])
def test_invariant_violations_name_the_invariant(base_raw, change, name):
    with pytest.raises(ViolatedInvariant) as err:
        validate(dict(base_raw, **change))
    assert err.value.name == name


def test_missing_key(base_raw):
    del base_raw["rho_jam"]
    with pytest.raises(ViolatedInvariant):
        validate(base_raw)


def test_declared_rho_f_must_match(base_raw):
    assert validate(dict(base_raw, rho_f=4.0)).rho_f == 4.0


def test_eavesdropper_free_config_is_allowed(base_raw):
    assert validate(dict(base_raw, M_e=0)).M_e == 0


def test_unequal_powers_and_extremes(base_raw):
    cfg = validate(dict(base_raw, rho_users=[0.5, 2.0, 1.0, 1.5]))
    assert cfg.rho_max == 2.0 and cfg.rho_min == 0.5
    assert cfg.rho_f == 5.0
    assert cfg.rho(1) == 2.0


def test_with_revalidates(cfg):
    assert cfg.with_(M=128).M == 128
    with pytest.raises(ViolatedInvariant):
        cfg.with_(J=9)


def test_round_trip_through_dict(cfg):
    assert validate(cfg.as_dict()) == cfg
    assert validate(cfg) == cfg


@settings(max_examples=60, deadline=None)
@given(K=st.integers(1, 6), extra=st.integers(0, 6), data=st.integers(1, 50),
       rho=st.lists(st.floats(0, 10), min_size=6, max_size=6))
def test_validate_accepts_every_consistent_config(K, extra, data, rho):
    T_r = K + extra
    cfg = validate(dict(M=8, M_e=1, K=K, T=T_r + data, T_r=T_r, rho_r=1.0,
                        rho_users=rho[:K], rho_jam=0.5, L=T_r, J=T_r))
    assert cfg.T == cfg.T_r + cfg.T_d
    assert cfg.K <= cfg.L <= cfg.T_r
    assert cfg.rho_f == math.fsum(rho[:K])


def test_attack_spec_checks(cfg):
    assert AttackSpec(AttackKind.PILOT_MATCHING, 3).check(cfg).target == 3
    with pytest.raises(ViolatedInvariant):
        AttackSpec(AttackKind.PILOT_MATCHING, 4).check(cfg)
    with pytest.raises(ViolatedInvariant):
        AttackSpec(AttackKind.RANDOM_SUBSET_JAM, 0, J=5).check(cfg)
    with pytest.raises(ViolatedInvariant):
        AttackSpec(AttackKind.PILOT_MATCHING, 0).check(cfg.with_(M_e=0))
    assert AttackSpec("random_subset_jam").subset_size(cfg) == cfg.J


def test_attack_kind_phases():
    assert not AttackKind.NONE.jams_data
    assert AttackKind.DATA_ONLY_JAM.jams_data and not AttackKind.DATA_ONLY_JAM.jams_training
    assert AttackKind.RANDOM_SUBSET_JAM.jams_training


def test_seed_paths_are_reproducible_and_distinct():
    s = SeedPath(7, ("mc", 3))
    assert s.seed == SeedPath(7, ("mc", 3)).seed
    assert np.array_equal(s.rng().standard_normal(5), s.rng().standard_normal(5))
    seeds = {SeedPath(7, ("mc", i)).seed for i in range(1000)}
    assert len(seeds) == 1000
    # an int label and its string spelling are different streams
    assert SeedPath(7, (3,)).seed != SeedPath(7, ("3",)).seed
    assert s.child("x") == SeedPath(7, ("mc", 3, "x"))


def test_seed_derivation_is_frozen():
    # pins the byte-level derivation so stored results stay reproducible
    assert derive_seed(SeedPath(0)) == derive_seed(SeedPath(0, ()))
    assert SeedPath(2 ** 64 + 5).master == 5
    assert SeedPath(1, ("a",)).seed == FROZEN_SEED_1_A


def test_seed_labels_must_be_str_or_int():
    with pytest.raises(TypeError):
        SeedPath(1, (True,))
    with pytest.raises(TypeError):
        SeedPath(1, (1.5,))


FROZEN_SEED_1_A = 10454808285072891166
