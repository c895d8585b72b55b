import json
import math

import pytest

from mimosec import io
from mimosec.cli import SIMULATE_COLUMNS, main, run_simulate
from mimosec.config import AttackKind
from mimosec.errors import UnknownFigure, ViolatedInvariant
from mimosec.figures import FIGURES, run_figure


def test_load_tree_and_overrides(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"system": {"m": 32}, "attack": {"kind": "pilot_matching", "target_user": 2}}))
    tree = io.load_tree(path)
    assert tree["system"]["m"] == 32 and tree["system"]["k_users"] == 4
    tree = io.apply_overrides(tree, ["power.rho_jam=2.5", "defense.l_pilots=4"])
    exp = io.tree_to_experiment(tree)
    assert exp.cfg.M == 32 and exp.cfg.rho_jam == 2.5
    assert exp.attack.kind is AttackKind.PILOT_MATCHING and exp.attack.target == 1
    assert io.parse_override("beamforming.kind=delta_conjugate") == ("beamforming.kind", "delta_conjugate")


@pytest.mark.parametrize("content", [
    "{not json", json.dumps([1]), json.dumps({"nope": {}}), json.dumps({"system": {"zz": 1}}),
    json.dumps({"system": 3}),
])
def test_bad_config_files(tmp_path, content):
    path = tmp_path / "c.json"
    path.write_text(content)
    with pytest.raises(ViolatedInvariant):
        io.load_tree(path)


@pytest.mark.parametrize("override", ["attack.kind=\"laser\"", "beamforming.kind=\"zf\"",
                                      "attack.target_user=9", "mc.trials=-1", "mc.seed=1.5",
                                      "attack.target_user=true"])
def test_bad_values(override):
    with pytest.raises(ViolatedInvariant):
        io.tree_to_experiment(io.apply_overrides(io.load_tree(), [override]))
    with pytest.raises(ViolatedInvariant):
        io.parse_override("no_equals_sign")


def test_config_hash_is_order_independent():
    assert io.config_hash({"a": 1, "b": [1, 2]}) == io.config_hash({"b": [1, 2], "a": 1})
    assert len(io.config_hash({})) == 16


def test_result_table_round_trip():
    t = io.ResultTable(("a", "b", "c", "d"), {"command": "x", "seed": 1})
    t.add(1, 0.1 + 0.2, True, None)
    t.add(2, math.inf, False, "s")
    back = io.ResultTable.from_csv(t.to_csv())
    assert back.rows == t.rows and back.provenance == t.provenance
    assert t.to_csv().splitlines()[0].startswith("# {")
    with pytest.raises(ValueError):
        t.add(1, 2)
    with pytest.raises(ValueError):
        io.ResultTable.from_csv("a,b\n1,2\n")


def test_figure_tables():
    t3 = run_figure(3)
    assert t3.columns == ("delta", "epsilon", "s", "s_ceil")
    row = dict(zip(t3.columns, t3.rows[4]))
    assert row["epsilon"] == 0.05 and row["s"] == pytest.approx(85.9164349324125, rel=1e-12)
    s = t3.column("s")
    assert all(a > b for a, b in zip(s, s[1:]))

    t5 = run_figure(5)
    g = t5.column("g")
    assert all(a > b for a, b in zip(g, g[1:]))
    assert t5.rows[-1][1] == pytest.approx(17.64, rel=1e-9)

    t4 = run_figure("4")
    assert sum(t4.column("is_optimum")) == 1
    t2 = run_figure(2, {"figure.m_grid": [16, 64], "figure.m_e_grid": [1]})
    assert len(t2.rows) == 2 and t2.columns[-1] == "dof_ratio"
    t6 = run_figure(6)
    assert t6.rows[0][0] == 200 and t6.rows[-1][0] == 299999
    assert t6.column("rho_r")[0] == pytest.approx((300000 - 200) / 200 * 5)
    assert FIGURES == (2, 3, 4, 5, 6)
    with pytest.raises(UnknownFigure):
        run_figure(7)
    with pytest.raises(UnknownFigure):
        run_figure("x")


def test_figure_output_is_byte_identical(tmp_path):
    run_figure(3, out=tmp_path / "a.csv")
    run_figure(3, out=tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def _exp(*overrides):
    return io.tree_to_experiment(io.apply_overrides(io.load_tree(), ["system.m=16", *overrides]))


def test_simulate_empty_and_small(tmp_path):
    t = run_simulate(_exp(), 0, out=tmp_path / "e.csv")
    assert t.rows == [] and t.columns == SIMULATE_COLUMNS
    assert (tmp_path / "e.csv").read_text().count("\n") == 2
    t = run_simulate(_exp(), 5)
    assert [r[0] for r in t.rows].count("block") == 5 * 4
    assert [r[0] for r in t.rows].count("aggregate") == 4


def test_simulate_data_jamming_lowers_rate():
    quiet = run_simulate(_exp("system.m=64", "power.rho_jam=4"), 300)
    loud = run_simulate(_exp("system.m=64", "power.rho_jam=4", 'attack.kind="data_only_jam"'), 300)
    agg = lambda t: [r for r in t.rows if r[0] == "aggregate"]
    for q, l in zip(agg(quiet), agg(loud)):
        assert l[9] < q[9]


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["figure", "3", "--out", str(tmp_path / "f.csv")]) == 0
    assert (tmp_path / "f.csv").read_text().startswith("# ")
    assert main(["figure", "11"]) == 2
    assert main(["thresholds", "--set", "system.t_train=2"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"system": {"t_train": 4}, "defense": {"l_pilots": 5}}))
    assert main(["simulate", "--config", str(bad)]) == 2
    assert main(["simulate", "--trials", "0"]) == 0
    assert main(["thresholds", "--delta", "0.7"]) == 0
    assert main(["mc", "waterfilling", "--set", "system.m=8"]) == 0
    assert main(["verify", "--suite", "formulas", "--workers", "0"]) == 2
    out = capsys.readouterr().out
    assert "quantity,value,ceil,residual,argmax_user" in out


def test_cli_mc_worker_independent(tmp_path):
    args = ["mc", "sinr", "--trials", "40", "--set", "system.m=32", "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--workers", "3", "--out", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_cli_verify_formulas(tmp_path):
    assert main(["verify", "--suite", "formulas", "--out", str(tmp_path / "v.csv")]) == 0
    t = io.ResultTable.from_csv((tmp_path / "v.csv").read_text())
    assert all(t.column("passed"))
