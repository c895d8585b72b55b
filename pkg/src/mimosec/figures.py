"""Curve tables behind the five analytic figures.

Each figure has a default config tree (system/power/... sections as in
:mod:`mimosec.io`) plus a ``figure`` section holding its grids.  Overrides
use the same dotted keys, e.g. ``system.m_e=2`` or ``figure.delta_grid=[0.5]``.
"""

from __future__ import annotations

import copy
import math
from typing import Any, Mapping

import numpy as np

from . import analytics as an
from . import thresholds as th
from .errors import UnknownFigure
from .io import DEFAULT_TREE, ResultTable, apply_overrides, config_hash, tree_to_experiment

__all__ = ["FIGURES", "figure_tree", "run_figure"]


def _tree(system=None, power=None, beamforming=None, defense=None, figure=None):
    t = copy.deepcopy(DEFAULT_TREE)
    for name, sec in (("system", system), ("power", power), ("beamforming", beamforming),
                      ("defense", defense)):
        t[name].update(sec or {})
    t["figure"] = dict(figure or {})
    return t


def _pow2(lo, hi):
    return [2 ** i for i in range(lo, hi + 1)]


# Fig 4's powers are not stated; rho_f = 10, rho_jam = 1, a = 0.9 is an assumption
_DEFAULTS = {
    2: _tree(system={"m": 1000, "m_e": 1, "k_users": 10, "t_block": 1000, "t_train": 10},
             power={"rho_r": 0.9, "rho_jam": 1.0, "rho_users": 1.0},
             figure={"m_grid": _pow2(4, 14), "m_e_grid": [1, 2, 4, 8]}),
    3: _tree(system={"m": 100, "m_e": 1, "k_users": 1, "t_block": 5, "t_train": 1},
             power={"rho_r": 1.0, "rho_jam": 0.0, "rho_users": 1.0},
             beamforming={"kind": "delta_conjugate", "delta": 0.7},
             figure={"eps_grid": [round(0.01 * i, 2) for i in range(1, 21)], "delta_grid": [0.7]}),
    4: _tree(system={"m": 100, "m_e": 1, "k_users": 10, "t_block": 50, "t_train": 10},
             power={"rho_r": 0.9, "rho_jam": 1.0, "rho_users": 1.0},
             figure={"delta_grid": [round(0.01 * i, 2) for i in range(5, 96)], "rate": 0.2,
                     "epsilon": 0.05}),
    5: _tree(system={"m": 200, "m_e": 1, "k_users": 5, "t_block": 300000, "t_train": 100000},
             power={"rho_r": 10.0, "rho_jam": 1.0, "rho_users": 1.0},
             figure={"eps_grid": [round(0.05 * i, 2) for i in range(1, 14)] + [2.0 / 3.0]}),
    6: _tree(system={"m": 200, "m_e": 1, "k_users": 5, "t_block": 300000, "t_train": 200},
             power={"rho_r": 10.0, "rho_jam": 1.0, "rho_users": 1.0},
             figure={"points": 30, "t_train_min": 200}),
}

FIGURES = tuple(sorted(_DEFAULTS))


def figure_tree(fig: int, overrides: Mapping[str, Any] | None = None) -> dict:
    if fig not in _DEFAULTS:
        raise UnknownFigure(f"no figure {fig!r}; available: {FIGURES}")
    return apply_overrides(_DEFAULTS[fig], overrides or {})


def _fig2(exp, f):
    t = ResultTable(("m_e", "m", "rate", "decodable", "leakage", "dof_ratio"), {})
    for m_e in f["m_e_grid"]:
        cfg = exp.cfg.with_(M_e=int(m_e))
        for M in f["m_grid"]:
            r = an.rate_no_training_jamming(cfg, M, warn=False)
            t.add(int(m_e), int(M), r.rate, r.decodable, r.leakage, r.dof_ratio)
    return t


def _fig3(exp, f):
    t = ResultTable(("delta", "epsilon", "s", "s_ceil"), {})
    for d in f["delta_grid"]:
        for eps in f["eps_grid"]:
            r = th.s_epsilon(exp.cfg, eps, d)
            t.add(float(d), float(eps), r.value, r.ceil)
    return t


def _fig4(exp, f):
    t = ResultTable(("delta", "v", "s", "max_vs", "is_optimum"), {})
    grid = sorted(float(d) for d in f["delta_grid"])
    best, _ = th.optimize_delta(exp.cfg, f["rate"], f["epsilon"], grid)
    for d in grid:
        v = th.v_of_r(exp.cfg, f["rate"], d).value
        s = th.s_epsilon(exp.cfg, f["epsilon"], d).value
        t.add(d, v, s, max(v, s), d == best)
    return t


def _fig5(exp, f):
    t = ResultTable(("epsilon", "g", "g_ceil"), {})
    for eps in f["eps_grid"]:
        r = th.g_epsilon(exp.cfg, eps)
        t.add(float(eps), r.value, r.ceil)
    return t


def _fig6(exp, f):
    cfg = exp.cfg
    T = cfg.T
    lo = int(f["t_train_min"])
    grid = np.unique(np.round(np.geomspace(lo, T - 1, int(f["points"]))).astype(int))
    t = ResultTable(("t_train", "t_r_over_t", "rho_r", "epsilon", "td_over_t"), {})
    for T_r in grid:
        T_r = int(T_r)
        rho_r = (T - T_r) / T_r * cfg.rho_f
        c = cfg.with_(T_r=T_r, rho_r=rho_r)
        t.add(T_r, T_r / T, rho_r, th.epsilon_for_antennas(c, cfg.M), c.td_over_t)
    return t


_RUNNERS = {2: _fig2, 3: _fig3, 4: _fig4, 5: _fig5, 6: _fig6}


def run_figure(fig: int, overrides: Mapping[str, Any] | None = None, out=None) -> ResultTable:
    """Compute the curve table of figure ``fig`` and optionally write it to ``out``.

    Raises
    ------
    UnknownFigure
        If ``fig`` is not one of 2..6.
    """
    try:
        fig = int(fig)
    except (TypeError, ValueError):
        raise UnknownFigure(f"no figure {fig!r}; available: {FIGURES}") from None
    tree = figure_tree(fig, overrides)
    exp = tree_to_experiment(tree)
    table = _RUNNERS[fig](exp, tree["figure"])
    table.provenance = {"command": f"figure {fig}", "config_hash": config_hash(tree), "seed": None,
                        "version": table.provenance["version"]}
    if out is not None:
        table.write(out)
    return table
