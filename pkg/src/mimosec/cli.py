"""Command-line entry point.

Subcommands ``figure``, ``verify``, ``simulate``, ``thresholds`` and ``mc``
all print (or write with ``--out``) a CSV result table.  Exit codes: 0 on
success, 1 when a check fails, 2 on invalid input.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Sequence

from . import montecarlo as mc
from . import thresholds as th
from .config import SeedPath
from .errors import MimosecError
from .estimation import Regime
from .figures import FIGURES, run_figure
from .io import Experiment, ResultTable, apply_overrides, load_tree, provenance, tree_to_experiment
from .verify import SUITES, run_verify

__all__ = ["main", "run_simulate", "build_parser"]

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

SIMULATE_COLUMNS = ("row", "block", "user", "gain_re", "gain_im", "symbol_power", "interference",
                    "noise_jam", "leak_snr", "decodable", "leakage", "rate", "rate_stderr",
                    "analytic_rate")

MC_EXPERIMENTS = ("moments", "sinr", "leakage", "lln", "identity", "waterfilling")


def run_simulate(exp: Experiment, blocks: int, out=None, workers: int = 1) -> ResultTable:
    """End-to-end simulation of ``exp`` as a table.

    One ``block`` row per (block, user) with the raw per-block statistics,
    then one ``aggregate`` row per user with the empirical rates.
    ``blocks = 0`` gives an empty table with its header.
    """
    table = ResultTable(SIMULATE_COLUMNS, provenance("simulate", exp.seed, dict(exp.tree, blocks=blocks)))
    if blocks > 0:
        rep = mc.mc_end_to_end(exp.cfg, exp.attack, blocks, SeedPath(exp.seed, ("simulate",)),
                               randomized_pilots=exp.randomize, delta=exp.delta, workers=workers)
        x = rep.per_block.reshape(blocks, exp.cfg.K, 7)
        nan = math.nan
        for b in range(blocks):
            for k in range(exp.cfg.K):
                g_re, g_im, p, _, interf, resid, leak = (float(v) for v in x[b, k])
                table.add("block", b, k, g_re, g_im, p, interf, resid, leak, nan, nan, nan, nan, nan)
        for k in range(exp.cfg.K):
            m = x[:, k, :].mean(axis=0)
            ref = rep.analytic[k].rate if rep.analytic else nan
            table.add("aggregate", None, k, float(m[0]), float(m[1]), float(m[2]), float(m[4]),
                      float(m[5]), float(m[6]), rep.decodable[k].estimate, rep.leakage[k].estimate,
                      rep.rate[k].estimate, rep.rate[k].stderr, ref)
    if out is not None:
        table.write(out)
    return table


def _thresholds(exp: Experiment, epsilon: float, rate: float, delta: float | None = None) -> ResultTable:
    cfg = exp.cfg
    t = ResultTable(("quantity", "value", "ceil", "residual", "argmax_user"),
                    provenance("thresholds", None, dict(exp.tree, epsilon=epsilon, rate=rate)))

    def add(r):
        ceil = r.ceil if math.isfinite(r.value) else None
        t.add(r.quantity, r.value, ceil, r.residual, r.argmax_user)

    if delta is None:
        delta = exp.delta if exp.delta > 0 else 0.5
    add(th.s_epsilon(cfg, epsilon, delta))
    add(th.v_of_r(cfg, rate, delta))
    add(th.g_epsilon(cfg, epsilon))
    if delta + cfg.gamma > 1:
        add(th.s1_epsilon(cfg, epsilon, delta))
        add(th.defense_secrecy_antennas(cfg, epsilon, delta))
    add(th.v1_of_r(cfg, rate, delta))
    return t


def _estimate_rows(table, estimates):
    for e in estimates:
        target = math.nan if e.target is None else e.target
        z = e.z if e.target is not None else math.nan
        table.add(e.label, e.estimate, e.stderr, target, z, e.passes() if e.target is not None else None)


def _mc(exp: Experiment, name: str, trials: int, workers: int) -> ResultTable:
    cfg, seed = exp.cfg, SeedPath(exp.seed, ("mc", name))
    t = ResultTable(("label", "estimate", "stderr", "target", "z", "passed"),
                    provenance(f"mc {name}", exp.seed, dict(exp.tree, trials=trials)))
    if name == "moments":
        regime = {"none": Regime.NO_JAM, "data_only_jam": Regime.NO_JAM,
                  "pilot_matching": Regime.PILOT_MATCHING,
                  "random_subset_jam": Regime.RANDOM_SUBSET}[exp.attack.kind.value]
        _estimate_rows(t, mc.mc_estimator_moments(cfg, regime, trials, seed, exp.attack.target,
                                                  workers=workers).values())
    elif name == "sinr":
        _estimate_rows(t, mc.mc_sinr(cfg, cfg.M, trials, seed, exp.attack.target,
                                     workers=workers).estimates())
    elif name == "leakage":
        delta = exp.delta if exp.delta > 0 else 0.7
        r = mc.mc_leakage(cfg, cfg.M, delta, trials, seed, workers=workers)
        _estimate_rows(t, (r.inner_product, r.symbol_power))
    elif name == "lln":
        for p in mc.mc_lln(cfg, [cfg.M], trials, seed, exp.attack.target, workers=workers):
            _estimate_rows(t, (p.v, p.w, p.bound))
    elif name == "identity":
        rep = mc.mc_distribution_identity(cfg, trials, seed, exp.attack.target, workers=workers)
        for c in rep.comparisons:
            t.add(c.name, c.original, math.nan, c.tilde, c.z, c.passes())
    else:
        w = mc.solve_waterfilling(cfg.M, cfg.rho_f, td_over_t=cfg.td_over_t)
        t.add("water_level", w.lam, math.nan, w.bound, math.nan, w.lam <= w.bound)
        t.add("capacity", w.capacity, math.nan, math.nan, math.nan, None)
        t.add("power_residual", w.residual, math.nan, 0.0, math.nan, abs(w.residual) <= 1e-8)
    return t


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (sections system/power/beamforming/attack/defense/mc)")
    common.add_argument("--out", help="write the CSV here instead of stdout")
    common.add_argument("--seed", type=int, help="master seed (overrides mc.seed)")
    common.add_argument("--trials", type=int, help="trials or blocks (overrides mc.trials)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key, e.g. power.rho_jam=2 (repeatable)")
    common.add_argument("--workers", type=int, default=1, help="worker threads (results do not depend on it)")

    p = argparse.ArgumentParser(prog="mimosec", description="Massive MIMO secrecy simulator.")
    sub = p.add_subparsers(dest="command", required=True)
    f = sub.add_parser("figure", parents=[common], help="curve table of one analytic figure")
    f.add_argument("fig", help=f"figure id, one of {FIGURES}")
    v = sub.add_parser("verify", parents=[common], help="run the property-verification suites")
    v.add_argument("--suite", choices=SUITES, default="all")
    sub.add_parser("simulate", parents=[common], help="end-to-end block simulation")
    t = sub.add_parser("thresholds", parents=[common], help="antenna thresholds S, V, G, S1, V1")
    t.add_argument("--epsilon", type=float, default=0.05, help="leakage or DoF tolerance")
    t.add_argument("--rate", type=float, default=0.2, help="required per-user rate")
    t.add_argument("--delta", type=float, help="delta exponent (default: beamforming.delta, or 0.5 for plain conjugate)")
    m = sub.add_parser("mc", parents=[common], help="one Monte-Carlo experiment")
    m.add_argument("experiment", choices=MC_EXPERIMENTS)
    return p


def _experiment(args) -> Experiment:
    tree = apply_overrides(load_tree(args.config), args.set)
    if args.seed is not None:
        tree["mc"]["seed"] = args.seed
    if args.trials is not None:
        tree["mc"]["trials"] = args.trials
    return tree_to_experiment(tree)


def _emit(table: ResultTable, out) -> None:
    if out is None:
        sys.stdout.write(table.to_csv())
    else:
        table.write(out)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        status = EXIT_OK
        if args.command == "figure":
            if args.config or args.seed is not None or args.trials is not None:
                print("note: figure ignores --config, --seed and --trials", file=sys.stderr)
            table = run_figure(args.fig, list(args.set))
        elif args.command == "verify":
            seed = 20240601 if args.seed is None else args.seed
            report = run_verify(args.suite, seed, args.trials, args.workers)
            table = report.table()
            for c in report.failures():
                print(f"FAIL {c.suite}/{c.name}: metric {c.metric:.6g} > {c.threshold:.6g}", file=sys.stderr)
            status = EXIT_OK if report.passed else EXIT_FAIL
        else:
            exp = _experiment(args)
            if args.command == "simulate":
                table = run_simulate(exp, exp.trials, workers=args.workers)
            elif args.command == "thresholds":
                table = _thresholds(exp, args.epsilon, args.rate, args.delta)
            else:
                table = _mc(exp, args.experiment, exp.trials, args.workers)
                if any(r[-1] is False for r in table.rows):
                    status = EXIT_FAIL
        _emit(table, args.out)
        return status
    except (MimosecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
