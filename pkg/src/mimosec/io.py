"""Config-file loading and CSV result tables.

Config files are JSON with the sections ``system``, ``power``,
``beamforming``, ``attack``, ``defense`` and ``mc``.  Every output CSV starts
with one ``#``-prefixed JSON provenance line (config hash, seed, version)
and contains no timestamps, so reruns are byte-identical.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from . import __version__
from .config import AttackKind, AttackSpec, SystemConfig, validate
from .errors import ViolatedInvariant

__all__ = [
    "DEFAULT_TREE",
    "Experiment",
    "ResultTable",
    "apply_overrides",
    "config_hash",
    "load_tree",
    "parse_override",
    "tree_to_experiment",
]

DEFAULT_TREE: dict[str, dict[str, Any]] = {
    "system": {"m": 256, "m_e": 1, "k_users": 4, "t_block": 100, "t_train": 4},
    "power": {"rho_r": 2.25, "rho_jam": 1.0, "rho_users": 1.0},
    "beamforming": {"kind": "conjugate", "delta": 0.0},
    "attack": {"kind": "none", "target_user": 1, "j_subset": 1},
    "defense": {"l_pilots": None, "randomize_assignment": False, "gamma": 1.0},
    "mc": {"trials": 200, "seed": 20240601},
}

_BEAMFORMING = ("conjugate", "delta_conjugate")


@dataclass(frozen=True)
class Experiment:
    """A validated config tree turned into model objects."""

    cfg: SystemConfig
    attack: AttackSpec
    delta: float
    randomize: bool
    trials: int
    seed: int
    tree: Mapping[str, Any]


def load_tree(path=None) -> dict:
    """Defaults overlaid with the JSON file at ``path`` (if any)."""
    tree = copy.deepcopy(DEFAULT_TREE)
    if path is None:
        return tree
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ViolatedInvariant("config", f"{path}: not valid JSON ({exc})") from None
    except OSError as exc:
        raise ViolatedInvariant("config", f"cannot read {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ViolatedInvariant("config", "config root must be an object")
    for section, values in raw.items():
        if section not in tree:
            raise ViolatedInvariant(section, f"unknown config section {section!r}")
        if not isinstance(values, dict):
            raise ViolatedInvariant(section, f"section {section!r} must be an object")
        for key, value in values.items():
            _set(tree, f"{section}.{key}", value)
    return tree


def _set(tree, dotted, value):
    parts = dotted.split(".")
    if len(parts) != 2 or parts[0] not in tree or parts[1] not in tree[parts[0]]:
        raise ViolatedInvariant(dotted, f"unknown config key {dotted!r}")
    tree[parts[0]][parts[1]] = value


def parse_override(text: str) -> tuple[str, Any]:
    """``"power.rho_jam=2"`` -> ``("power.rho_jam", 2)``; values parse as JSON when possible."""
    if "=" not in text:
        raise ViolatedInvariant("--set", f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def apply_overrides(tree: dict, overrides: Mapping[str, Any] | Iterable[str]) -> dict:
    tree = copy.deepcopy(tree)
    items = overrides.items() if isinstance(overrides, Mapping) else map(parse_override, overrides)
    for key, value in items:
        _set(tree, key, value)
    return tree


def tree_to_experiment(tree: Mapping[str, Any]) -> Experiment:
    """Validate a config tree.

    ``attack.target_user`` is 1-based in files and 0-based in the API.
    """
    s, p, b, a, d, m = (tree[k] for k in ("system", "power", "beamforming", "attack", "defense", "mc"))
    raw = {
        "M": s["m"], "M_e": s["m_e"], "K": s["k_users"], "T": s["t_block"], "T_r": s["t_train"],
        "rho_r": p["rho_r"], "rho_jam": p["rho_jam"], "rho_users": p["rho_users"],
        "L": d["l_pilots"], "gamma": d["gamma"], "J": a["j_subset"],
    }
    kind = b["kind"]
    if kind not in _BEAMFORMING:
        raise ViolatedInvariant("beamforming.kind", f"beamforming must be one of {_BEAMFORMING}")
    delta = float(b["delta"]) if kind == "delta_conjugate" else 0.0
    raw["delta"] = delta
    cfg = validate(raw)
    try:
        attack_kind = AttackKind(a["kind"])
    except ValueError:
        raise ViolatedInvariant("attack.kind", f"unknown attack kind {a['kind']!r}") from None
    target = a["target_user"]
    if not isinstance(target, int) or isinstance(target, bool):
        raise ViolatedInvariant("attack.target_user", "target_user must be an integer")
    attack = AttackSpec(attack_kind, target - 1, cfg.J).check(cfg)
    trials = m["trials"]
    seed = m["seed"]
    if not isinstance(trials, int) or trials < 0:
        raise ViolatedInvariant("mc.trials", "trials must be a non-negative integer")
    if not isinstance(seed, int) or seed < 0:
        raise ViolatedInvariant("mc.seed", "seed must be a non-negative integer")
    return Experiment(cfg=cfg, attack=attack, delta=delta, randomize=bool(d["randomize_assignment"]),
                      trials=trials, seed=seed, tree=copy.deepcopy(dict(tree)))


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def config_hash(obj) -> str:
    """First 16 hex digits of the SHA-256 of the canonical JSON encoding."""
    return hashlib.sha256(_canonical(obj).encode()).hexdigest()[:16]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(float(v))
    if v is None:
        return ""
    if hasattr(v, "item"):
        return _fmt(v.item())
    return str(v)


@dataclass
class ResultTable:
    """Rows of one experiment plus a provenance header.

    The header is written as ``# {json}`` on the first line of the CSV.
    """

    columns: tuple[str, ...]
    provenance: dict[str, Any]
    rows: list[tuple] = field(default_factory=list)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.provenance = dict(self.provenance)
        self.provenance.setdefault("version", __version__)
        for r in self.rows:
            self._check(r)

    def _check(self, row):
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} values, table has {len(self.columns)} columns")

    def add(self, *row) -> None:
        self._check(row)
        self.rows.append(tuple(row))

    def column(self, name) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# " + _canonical(self.provenance) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# "):
            raise ValueError("missing provenance header")
        prov = json.loads(lines[0][2:])
        reader = csv.reader(lines[1:])
        columns = tuple(next(reader))
        rows = [tuple(_parse(v) for v in r) for r in reader]
        return cls(columns, prov, rows)


def _parse(v: str):
    if v in ("true", "false"):
        return v == "true"
    if v == "":
        return None
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v


def provenance(command: str, seed: int | None, params: Any) -> dict[str, Any]:
    return {"command": command, "config_hash": config_hash(params), "seed": seed,
            "version": __version__}
