"""Experiment files: TOML mirroring :class:`SimConfig` plus output settings.

    [simulation]
    seed = 7
    rounds = 20

    [attack]            # optional
    kind = "Replay"

    [output]
    dir = "out"

Unknown sections or keys are errors, and so are wrongly typed values.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .adversary import AttackKind, AttackScenario
from .simulation import ConfigError, SimConfig

_TYPES: dict[str, tuple[type, ...]] = {
    "int": (int,),
    "int | None": (int,),
    "float": (int, float),
    "float | None": (int, float),
    "bool": (bool,),
    "str": (str,),
    "tuple[int, ...]": (list,),
}


def _schema(cls: type, skip: tuple[str, ...] = ()) -> dict[str, tuple[type, ...]]:
    return {f.name: _TYPES[str(f.type)] for f in dataclasses.fields(cls) if f.name not in skip}


SIM_SCHEMA = _schema(SimConfig, skip=("attack",))
ATTACK_SCHEMA = _schema(AttackScenario, skip=("kind",)) | {"kind": (str,)}
OUTPUT_SCHEMA: dict[str, tuple[type, ...]] = {"dir": (str,)}
SECTIONS = {"simulation": SIM_SCHEMA, "attack": ATTACK_SCHEMA, "output": OUTPUT_SCHEMA}


@dataclass(frozen=True)
class ExperimentFile:
    sim: SimConfig
    out_dir: str = "out"
    source_digest: str | None = None  # sha256 of the file bytes


def parse_attack_kind(name: str) -> AttackKind:
    """Accepts ``Replay``, ``REPLAY``, ``data-poisoning``, ``data_poisoning`` ..."""
    key = name.replace("-", "").replace("_", "").lower()
    for kind in AttackKind:
        if key in (kind.value.lower(), kind.name.replace("_", "").lower()):
            return kind
    raise ConfigError(f"unknown attack kind {name!r}; choose from {', '.join(k.value for k in AttackKind)}")


def _check(section: str, table: Any, schema: dict[str, tuple[type, ...]], where: str) -> dict[str, Any]:
    if not isinstance(table, dict):
        raise ConfigError(f"{where}: [{section}] must be a table")
    for key, value in table.items():
        if key not in schema:
            raise ConfigError(f"{where}: [{section}] unknown key {key!r}")
        types = schema[key]
        if isinstance(value, bool) and bool not in types:
            raise ConfigError(f"{where}: [{section}] {key}: expected {types[0].__name__}, got bool")
        if not isinstance(value, types):
            raise ConfigError(f"{where}: [{section}] {key}: expected {types[-1].__name__}, got {type(value).__name__}")
    return dict(table)


def parse_experiment(doc: dict[str, Any], where: str = "<config>", source_digest: str | None = None) -> ExperimentFile:
    for section in doc:
        if section not in SECTIONS:
            raise ConfigError(f"{where}: unknown section [{section}]")
    sim = _check("simulation", doc.get("simulation", {}), SIM_SCHEMA, where)
    attack = None
    if "attack" in doc:
        raw = _check("attack", doc["attack"], ATTACK_SCHEMA, where)
        if "kind" not in raw:
            raise ConfigError(f"{where}: [attack] kind is required")
        raw["kind"] = parse_attack_kind(raw["kind"])
        if "flip_bytes" in raw:
            raw["flip_bytes"] = tuple(raw["flip_bytes"])
        try:
            attack = AttackScenario(**raw)
        except ValueError as exc:
            raise ConfigError(f"{where}: [attack] {exc}") from None
    out = _check("output", doc.get("output", {}), OUTPUT_SCHEMA, where)
    try:
        cfg = SimConfig(**sim, attack=attack)
    except ConfigError as exc:
        raise ConfigError(f"{where}: [simulation] {exc}") from None
    return ExperimentFile(cfg, out.get("dir", "out"), source_digest)


def load_experiment(path: str | Path) -> ExperimentFile:
    raw = Path(path).read_bytes()
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_experiment(doc, str(path), hashlib.sha256(raw).hexdigest())


def apply_overrides(
    exp: ExperimentFile,
    seed: int | None = None,
    rounds: int | None = None,
    attack: str | None = None,
    no_defense: bool = False,
    profile: str | None = None,
    out_dir: str | None = None,
) -> ExperimentFile:
    """Command-line flags win over file values."""
    changes: dict[str, Any] = {}
    if seed is not None:
        changes["seed"] = seed
    if rounds is not None:
        changes["rounds"] = rounds
    if attack is not None:
        changes["attack"] = None if attack.lower() == "none" else AttackScenario(parse_attack_kind(attack))
    if no_defense:
        changes["defense"] = False
    if profile is not None:
        changes["profile"] = profile
    sim = replace(exp.sim, **changes) if changes else exp.sim
    return replace(exp, sim=sim, out_dir=out_dir if out_dir is not None else exp.out_dir)
