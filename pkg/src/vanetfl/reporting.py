"""Machine-readable reports.

JSON for run and matrix reports, CSV for the attack matrix, plain text for
BAN trees.  Nothing time- or path-dependent goes into a report, so equal
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict
from pathlib import Path
from typing import Any

from . import __version__
from .ban import BanReport
from .matrix import MATRIX_COLUMNS
from .simulation import AttackReport, RoundTrace, SimConfig

# Required top-level keys of a report and their JSON types.
REPORT_SCHEMA: dict[str, tuple[type, ...]] = {
    "tool": (str,),
    "version": (str,),
    "command": (str,),
    "seed": (int,),
    "config_digest": (str,),
    "source_digest": (str, type(None)),
    "config": (dict,),
    "rounds": (list,),
    "attack_report": (dict, type(None)),
    "matrix": (list, type(None)),
    "ban": (dict,),
    "ledger_tip": (str, type(None)),
    "abort_reason": (str, type(None)),
}

ROUND_COLUMNS = ("round", "outcome", "attempts", "loss", "weight_error", "accepted", "rejected", "yes_votes", "tip_hash")


def ban_summary(ban: BanReport) -> dict[str, Any]:
    return {
        "goals_proved": ban.goals_proved,
        "ablations_blocked": ban.ablations_blocked,
        "rows": [{"case": r.case, "removed": r.removed, "result": str(r.result)} for r in ban.rows],
    }


def round_rows(trace: RoundTrace) -> list[dict[str, Any]]:
    return [
        {
            "round": r.round,
            "outcome": r.outcome,
            "attempts": r.attempts,
            "loss": r.loss,
            "weight_error": r.weight_error,
            "accepted": len(r.accepted),
            "rejected": len(r.rejected),
            "yes_votes": r.yes_votes,
            "tip_hash": r.tip_hash,
        }
        for r in trace.rounds
    ]


def make_report(
    command: str,
    config: SimConfig,
    ban: BanReport,
    trace: RoundTrace | None = None,
    attack_report: AttackReport | None = None,
    matrix: list[dict[str, Any]] | None = None,
    ledger_tip: str | None = None,
    source_digest: str | None = None,
) -> dict[str, Any]:
    return {
        "tool": "vanetfl",
        "version": __version__,
        "command": command,
        "seed": config.seed,
        "config_digest": config.digest(),
        "source_digest": source_digest,
        "config": config.to_dict(),
        "rounds": round_rows(trace) if trace is not None else [],
        "attack_report": asdict(attack_report) if attack_report is not None else None,
        "matrix": matrix,
        "ban": ban_summary(ban),
        "ledger_tip": ledger_tip,
        "abort_reason": trace.abort_reason if trace is not None else None,
    }


def validate_report(obj: Any) -> list[str]:
    """Schema problems in a parsed report; empty when it conforms."""
    if not isinstance(obj, dict):
        return ["report is not an object"]
    problems = []
    for key, types in REPORT_SCHEMA.items():
        if key not in obj:
            problems.append(f"missing {key}")
        elif isinstance(obj[key], bool) and bool not in types:
            problems.append(f"{key}: unexpected bool")
        elif not isinstance(obj[key], types):
            problems.append(f"{key}: unexpected {type(obj[key]).__name__}")
    problems += [f"unknown key {k}" for k in obj if k not in REPORT_SCHEMA]
    for i, row in enumerate(obj.get("rounds") or []):
        if set(row) != set(ROUND_COLUMNS):
            problems.append(f"rounds[{i}]: columns {sorted(row)}")
    for i, row in enumerate(obj.get("matrix") or []):
        if set(row) != set(MATRIX_COLUMNS):
            problems.append(f"matrix[{i}]: columns {sorted(row)}")
    return problems


def dumps_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dumps_json(obj), encoding="utf-8")


def matrix_csv(table: list[dict[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=MATRIX_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in table:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def parse_matrix_csv(text: str) -> list[dict[str, Any]]:
    rows = []
    for raw in csv.DictReader(io.StringIO(text)):
        if tuple(raw) != MATRIX_COLUMNS:
            raise ValueError(f"unexpected columns {list(raw)}")
        row: dict[str, Any] = dict(raw)
        for key in ("control", "detected", "blocked", "over_threshold"):
            if row[key] not in ("True", "False"):
                raise ValueError(f"{key}: not a flag: {row[key]!r}")
            row[key] = row[key] == "True"
        row["accuracy_delta"] = float(row["accuracy_delta"])
        rows.append(row)
    return rows
