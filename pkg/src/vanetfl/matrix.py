"""The attack matrix: one simulated scenario per threat row."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .adversary import AttackKind, AttackScenario
from .simulation import AbortCascade, AttackReport, SimConfig, Simulation, build_report, run_simulation


@dataclass(frozen=True)
class MatrixRow:
    label: str
    scenario: AttackScenario
    claimed: str = "Yes"  # claimed resistance for this row
    control: bool = False  # over-threshold or otherwise outside the threat model


# Table rows with no mechanism to exercise; reported, never simulated.
UNMAPPED_ROWS = (
    "Spoofing Attacks",
    "Backdoor attacks",
    "Centralized Server Compromise",
    "Front Running Attack",
    "Model Inversion",
    "Location Pinpointing",
    "Traffic Analysis",
    "Side Channel Attack",
    "Collusion Attack",
)

MATRIX_COLUMNS = (
    "row",
    "kind",
    "claimed",
    "control",
    "detected",
    "blocked",
    "mechanism",
    "accuracy_delta",
    "over_threshold",
    "outcome",
    "slashed_nodes",
    "notes",
)


def matrix_rows(base: SimConfig) -> list[MatrixRow]:
    k = AttackKind
    return [
        MatrixRow("Replay Attacks", AttackScenario(k.REPLAY)),
        MatrixRow("Message Modification", AttackScenario(k.MESSAGE_MODIFICATION)),
        MatrixRow("Man in the Middle Attack", AttackScenario(k.MAN_IN_THE_MIDDLE)),
        MatrixRow("Masquerading Attacks", AttackScenario(k.IMPERSONATION, impersonation_mode="forge")),
        MatrixRow("Non-traceability and Impersonation Attacks", AttackScenario(k.IMPERSONATION, impersonation_mode="unregistered")),
        MatrixRow("DoS Attacks (Sybil)", AttackScenario(k.SYBIL)),
        MatrixRow("Data Poisoning", AttackScenario(k.DATA_POISONING)),
        MatrixRow("Byzantine Fault Tolerance Attack", AttackScenario(k.BYZANTINE_ORACLE, corrupted_oracles=base.f)),
        MatrixRow("Eavesdropping", AttackScenario(k.EAVESDROP, audit="channel")),
        MatrixRow("Anonymity", AttackScenario(k.EAVESDROP, audit="ledger")),
        MatrixRow("Tampering Attacks", AttackScenario(k.LEDGER_TAMPERING)),
        MatrixRow(
            "Byzantine Fault Tolerance Attack (f+1, over threshold)",
            AttackScenario(k.BYZANTINE_ORACLE, corrupted_oracles=base.f + 1),
            claimed="-",
            control=True,
        ),
    ]


def run_scenario(config: SimConfig, baseline_loss: float) -> AttackReport:
    """Like :func:`run_simulation` but turns an abort cascade into a report."""
    try:
        return run_simulation(config, baseline_loss)[1]
    except AbortCascade as exc:
        return build_report(exc.simulation, exc.trace, baseline_loss)


def run_matrix(base: SimConfig) -> list[AttackReport]:
    """Every row at ``base.seed`` against one shared attack-free baseline."""
    baseline = Simulation(replace(base, attack=None)).run().final_loss
    reports = []
    for row in matrix_rows(base):
        rep = run_scenario(replace(base, attack=row.scenario), baseline)
        reports.append(replace(rep, row=row.label))
    return reports


def matrix_table(reports: list[AttackReport], rows: list[MatrixRow]) -> list[dict[str, object]]:
    by_label = {r.label: r for r in rows}
    out = []
    for rep in reports:
        row = by_label[rep.row]
        out.append(
            {
                "row": rep.row,
                "kind": rep.kind,
                "claimed": row.claimed,
                "control": row.control,
                "detected": rep.detected,
                "blocked": rep.blocked,
                "mechanism": rep.detection_mechanism,
                "accuracy_delta": rep.accuracy_delta,
                "over_threshold": rep.over_threshold,
                "outcome": rep.outcome,
                "slashed_nodes": ";".join(rep.slashed_nodes),
                "notes": rep.notes,
            }
        )
    return out
