"""Command-line driver: ``vanetfl {run,matrix,ban,audit}``.

Exit codes: 0 success, 1 a check failed (broken chain, unknown model,
unproved BAN goal), 2 bad configuration or usage, 3 abort cascade.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .ban import check_paper_protocols
from .config import ExperimentFile, apply_overrides, load_experiment
from .ledger import EventType, UnknownModel, load_chain, trace_provenance
from .matrix import matrix_rows, matrix_table, run_matrix
from .reporting import make_report, matrix_csv, write_json
from .simulation import AbortCascade, ConfigError, SimConfig, Simulation, build_report

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3


def _experiment(args: argparse.Namespace) -> ExperimentFile:
    exp = load_experiment(args.config) if args.config else ExperimentFile(SimConfig())
    return apply_overrides(
        exp,
        seed=args.seed,
        rounds=args.rounds,
        attack=args.attack,
        no_defense=args.no_defense,
        profile=args.profile,
        out_dir=args.out_dir,
    )


def cmd_run(args: argparse.Namespace) -> int:
    exp = _experiment(args)
    cfg = exp.sim
    out = Path(exp.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sim = Simulation(cfg)
    code = EXIT_OK
    try:
        trace = sim.run()
    except AbortCascade as exc:
        trace, code = exc.trace, EXIT_ABORT
        print(f"error: {exc}", file=sys.stderr)
    attack_report = None
    if cfg.attack is not None:
        baseline = Simulation(replace(cfg, attack=None)).run().final_loss
        attack_report = build_report(sim, trace, baseline)
    report = make_report("run", cfg, check_paper_protocols(), trace, attack_report, None, sim.ledger.tip_hash, exp.source_digest)
    write_json(out / "report.json", report)
    sim.ledger.export(out / "chain.jsonl")
    for row in report["rounds"]:
        print(f"round {row['round']:3d}  {row['outcome']:<9}  loss {row['loss']:.6f}  accepted {row['accepted']}  rejected {row['rejected']}")
    if attack_report is not None:
        a = attack_report
        print(f"attack {a.kind}: detected={a.detected} blocked={a.blocked} mechanism={a.detection_mechanism} accuracy_delta={a.accuracy_delta:.6g}")
    print(f"ledger tip {sim.ledger.tip_hash}")
    print(f"final model {trace.final_model_hash}")
    return code


def cmd_matrix(args: argparse.Namespace) -> int:
    exp = _experiment(args)
    out = Path(exp.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = run_matrix(exp.sim)
    table = matrix_table(reports, matrix_rows(exp.sim))
    (out / "matrix.csv").write_text(matrix_csv(table), encoding="utf-8")
    write_json(out / "report.json", make_report("matrix", exp.sim, check_paper_protocols(), matrix=table, source_digest=exp.source_digest))
    width = max(len(r["row"]) for r in table)
    for r in table:
        print(f"{r['row']:<{width}}  detected={r['detected']!s:<5}  blocked={r['blocked']!s:<5}  {r['mechanism']:<18} delta={r['accuracy_delta']:.6g}")
    return EXIT_OK


def cmd_ban(args: argparse.Namespace) -> int:
    report = check_paper_protocols(include_classical=not args.no_classical)
    text = report.text()
    print(text, end="")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "ban.txt").write_text(text, encoding="utf-8")
    return EXIT_OK if report.goals_proved and report.ablations_blocked else EXIT_CHECK


def cmd_audit(args: argparse.Namespace) -> int:
    blocks, status = load_chain(args.chain)
    if not status.valid:
        print(f"BrokenChain({status.broken_at})", file=sys.stderr)
        return EXIT_CHECK
    model = args.model_hash
    if model is None:
        prov = [b for b in blocks if b.payload.get("type") == EventType.PROVENANCE.value]
        if not prov:
            print("no provenance records in chain", file=sys.stderr)
            return EXIT_CHECK
        model = prov[-1].payload["model_hash"]
    try:
        lineage = trace_provenance(blocks, model)
    except UnknownModel as exc:
        print(f"UnknownModel({exc.args[0]})", file=sys.stderr)
        return EXIT_CHECK
    print(f"chain Valid, {len(blocks)} blocks; lineage of {model}: {len(lineage)} records")
    for rec in lineage:
        print(f"round {rec.round}  model {rec.model_hash[:16]}  parent {rec.parent_model_hash[:16]}")
        print(f"  contributors: {', '.join(rec.contributor_ids)}")
        print(f"  oracles:      {', '.join(rec.oracle_ids)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vanetfl", description="Federated learning over oracle-verified secure aggregation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="TOML experiment file")
        p.add_argument("--seed", type=int)
        p.add_argument("--rounds", type=int)
        p.add_argument("--attack", help="attack kind, or 'none'")
        p.add_argument("--no-defense", action="store_true", help="disable the update-norm filter")
        p.add_argument("--out-dir")
        p.add_argument("--profile", choices=["test", "secure"])

    p = sub.add_parser("run", help="run one simulation")
    experiment_flags(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("matrix", help="run every attack scenario")
    experiment_flags(p)
    p.set_defaults(func=cmd_matrix)
    p = sub.add_parser("ban", help="check the BAN-logic goals")
    p.add_argument("--out-dir")
    p.add_argument("--no-classical", action="store_true", help="skip the classical shared-key variants")
    p.set_defaults(func=cmd_ban)
    p = sub.add_parser("audit", help="verify a chain export and list a model's provenance")
    p.add_argument("chain")
    p.add_argument("model_hash", nargs="?", help="defaults to the newest model on the chain")
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
