"""Corrupt f, then f+1, of the 3f+1 oracles and watch the rounds."""

from dataclasses import replace

from vanetfl.adversary import AttackKind, AttackScenario
from vanetfl.simulation import AbortCascade, SimConfig, Simulation

for f in (1, 2):
    base = SimConfig(f=f, rounds=4)
    clean = Simulation(base).run()
    for corrupted, quorum in ((f, True), (f + 1, True), (f + 1, False)):
        cfg = replace(base, quorum=quorum, attack=AttackScenario(AttackKind.BYZANTINE_ORACLE, corrupted_oracles=corrupted))
        try:
            trace = Simulation(cfg).run()
            note = ""
        except AbortCascade as exc:
            trace, note = exc.trace, exc.trace.abort_reason
        outcomes = " ".join(f"{r.outcome}({r.attempts})" for r in trace.rounds) or "-"
        committed = [(r, c) for r, c in zip(trace.rounds, clean.rounds) if r.outcome == "Committed"]
        correct = all(r.weights == c.weights for r, c in committed)
        print(f"f={f} seats={base.seats} corrupted={corrupted} quorum={quorum!s:<5}  {outcomes}  committed rounds correct: {correct} ({len(committed)})  {note}")
