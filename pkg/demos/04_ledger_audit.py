"""Export a chain, trace a model back to genesis, then break the chain."""

import tempfile
from pathlib import Path

from vanetfl.ledger import load_chain, parse_chain, trace_provenance
from vanetfl.simulation import SimConfig, Simulation

sim = Simulation(SimConfig(rounds=5))
trace = sim.run()

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "chain.jsonl"
    sim.ledger.export(path)
    blocks, status = load_chain(path)
    print(f"{len(blocks)} blocks, status {status}")

    for rec in trace_provenance(blocks, trace.final_model_hash):
        print(f"round {rec.round}: {rec.model_hash[:12]} <- {rec.parent_model_hash[:12]}  {len(rec.contributor_ids)} vehicles, {len(rec.oracle_ids)} oracles")

    data = bytearray(path.read_bytes())
    lines = bytes(data).split(b"\n")
    target = 7
    offset = sum(len(x) + 1 for x in lines[:target]) + 20
    data[offset] ^= 0x04
    _, status = parse_chain(bytes(data))
    print(f"after flipping one byte in block {target}: {status}")
