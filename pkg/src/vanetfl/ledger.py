"""Append-only hash-chained ledger, provenance records and nonce registry.

One event per block.  A block's hash is the SHA-256 of the canonical
encoding of ``(index, prev_hash, timestamp, payload)``, so flipping any
byte of a stored block breaks either its own hash or the next link.

Chains export as JSON lines in canonical form (sorted keys, no spaces).
On import a line that is not byte-identical to the canonical
re-serialization of what it parses to counts as tampered.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence

from .core import digest

ZERO_HASH = "0" * 64
GENESIS = "genesis"


class UnverifiedAggregate(ValueError):
    """An aggregate without a passing proof bundle was offered to the chain."""


class UnknownModel(KeyError):
    pass


class EventType(str, Enum):
    REGISTRATION = "registration"
    SUBMISSION = "submission"
    AGGREGATE = "aggregate"
    SLASH = "slash"
    PROVENANCE = "provenance"


@dataclass(frozen=True)
class Block:
    index: int
    prev_hash: str
    timestamp: int
    payload: dict[str, Any]
    hash: str

    def header(self) -> dict[str, Any]:
        return {"index": self.index, "prev_hash": self.prev_hash, "timestamp": self.timestamp, "payload": self.payload}

    def compute_hash(self) -> str:
        return digest(self.header())

    def to_line(self) -> str:
        return _canonical_json({**self.header(), "hash": self.hash})

    @classmethod
    def from_line(cls, line: str) -> Block:
        raw = json.loads(line)
        if not isinstance(raw, dict) or set(raw) != {"index", "prev_hash", "timestamp", "payload", "hash"}:
            raise ValueError("not a block record")
        if _canonical_json(raw) != line:
            raise ValueError("block record is not in canonical form")
        return cls(raw["index"], raw["prev_hash"], raw["timestamp"], raw["payload"], raw["hash"])


def _canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


@dataclass(frozen=True)
class ChainStatus:
    """``Valid`` when ``broken_at`` is None, else ``BrokenAt(broken_at)``."""

    broken_at: int | None = None

    @property
    def valid(self) -> bool:
        return self.broken_at is None

    def __bool__(self) -> bool:
        return self.valid

    def __str__(self) -> str:
        return "Valid" if self.valid else f"BrokenAt({self.broken_at})"


def append(chain: list[Block], payload: dict[str, Any], clock: int) -> Block:
    """Seal ``payload`` into a new tip block and push it onto ``chain``."""
    if payload.get("type") == EventType.AGGREGATE.value and payload.get("verified") is not True:
        raise UnverifiedAggregate(f"round {payload.get('round')} aggregate has no verified proof bundle")
    # Normalize through JSON so the in-memory block hashes exactly like its export.
    payload = json.loads(_canonical_json(payload))
    index = len(chain)
    prev = chain[-1].hash if chain else ZERO_HASH
    block = Block(index, prev, int(clock), payload, "")
    block = Block(index, prev, int(clock), payload, block.compute_hash())
    chain.append(block)
    return block


def verify_chain(chain: Sequence[Block]) -> ChainStatus:
    prev = ZERO_HASH
    for i, block in enumerate(chain):
        if block.index != i or block.prev_hash != prev or block.compute_hash() != block.hash:
            return ChainStatus(i)
        prev = block.hash
    return ChainStatus()


def export_chain(chain: Iterable[Block], path: str | Path) -> None:
    Path(path).write_bytes("".join(b.to_line() + "\n" for b in chain).encode("ascii"))


def load_chain(path: str | Path) -> tuple[list[Block], ChainStatus]:
    """Parse an exported chain file; see :func:`parse_chain`."""
    return parse_chain(Path(path).read_bytes())


def parse_chain(data: bytes) -> tuple[list[Block], ChainStatus]:
    """Parse exported chain bytes; stops at the first unparseable record.

    Returns the blocks read so far together with the verification status,
    so a mangled record at line ``i`` reports ``BrokenAt(j <= i)``.
    """
    records = data.split(b"\n")
    blocks: list[Block] = []
    for i, raw in enumerate(records):
        last = i == len(records) - 1
        if last and not raw:
            break
        try:
            if last:
                raise ValueError("record missing its terminator")
            blocks.append(Block.from_line(raw.decode("ascii")))
        except (ValueError, UnicodeDecodeError):
            status = verify_chain(blocks)
            return blocks, status if not status.valid else ChainStatus(i)
    return blocks, verify_chain(blocks)


# -- typed events -----------------------------------------------------------


def registration_event(node_id: str, pk: int, stake: float, role: str) -> dict[str, Any]:
    return {"type": EventType.REGISTRATION.value, "node_id": node_id, "pk": pk, "stake": float(stake), "role": role}


def submission_event(round_id: int, sender: str, submission_digest: str, ciphertext_digests: list[str], commitments: list[list[int]]) -> dict[str, Any]:
    return {
        "type": EventType.SUBMISSION.value,
        "round": round_id,
        "sender": sender,
        "digest": submission_digest,
        "ciphertexts": ciphertext_digests,
        "commitments": commitments,
    }


def slash_event(node_id: str, fraction: float, reason: str, stake_after: float, status: str) -> dict[str, Any]:
    return {
        "type": EventType.SLASH.value,
        "node_id": node_id,
        "fraction": float(fraction),
        "reason": reason,
        "stake_after": float(stake_after),
        "status": status,
    }


@dataclass(frozen=True)
class ProvenanceRecord:
    round: int
    model_hash: str
    parent_model_hash: str
    contributor_ids: tuple[str, ...]
    oracle_ids: tuple[str, ...]
    submission_digests: tuple[str, ...]
    proof_bundle_hash: str

    def to_payload(self) -> dict[str, Any]:
        return {
            "type": EventType.PROVENANCE.value,
            "round": self.round,
            "model_hash": self.model_hash,
            "parent_model_hash": self.parent_model_hash,
            "contributor_ids": list(self.contributor_ids),
            "oracle_ids": list(self.oracle_ids),
            "submission_digests": list(self.submission_digests),
            "proof_bundle_hash": self.proof_bundle_hash,
        }

    @classmethod
    def from_payload(cls, p: dict[str, Any]) -> ProvenanceRecord:
        return cls(
            p["round"],
            p["model_hash"],
            p["parent_model_hash"],
            tuple(p["contributor_ids"]),
            tuple(p["oracle_ids"]),
            tuple(p["submission_digests"]),
            p["proof_bundle_hash"],
        )


def trace_provenance(chain: Sequence[Block], model_hash: str) -> list[ProvenanceRecord]:
    """Lineage of ``model_hash`` back to genesis, newest record first."""
    by_model = {
        b.payload["model_hash"]: ProvenanceRecord.from_payload(b.payload)
        for b in chain
        if b.payload.get("type") == EventType.PROVENANCE.value
    }
    if model_hash not in by_model:
        raise UnknownModel(model_hash)
    lineage = []
    cur = model_hash
    while cur != GENESIS:
        if cur not in by_model or len(lineage) > len(by_model):
            raise UnknownModel(f"lineage of {model_hash} breaks at {cur}")
        rec = by_model[cur]
        lineage.append(rec)
        cur = rec.parent_model_hash
    return lineage


# -- replay defense -----------------------------------------------------------


class NonceStatus(str, Enum):
    FRESH = "Fresh"
    REPLAYED = "Replayed"


@dataclass
class NonceRegistry:
    """Insert-only set of ``(sender, nonce)`` pairs, scoped per sender."""

    first_seen: dict[tuple[str, int], int] = field(default_factory=dict)

    def seen(self, sender: str, nonce: int) -> bool:
        return (sender, nonce) in self.first_seen

    def __len__(self) -> int:
        return len(self.first_seen)


def check_nonce(registry: NonceRegistry, sender: str, nonce: int, round_id: int = 0) -> NonceStatus:
    if registry.seen(sender, nonce):
        return NonceStatus.REPLAYED
    registry.first_seen[(sender, nonce)] = round_id
    return NonceStatus.FRESH


class Ledger:
    """Single-writer chain plus the nonce registry that backs it."""

    def __init__(self) -> None:
        self.blocks: list[Block] = []
        self.nonces = NonceRegistry()

    def append(self, payload: dict[str, Any], clock: int) -> Block:
        return append(self.blocks, payload, clock)

    @property
    def tip_hash(self) -> str:
        return self.blocks[-1].hash if self.blocks else ZERO_HASH

    def verify(self) -> ChainStatus:
        return verify_chain(self.blocks)

    def export(self, path: str | Path) -> None:
        export_chain(self.blocks, path)

    def export_bytes(self) -> bytes:
        return "".join(b.to_line() + "\n" for b in self.blocks).encode("ascii")

    def __len__(self) -> int:
        return len(self.blocks)
