"""Verifiable secure aggregation over additive shares.

Each participant shares ``n_i * encode(w_i)`` coordinate-wise across the
computation oracles, together with shares of a fresh blinding per
coordinate, and publishes ``commit(share, blinding_share)`` for every
(oracle, coordinate) pair.  An oracle's partial sum is checked against the
product of the commitments addressed to it; because commitments multiply
as their openings add, a wrong partial cannot match unless the oracle can
break the binding property.

Only additions happen in the field.  The single division by the total
sample count happens after decoding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import crypto
from .core import FieldParams, Rng, canonical, decode_fixed, digest, encode_fixed
from .crypto import Commitment, KeyPair, Signature


class RoundMismatch(ValueError):
    pass


class EmptyRound(ValueError):
    pass


class ProofFailure(Exception):
    """One or more partial-sum proofs failed; ``oracles`` names the culprits."""

    def __init__(self, oracles: Sequence[str]):
        self.oracles = tuple(sorted(oracles))
        super().__init__(f"proof failure from {', '.join(self.oracles)}")


@dataclass(frozen=True)
class ShareEnvelope:
    round: int
    sender: str
    to_oracle: str
    coords: tuple[int, ...]
    blindings: tuple[int, ...]

    def to_bytes(self) -> bytes:
        return json.dumps(
            [self.round, self.sender, self.to_oracle, list(self.coords), list(self.blindings)],
            separators=(",", ":"),
        ).encode()

    @classmethod
    def from_bytes(cls, raw: bytes) -> ShareEnvelope:
        r, s, o, coords, blindings = json.loads(raw)
        return cls(r, s, o, tuple(coords), tuple(blindings))


@dataclass(frozen=True)
class PartialSumProof:
    oracle: str
    round: int
    contributors: tuple[str, ...]
    partial: tuple[int, ...]
    blinding_sum: tuple[int, ...]
    sig: Signature | None = None

    def signed_body(self) -> bytes:
        return canonical(["partial", self.oracle, self.round, list(self.contributors), list(self.partial), list(self.blinding_sum)])


@dataclass
class AggregateResult:
    round: int
    weights: np.ndarray
    total_samples: int
    contributing: tuple[str, ...]
    proof_bundle: tuple[PartialSumProof, ...]
    verified: bool = False
    field_sums: tuple[int, ...] = field(default=())

    @property
    def proof_bundle_hash(self) -> str:
        return digest(list(self.proof_bundle))

    @property
    def model_hash(self) -> str:
        return digest(
            {
                "round": self.round,
                "weights": [float(w) for w in self.weights],
                "total_samples": self.total_samples,
                "contributing": list(self.contributing),
                "proof_bundle_hash": self.proof_bundle_hash,
            }
        )


def make_envelopes(
    weights: Sequence[float],
    n_samples: int,
    oracle_ids: Sequence[str],
    params: FieldParams,
    rng: Rng,
    round: int = 0,
    sender: str = "",
) -> tuple[list[ShareEnvelope], list[list[Commitment]]]:
    """Share ``n_samples * w`` across ``oracle_ids``.

    Returns one envelope per oracle and ``commitments[i][j]`` for oracle i,
    coordinate j.  The weights are quantized first, so the shared value is
    exactly ``n_samples * encode(w_j)``.
    """
    k = len(oracle_ids)
    if k < 2:
        raise ValueError("need at least two computation oracles")
    q = params.q
    shares = [[0] * len(weights) for _ in range(k)]
    blinds = [[0] * len(weights) for _ in range(k)]
    for j, w in enumerate(weights):
        encode_fixed(n_samples * float(w), params)  # range check, raises OverflowError
        value = n_samples * encode_fixed(w, params) % q
        total_blinding = rng.below(q)
        vs = crypto.share_additive(value, k, rng, q, sender, round).shares
        rs = crypto.share_additive(total_blinding, k, rng, q, sender, round).shares
        for i in range(k):
            shares[i][j] = vs[i]
            blinds[i][j] = rs[i]
    envelopes = [ShareEnvelope(round, sender, oid, tuple(shares[i]), tuple(blinds[i])) for i, oid in enumerate(oracle_ids)]
    commitments = [[crypto.commit(s, r, params) for s, r in zip(shares[i], blinds[i])] for i in range(k)]
    return envelopes, commitments


def oracle_partial(
    envelopes: Sequence[ShareEnvelope],
    oracle_id: str,
    params: FieldParams,
    keypair: KeyPair | None = None,
) -> PartialSumProof:
    if not envelopes:
        raise EmptyRound("no envelopes delivered")
    rounds = {e.round for e in envelopes}
    if len(rounds) != 1:
        raise RoundMismatch(f"envelopes span rounds {sorted(rounds)}")
    if any(e.to_oracle != oracle_id for e in envelopes):
        raise ValueError("envelope addressed to a different oracle")
    q = params.q
    ordered = sorted(envelopes, key=lambda e: e.sender)
    dim = len(ordered[0].coords)
    partial = tuple(sum(e.coords[j] for e in ordered) % q for j in range(dim))
    blinding = tuple(sum(e.blindings[j] for e in ordered) % q for j in range(dim))
    proof = PartialSumProof(oracle_id, rounds.pop(), tuple(e.sender for e in ordered), partial, blinding)
    if keypair is not None:
        proof = replace(proof, sig=crypto.sign(keypair.sk, proof.signed_body(), params))
    return proof


def verify_aggregate(
    partials: Sequence[PartialSumProof],
    published_commitments: Mapping[str, Sequence[Sequence[Commitment]]],
    total_samples: int,
    params: FieldParams,
    oracle_ids: Sequence[str],
    oracle_pks: Mapping[str, int] | None = None,
) -> AggregateResult:
    """Check every partial against the published commitments, then decode.

    ``published_commitments[sender][i][j]`` is the sender's commitment for
    ``oracle_ids[i]``, coordinate ``j``.  Raises :class:`ProofFailure`
    naming every oracle whose proof is missing, unsigned, or does not open.
    """
    if not published_commitments:
        raise EmptyRound("no participants")
    if total_samples <= 0:
        raise EmptyRound("no samples")
    senders = tuple(sorted(published_commitments))
    by_oracle = {p.oracle: p for p in partials}
    offenders = []
    for i, oid in enumerate(oracle_ids):
        proof = by_oracle.get(oid)
        dim = len(published_commitments[senders[0]][i])
        if (
            proof is None
            or proof.contributors != senders
            or len(proof.partial) != dim
            or len(proof.blinding_sum) != dim
        ):
            offenders.append(oid)
            continue
        if oracle_pks is not None and (
            proof.sig is None or not crypto.verify(oracle_pks[oid], proof.signed_body(), proof.sig, params)
        ):
            offenders.append(oid)
            continue
        for j, (m, r) in enumerate(zip(proof.partial, proof.blinding_sum)):
            expected = crypto.combine([published_commitments[s][i][j] for s in senders], params)
            if not crypto.open_check(expected, m, r, params):
                offenders.append(oid)
                break
    if offenders:
        raise ProofFailure(offenders)
    rounds = {by_oracle[oid].round for oid in oracle_ids}
    if len(rounds) != 1:
        raise RoundMismatch(f"partials span rounds {sorted(rounds)}")
    q = params.q
    dim = len(by_oracle[oracle_ids[0]].partial)
    sums = tuple(sum(by_oracle[oid].partial[j] for oid in oracle_ids) % q for j in range(dim))
    weights = np.array([decode_fixed(s, params) for s in sums]) / total_samples
    return AggregateResult(
        round=rounds.pop(),
        weights=weights,
        total_samples=total_samples,
        contributing=senders,
        proof_bundle=tuple(by_oracle[oid] for oid in oracle_ids),
        verified=True,
        field_sums=sums,
    )


def fedavg_plaintext(updates: Sequence[tuple[Sequence[float], int]]) -> np.ndarray:
    """Sample-weighted mean ``sum(n_i * w_i) / sum(n_i)``."""
    if not updates:
        raise EmptyRound("no participants")
    dims = {len(w) for w, _ in updates}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch: {sorted(dims)}")
    acc = np.zeros(dims.pop())
    total = 0
    for w, n in updates:
        acc = acc + n * np.asarray(w, dtype=float)
        total += n
    return acc / total
