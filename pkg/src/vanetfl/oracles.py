"""Decentralized oracle layer: staking, submission validation, quorum votes
and slashing.

Vehicles and oracles register through the same staked :class:`Registry`.
Validation is a pure function of the submission and the shared registry
state, so every honest oracle reaches the same verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Collection, Iterable, Sequence

import numpy as np

from . import crypto
from .core import FieldParams, canonical, digest, encode_fixed
from .crypto import Ciphertext, Commitment, KeyPair, Signature
from .ledger import Ledger, NonceRegistry, registration_event, slash_event

REPUTATION_PENALTY = 0.2


class RefusalReason(str, Enum):
    INSUFFICIENT_STAKE = "InsufficientStake"
    DUPLICATE_ID = "DuplicateId"


@dataclass(frozen=True)
class Admission:
    admitted: bool
    reason: RefusalReason | None = None
    stake: float = 0.0

    def __bool__(self) -> bool:
        return self.admitted


@dataclass
class Wallet:
    """Funding source for stakes; a Sybil attacker shares one across ids."""

    balance: float

    def withdraw(self, amount: float) -> float:
        taken = min(amount, self.balance)
        self.balance -= taken
        return taken


@dataclass
class Participant:
    node_id: str
    pk: int
    stake: float
    role: str


class Registry:
    """Admitted ids; roles in ``exempt_roles`` register without a stake."""

    def __init__(self, min_stake: float, ledger: Ledger | None = None, exempt_roles: Iterable[str] = ()):
        self.min_stake = min_stake
        self.ledger = ledger
        self.exempt_roles = frozenset(exempt_roles)
        self.entries: dict[str, Participant] = {}

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.entries

    def pk_of(self, node_id: str) -> int:
        return self.entries[node_id].pk

    def ids(self, role: str | None = None) -> list[str]:
        return [i for i, p in self.entries.items() if role is None or p.role == role]


def register_participant(
    registry: Registry,
    node_id: str,
    pk: int,
    stake: float,
    role: str = "vehicle",
    wallet: Wallet | None = None,
    clock: int = 0,
) -> Admission:
    """Admit ``node_id`` if it locks at least ``min_stake``.

    With a ``wallet`` the locked amount is whatever the wallet can still
    cover, and a refused stake is refunded.
    """
    if node_id in registry:
        return Admission(False, RefusalReason.DUPLICATE_ID)
    locked = wallet.withdraw(stake) if wallet is not None else stake
    required = 0.0 if role in registry.exempt_roles else registry.min_stake
    if locked < required:
        if wallet is not None:
            wallet.balance += locked
        return Admission(False, RefusalReason.INSUFFICIENT_STAKE)
    registry.entries[node_id] = Participant(node_id, pk, locked, role)
    if registry.ledger is not None:
        registry.ledger.append(registration_event(node_id, pk, locked, role), clock)
    return Admission(True, None, locked)


# -- submissions ------------------------------------------------------------


@dataclass(frozen=True)
class Submission:
    """Signed, nonce-stamped upload of one vehicle's encrypted shares.

    ``ciphertexts[i]`` carries the shares for the i-th computation oracle
    and ``share_commitments[i][j]`` commits to that oracle's share of
    coordinate ``j``.  The signature covers every header field plus each
    ciphertext's tag; the tag in turn authenticates the payload.
    """

    round: int
    sender: str
    nonce: int
    timestamp: int
    n_samples: int
    declared_norm: float
    ciphertexts: tuple[Ciphertext, ...]
    share_commitments: tuple[tuple[int, ...], ...]
    sig: Signature | None = None

    def signed_body(self) -> bytes:
        return canonical(
            [
                "submission",
                self.round,
                self.sender,
                self.nonce,
                self.timestamp,
                self.n_samples,
                float(self.declared_norm),
                [[ct.recipient_id, ct.nonce, ct.sender_pk, ct.tag] for ct in self.ciphertexts],
                [list(row) for row in self.share_commitments],
            ]
        )

    def digest(self) -> str:
        return digest(self)

    def signed(self, sk: int, params: FieldParams) -> Submission:
        return replace(self, sig=crypto.sign(sk, self.signed_body(), params))


class RejectReason(str, Enum):
    UNREGISTERED_SENDER = "UnregisteredSender"
    BAD_SIGNATURE = "BadSignature"
    STALE_TIMESTAMP = "StaleTimestamp"
    REPLAYED_NONCE = "ReplayedNonce"
    ANOMALOUS_MAGNITUDE = "AnomalousMagnitude"
    # raised by a computation oracle at share delivery, not by validate_submission
    AUTH_FAILURE = "AuthFailure"


@dataclass(frozen=True)
class Verdict:
    reason: RejectReason | None = None

    @property
    def accepted(self) -> bool:
        return self.reason is None

    def __str__(self) -> str:
        return "Accept" if self.accepted else f"Reject({self.reason.value})"


ACCEPT = Verdict()


@dataclass
class Policy:
    delta: int = 2  # timestamp window in ticks
    norm_bound: float | None = None  # None disables the anomaly filter


def validate_submission(
    sub: Submission,
    registry: Registry,
    nonces: NonceRegistry,
    clock: int,
    policy: Policy,
    params: FieldParams,
) -> Verdict:
    """First failing check wins: registry, signature, freshness, nonce, norm."""
    if sub.sender not in registry:
        return Verdict(RejectReason.UNREGISTERED_SENDER)
    if sub.sig is None or not crypto.verify(registry.pk_of(sub.sender), sub.signed_body(), sub.sig, params):
        return Verdict(RejectReason.BAD_SIGNATURE)
    if abs(sub.timestamp - clock) > policy.delta:
        return Verdict(RejectReason.STALE_TIMESTAMP)
    if nonces.seen(sub.sender, sub.nonce):
        return Verdict(RejectReason.REPLAYED_NONCE)
    if policy.norm_bound is not None and not sub.declared_norm <= policy.norm_bound:
        return Verdict(RejectReason.ANOMALOUS_MAGNITUDE)
    return ACCEPT


def audit_declared_norm(
    sub: Submission,
    weights: np.ndarray,
    blindings: Sequence[int],
    reference: np.ndarray,
    params: FieldParams,
) -> bool:
    """Cross-check a declared update norm against the published commitments.

    The participant opens its (quantized) weights and per-coordinate total
    blindings to an auditor.  Passes iff the opening matches the product of
    the share commitments and the real update norm does not exceed the
    declared one by more than the quantization slack.
    """
    q = params.q
    for j, w in enumerate(weights):
        value = sub.n_samples * encode_fixed(w, params) % q
        column = [Commitment(row[j]) for row in sub.share_commitments]
        if not crypto.open_check(crypto.combine(column, params), value, blindings[j], params):
            return False
    slack = np.sqrt(len(weights)) / params.scale
    return float(np.linalg.norm(np.asarray(weights) - reference)) <= sub.declared_norm + slack


# -- oracles, consensus, slashing --------------------------------------------


class NodeStatus(str, Enum):
    ACTIVE = "active"
    SLASHED = "slashed"


@dataclass
class OracleNode:
    id: str
    keypair: KeyPair
    stake: float
    reputation: float = 1.0
    status: NodeStatus = NodeStatus.ACTIVE

    @property
    def active(self) -> bool:
        return self.status is NodeStatus.ACTIVE


class QuorumUnreachable(RuntimeError):
    pass


class AlreadySlashed(RuntimeError):
    pass


class Outcome(str, Enum):
    COMMITTED = "Committed"
    ABORTED = "Aborted"


@dataclass(frozen=True)
class ConsensusDecision:
    proposal: str
    votes: dict[str, bool]
    outcome: Outcome

    @property
    def yes(self) -> int:
        return sum(self.votes.values())


def quorum(f: int) -> int:
    return 2 * f + 1


def consensus_round(
    oracles: Sequence[OracleNode],
    proposal: str,
    f: int,
    honest_check: Callable[[OracleNode], bool] | bool = True,
    byzantine: Collection[str] = (),
    byzantine_vote: bool = False,
) -> ConsensusDecision:
    """Single-shot quorum vote over the 3f+1 seats of the oracle committee.

    Slashed seats cast no yes-vote.  Committed iff yes >= 2f + 1.
    """
    if len(oracles) < 3 * f + 1:
        raise QuorumUnreachable(f"{len(oracles)} oracles cannot tolerate f={f}")
    votes: dict[str, bool] = {}
    for o in sorted(oracles, key=lambda o: o.id):
        if not o.active:
            votes[o.id] = False
        elif o.id in byzantine:
            votes[o.id] = byzantine_vote
        else:
            votes[o.id] = bool(honest_check(o) if callable(honest_check) else honest_check)
    outcome = Outcome.COMMITTED if sum(votes.values()) >= quorum(f) else Outcome.ABORTED
    return ConsensusDecision(proposal, votes, outcome)


def slash(
    oracle: OracleNode,
    fraction: float,
    reason: str,
    min_stake: float,
    ledger: Ledger | None = None,
    clock: int = 0,
) -> OracleNode:
    if not oracle.active:
        raise AlreadySlashed(oracle.id)
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must be in [0, 1]")
    oracle.stake *= 1.0 - fraction
    oracle.reputation = max(0.0, oracle.reputation - REPUTATION_PENALTY)
    if oracle.stake < min_stake:
        oracle.status = NodeStatus.SLASHED
    if ledger is not None:
        ledger.append(slash_event(oracle.id, fraction, reason, oracle.stake, oracle.status.value), clock)
    return oracle


@dataclass
class OracleCommittee:
    """The 3f+1 oracle seats; the computation set is the active subset."""

    f: int
    nodes: list[OracleNode] = field(default_factory=list)

    def by_id(self, oracle_id: str) -> OracleNode:
        for o in self.nodes:
            if o.id == oracle_id:
                return o
        raise KeyError(oracle_id)

    def active(self) -> list[OracleNode]:
        return [o for o in self.nodes if o.active]

    def excluded(self) -> list[OracleNode]:
        return [o for o in self.nodes if not o.active]
