"""Attack scenarios, the adversarial channel and leak audits.

The channel sits between vehicles and the oracle network.  It can drop
copies of messages into an eavesdropper's log, re-inject captured
messages, flip ciphertext bytes, substitute adversary-signed content, or
forge messages under someone else's name.  Every message it emits is
tagged so the harness knows (and the oracles do not) which ones are
adversarial.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable

import numpy as np

from . import crypto
from .core import FieldParams, Rng, canonical, encode_fixed
from .crypto import Ciphertext
from .oracles import Submission
from .smpc import ShareEnvelope


class AttackKind(str, Enum):
    REPLAY = "Replay"
    MESSAGE_MODIFICATION = "MessageModification"
    MAN_IN_THE_MIDDLE = "ManInTheMiddle"
    SYBIL = "Sybil"
    DATA_POISONING = "DataPoisoning"
    BYZANTINE_ORACLE = "ByzantineOracle"
    IMPERSONATION = "Impersonation"
    EAVESDROP = "Eavesdrop"
    LEDGER_TAMPERING = "LedgerTampering"


CHANNEL_KINDS = {
    AttackKind.REPLAY,
    AttackKind.MESSAGE_MODIFICATION,
    AttackKind.MAN_IN_THE_MIDDLE,
    AttackKind.IMPERSONATION,
    AttackKind.EAVESDROP,
}


@dataclass(frozen=True)
class AttackScenario:
    """Adversary configuration.

    ``victim`` indexes the targeted vehicle (channel attacks, poisoning).
    ``corrupted_oracles`` above ``f`` makes an over-threshold run.
    ``byzantine_mode`` is ``"partials"``, ``"votes"`` or ``"both"``.
    ``impersonation_mode`` is ``"forge"`` (claims a registered id) or
    ``"unregistered"`` (a fresh pseudonym nobody staked for).
    ``audit`` picks what the eavesdrop audit inspects: the adversary's
    channel log or the exported ledger.
    """

    kind: AttackKind
    start_round: int = 1
    victim: int = 0
    poison_scale: float = 100.0
    n_malicious: int = 1
    sybil_ids: int = 50
    sybil_budget: float = 3.0  # multiples of min_stake
    corrupted_oracles: int = 1
    byzantine_mode: str = "both"
    flip_bytes: tuple[int, ...] = (0,)
    impersonation_mode: str = "forge"
    audit: str = "channel"

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", AttackKind(self.kind))
        if self.byzantine_mode not in ("partials", "votes", "both"):
            raise ValueError(f"unknown byzantine_mode {self.byzantine_mode!r}")
        if self.impersonation_mode not in ("forge", "unregistered"):
            raise ValueError(f"unknown impersonation_mode {self.impersonation_mode!r}")
        if self.audit not in ("channel", "ledger"):
            raise ValueError(f"unknown audit target {self.audit!r}")


@dataclass(frozen=True)
class Delivery:
    submission: Submission
    adversarial: bool = False


class Adversary:
    """State the attacker carries across messages: its key and its log."""

    def __init__(self, scenario: AttackScenario | None, rng: Rng, params: FieldParams):
        self.scenario = scenario
        self.rng = rng
        self.params = params
        self.keypair = crypto.keygen(rng.fork("key"), params)
        self.log: list[bytes] = []
        self.captured: list[Submission] = []
        self._ghosts = 0

    def targets(self, sub: Submission, victim_id: str | None, first_transmission: bool) -> bool:
        s = self.scenario
        if s is None or s.kind not in CHANNEL_KINDS or sub.round < s.start_round:
            return False
        if s.kind is AttackKind.EAVESDROP:
            return True
        return first_transmission and sub.sender == victim_id

    def transmit(self, sub: Submission, victim_id: str | None, first_transmission: bool = True) -> list[Delivery]:
        if not self.targets(sub, victim_id, first_transmission):
            return [Delivery(sub)]
        return channel_transform(sub, self.scenario, self.rng, self)

    def forge(self, template: Submission, sender: str) -> Submission:
        """A well-formed submission under ``sender`` signed with the attacker's key."""
        cts = tuple(self._garbage_ct(ct) for ct in template.ciphertexts)
        forged = replace(template, sender=sender, nonce=self.rng.nonce(), ciphertexts=cts, sig=None)
        return forged.signed(self.keypair.sk, self.params)

    def ghost_id(self) -> str:
        self._ghosts += 1
        return f"ghost-{self.rng.randbits(32):08x}"

    def _garbage_ct(self, ct: Ciphertext) -> Ciphertext:
        payload = bytes(self.rng.integers(0, 256, size=len(ct.payload)).astype("uint8").tolist())
        tag = bytes(self.rng.integers(0, 256, size=len(ct.tag)).astype("uint8").tolist())
        return Ciphertext(payload, self.keypair.pk, ct.recipient_id, self.rng.nonce(), tag)


def channel_transform(msg: Submission, scenario: AttackScenario | None, rng: Rng, adversary: Adversary | None = None) -> list[Delivery]:
    """Apply one scenario's channel behaviour to ``msg``.

    Returns the deliveries in arrival order.  Only ``Eavesdrop`` needs an
    ``adversary`` for its log; the active attacks need its signing key.
    """
    if scenario is None:
        return [Delivery(msg)]
    kind = scenario.kind
    if kind is AttackKind.EAVESDROP:
        if adversary is not None:
            adversary.log.append(canonical(msg))
            adversary.captured.append(msg)
        return [Delivery(msg)]
    if kind is AttackKind.REPLAY:
        return [Delivery(msg), Delivery(msg, adversarial=True)]
    if kind is AttackKind.MESSAGE_MODIFICATION:
        ct = msg.ciphertexts[0]
        body = bytearray(ct.payload)
        for pos in scenario.flip_bytes:
            body[pos % len(body)] ^= 0x01
        tampered = replace(msg, ciphertexts=(replace(ct, payload=bytes(body)),) + msg.ciphertexts[1:])
        return [Delivery(tampered, adversarial=True)]
    if adversary is None:
        raise ValueError(f"{kind.value} needs an adversary")
    if kind is AttackKind.MAN_IN_THE_MIDDLE:
        return [Delivery(adversary.forge(msg, msg.sender), adversarial=True)]
    if kind is AttackKind.IMPERSONATION:
        sender = msg.sender if scenario.impersonation_mode == "forge" else adversary.ghost_id()
        return [Delivery(msg), Delivery(adversary.forge(msg, sender), adversarial=True)]
    return [Delivery(msg)]


# -- leak audits -------------------------------------------------------------

_MIN_INT_BYTES = 3
_NUMBER_TOKEN = re.compile(rb"(?<![0-9A-Za-z_.+\-])-?[0-9][0-9.eE+\-]*(?![0-9A-Za-z_])")


@dataclass
class LeakPatterns:
    """What a leak would look like: raw byte patterns and decimal tokens."""

    binary: set[bytes] = field(default_factory=set)
    tokens: set[bytes] = field(default_factory=set)

    def add_value(self, v: float, params: FieldParams, n_samples: Iterable[int] = (1,)) -> None:
        """IEEE doubles in both byte orders, the decimal repr, and the
        fixed-point field encoding of ``n * v`` (binary and decimal)."""
        v = float(v)
        if v == 0.0 or not np.isfinite(v):
            return
        self.binary.add(struct.pack(">d", v))
        self.binary.add(struct.pack("<d", v))
        self.tokens.add(repr(v).encode())
        try:
            e = encode_fixed(v, params)
        except OverflowError:
            return
        for n in n_samples:
            self.add_int(n * e % params.q)

    def add_int(self, x: int) -> None:
        # Short integers collide with counters and sample counts by chance.
        if x.bit_length() > 8 * (_MIN_INT_BYTES - 1):
            self.binary.add(canonical(x))
            self.tokens.add(str(x).encode())

    def __len__(self) -> int:
        return len(self.binary) + len(self.tokens)


def count_leaks(blob: bytes, patterns: LeakPatterns) -> int:
    """Number of distinct patterns present in ``blob``.

    Decimal tokens only match whole numbers, never digit runs inside a
    longer number or a hex digest.
    """
    hits = 0
    for length in {len(p) for p in patterns.binary}:
        windows = {blob[i : i + length] for i in range(len(blob) - length + 1)}
        hits += sum(1 for p in patterns.binary if len(p) == length and p in windows)
    found = set(_NUMBER_TOKEN.findall(blob))
    hits += len(found & patterns.tokens)
    return hits


def recover_from_log(captured: Iterable[Submission], q: int) -> list[int]:
    """Everything an eavesdropper can rebuild from shares it can read.

    Payloads that parse as share envelopes (only possible when the
    channel is not encrypted) are summed per coordinate when the full
    set for a submission was captured.
    """
    out = []
    for sub in captured:
        try:
            envs = [ShareEnvelope.from_bytes(ct.payload) for ct in sub.ciphertexts]
        except (ValueError, UnicodeDecodeError, TypeError):
            continue
        for j in range(len(envs[0].coords)):
            out.append(sum(e.coords[j] for e in envs) % q)
    return out
