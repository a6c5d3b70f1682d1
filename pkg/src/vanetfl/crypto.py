"""Signatures, authenticated encryption, additive sharing and commitments.

All group arithmetic happens in the order-q subgroup described by a
:class:`~vanetfl.core.FieldParams`.  None of this is hardened; it is a
faithful, deterministic model of the primitives for simulation.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from typing import Sequence

from .core import FieldParams, Rng, canonical


class AuthFailure(Exception):
    """AEAD tag did not verify (payload, nonce or claimed sender altered)."""


@dataclass(frozen=True)
class KeyPair:
    sk: int
    pk: int


@dataclass(frozen=True)
class Signature:
    e: int
    s: int


@dataclass(frozen=True)
class Commitment:
    c: int


@dataclass(frozen=True)
class Ciphertext:
    payload: bytes
    sender_pk: int
    recipient_id: str
    nonce: int
    tag: bytes


@dataclass(frozen=True)
class ShareSet:
    shares: tuple[int, ...]
    owner_hint: str | None = None
    round: int = 0


def _hash_to_scalar(q: int, *parts: object) -> int:
    h = hashlib.sha512(canonical(list(parts))).digest()
    return int.from_bytes(h, "big") % q


def keygen(rng: Rng, params: FieldParams) -> KeyPair:
    sk = 1 + rng.below(params.q - 1)
    return KeyPair(sk, pow(params.g, sk, params.p))


# -- Schnorr signatures ---------------------------------------------------


def sign(sk: int, message: bytes, params: FieldParams) -> Signature:
    """Schnorr signature with a deterministic, key-derived nonce."""
    pk = pow(params.g, sk, params.p)
    k = 1 + _hash_to_scalar(params.q - 1, "nonce", sk, message)
    r = pow(params.g, k, params.p)
    e = _hash_to_scalar(params.q, "challenge", r, pk, message)
    return Signature(e, (k + e * sk) % params.q)


def verify(pk: int, message: bytes, sig: Signature, params: FieldParams) -> bool:
    try:
        if not (0 < pk < params.p and 0 <= sig.s < params.q and 0 <= sig.e < params.q):
            return False
        # g^s * pk^-e == g^k
        r = pow(params.g, sig.s, params.p) * pow(pk, params.q - sig.e, params.p) % params.p
        return _hash_to_scalar(params.q, "challenge", r, pk, message) == sig.e
    except (TypeError, AttributeError, ValueError):
        return False


# -- authenticated encryption -----------------------------------------------


def _session_keys(shared: int, nonce: int) -> tuple[bytes, bytes]:
    base = hashlib.sha256(canonical(["aead", shared, nonce])).digest()
    return (
        hmac.new(base, b"enc", hashlib.sha256).digest(),
        hmac.new(base, b"mac", hashlib.sha256).digest(),
    )


def _keystream(key: bytes, n: int) -> bytes:
    out = bytearray()
    ctr = 0
    while len(out) < n:
        out += hmac.new(key, ctr.to_bytes(8, "big"), hashlib.sha256).digest()
        ctr += 1
    return bytes(out[:n])


def _tag(mac_key: bytes, nonce: int, payload: bytes, sender_pk: int, recipient_id: str) -> bytes:
    return hmac.new(mac_key, canonical([nonce, payload, sender_pk, recipient_id]), hashlib.sha256).digest()


def aead_encrypt(sender: KeyPair, recipient_pk: int, recipient_id: str, plaintext: bytes, nonce: int, params: FieldParams) -> Ciphertext:
    """Encrypt under a Diffie-Hellman key shared by sender and recipient.

    The keystream is HMAC-SHA256 in counter mode; the tag covers
    nonce, ciphertext, sender public key and recipient id.
    """
    shared = pow(recipient_pk, sender.sk, params.p)
    enc_key, mac_key = _session_keys(shared, nonce)
    body = bytes(a ^ b for a, b in zip(plaintext, _keystream(enc_key, len(plaintext))))
    return Ciphertext(body, sender.pk, recipient_id, nonce, _tag(mac_key, nonce, body, sender.pk, recipient_id))


def aead_decrypt(recipient: KeyPair, recipient_id: str, ct: Ciphertext, params: FieldParams) -> bytes:
    if ct.recipient_id != recipient_id:
        raise AuthFailure("ciphertext addressed to another recipient")
    if not 0 < ct.sender_pk < params.p:
        raise AuthFailure("malformed sender key")
    shared = pow(ct.sender_pk, recipient.sk, params.p)
    enc_key, mac_key = _session_keys(shared, ct.nonce)
    expected = _tag(mac_key, ct.nonce, ct.payload, ct.sender_pk, ct.recipient_id)
    if not hmac.compare_digest(expected, ct.tag):
        raise AuthFailure("tag mismatch")
    return bytes(a ^ b for a, b in zip(ct.payload, _keystream(enc_key, len(ct.payload))))


# -- additive secret sharing ------------------------------------------------


def share_additive(secret: int, k: int, rng: Rng, q: int, owner: str | None = None, round: int = 0) -> ShareSet:
    """Split ``secret`` into ``k`` summands mod q; any k-1 are uniform."""
    if k < 2:
        raise ValueError("need at least two shares")
    head = [rng.below(q) for _ in range(k - 1)]
    last = (secret - sum(head)) % q
    return ShareSet(tuple(head) + (last,), owner, round)


def reconstruct(shares: Sequence[int], q: int) -> int:
    return sum(shares) % q


# -- homomorphic commitments ------------------------------------------------


def commit(m: int, r: int, params: FieldParams) -> Commitment:
    """``g^m * h^r mod p``; hiding via ``r``, binding under discrete log."""
    return Commitment(pow(params.g, m % params.q, params.p) * pow(params.h, r % params.q, params.p) % params.p)


def open_check(c: Commitment, m: int, r: int, params: FieldParams) -> bool:
    return commit(m, r, params).c == c.c


def combine(commitments: Sequence[Commitment], params: FieldParams) -> Commitment:
    """Product of commitments, i.e. a commitment to the summed openings."""
    acc = 1
    for cm in commitments:
        acc = acc * cm.c % params.p
    return Commitment(acc)
