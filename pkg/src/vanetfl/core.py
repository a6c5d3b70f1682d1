"""Shared arithmetic substrate: field parameters, fixed-point encoding,
seeded randomness and canonical serialization.

Every other module works on integers modulo a prime ``q``.  Real-valued
model weights enter the field through :func:`encode_fixed` and leave it
through :func:`decode_fixed`; additions in between are exact.

Commitments live in the order-``q`` subgroup of ``Z_p*``.  Both subgroup
generators are derived by hashing a public label into the group, so no
simulated party knows ``log_g(h)``.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, fields, is_dataclass
from enum import Enum
from functools import lru_cache
from typing import Any, Iterable

import numpy as np

MERSENNE_61 = 2**61 - 1
DEFAULT_SCALE = 2**16

# p = 2 * q * 26 + 1 is the smallest prime of that form for q = 2^61 - 1.
_TEST_P = 2 * MERSENNE_61 * 26 + 1

_SECURE_Q = 2**255 - 19
# 2048-bit p with q | p - 1; the cofactor search starts from a value
# derived from sha256(b"vanetfl-secure-profile") and walks upward.
_SECURE_P = int(
    "c4f36d67d2521cd19caae52bdcfa3ec288605ce7ccc0664dd32a13c4ccc001a8"
    "c4f36d67d2521cd19caae52bdcfa3ec288605ce7ccc0664dd32a13c4ccc001a8"
    "c4f36d67d2521cd19caae52bdcfa3ec288605ce7ccc0664dd32a13c4ccc001a8"
    "c4f36d67d2521cd19caae52bdcfa3ec288605ce7ccc0664dd32a13c4ccc001a8"
    "c4f36d67d2521cd19caae52bdcfa3ec288605ce7ccc0664dd32a13c4ccc001a8"
    "c4f36d67d2521cd19caae52bdcfa3ec288605ce7ccc0664dd32a13c4ccc001a9"
    "44aeeaf381c34bb1865c77eb38d10aef5e68fdf006df835e5ff75fcb76e4d9ee"
    "28639d0191c7a7fac48b694469bbcb96c092d65c1fa183adc75b53582862d863",
    16,
)

# Small enough (p < 2^16) to brute-force discrete logs in tests.
_TINY_Q = 4093
_TINY_P = 2 * _TINY_Q * 6 + 1


_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)


def is_probable_prime(n: int) -> bool:
    """Miller-Rabin with fixed small-prime bases (deterministic below 3.3e24)."""
    if n < 2:
        return False
    for b in _MR_BASES:
        if n % b == 0:
            return n == b
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def hash_to_subgroup(label: str, p: int, q: int) -> int:
    """Map a public label to a non-identity element of the order-q subgroup."""
    cofactor = (p - 1) // q
    ctr = 0
    while True:
        h = hashlib.sha256(f"{label}|{p}|{ctr}".encode()).digest()
        x = int.from_bytes(h * (p.bit_length() // 256 + 2), "big") % p
        y = pow(x, cofactor, p)
        if y not in (0, 1):
            return y
        ctr += 1


@dataclass(frozen=True)
class FieldParams:
    """Prime field for shares plus the commitment group over it.

    ``max_abs_weight`` and ``max_total_samples`` are the headroom budget:
    the constructor refuses parameters whose aggregation could wrap mod q.
    """

    name: str
    q: int
    scale: int
    p: int
    g: int
    h: int
    max_abs_weight: float = 1e3
    max_total_samples: int = 100_000

    def __post_init__(self) -> None:
        if self.scale < 2 or self.scale & (self.scale - 1):
            raise ValueError("scale must be a power of two >= 2")
        if not is_probable_prime(self.q):
            raise ValueError("q must be prime")
        budget = 2 * self.scale**2 * self.max_abs_weight * self.max_total_samples
        if self.q <= budget:
            raise ValueError(f"q={self.q} leaves no headroom for {budget:.3g}")
        if (self.p - 1) % self.q:
            raise ValueError("q must divide p - 1")
        for name in ("g", "h"):
            v = getattr(self, name)
            if v in (0, 1) or pow(v, self.q, self.p) != 1:
                raise ValueError(f"{name} does not generate the order-q subgroup")

    @property
    def element_bytes(self) -> int:
        return (self.p.bit_length() + 7) // 8


def make_params(name: str, q: int, p: int, scale: int = DEFAULT_SCALE, **kw: Any) -> FieldParams:
    g = hash_to_subgroup(f"{name}/generator-g", p, q)
    h = hash_to_subgroup(f"{name}/generator-h", p, q)
    return FieldParams(name=name, q=q, scale=scale, p=p, g=g, h=h, **kw)


@lru_cache(maxsize=None)
def profile(name: str = "test") -> FieldParams:
    """Published parameter profiles: ``test``, ``secure`` and ``tiny``.

    ``tiny`` has scale 2 and a 16-bit group; it only exists so tests can
    brute-force the commitment group.
    """
    if name == "test":
        return make_params("test", MERSENNE_61, _TEST_P)
    if name == "secure":
        return make_params("secure", _SECURE_Q, _SECURE_P)
    if name == "tiny":
        return make_params("tiny", _TINY_Q, _TINY_P, scale=2, max_abs_weight=1.0, max_total_samples=1)
    raise ValueError(f"unknown profile {name!r}")


# -- fixed-point encoding -------------------------------------------------


def encode_fixed(x: float, params: FieldParams) -> int:
    scaled = float(x) * params.scale
    if not math.isfinite(scaled) or abs(scaled) >= params.q / 2:
        raise OverflowError(f"{x!r} does not fit the field at scale {params.scale}")
    return int(round(scaled)) % params.q


def to_signed(e: int, q: int) -> int:
    return e - q if e > q // 2 else e


def decode_fixed(e: int, params: FieldParams) -> float:
    return to_signed(int(e), params.q) / params.scale


def encode_vector(xs: Iterable[float], params: FieldParams) -> list[int]:
    return [encode_fixed(x, params) for x in xs]


def decode_vector(es: Iterable[int], params: FieldParams) -> np.ndarray:
    return np.array([decode_fixed(e, params) for e in es], dtype=float)


def quantize(xs: Iterable[float], params: FieldParams) -> np.ndarray:
    """Round reals onto the fixed-point grid (what the field can carry)."""
    return decode_vector(encode_vector(xs, params), params)


# -- seeded randomness ----------------------------------------------------


class Rng:
    """Counter-based (Philox) generator keyed by ``(seed, label path)``.

    Forking never consumes from the parent, so adding a new consumer under
    a fresh label leaves every other stream untouched.
    """

    def __init__(self, seed: int, path: str = ""):
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned value")
        self.seed = seed
        self.path = path
        key = hashlib.sha256(seed.to_bytes(8, "big") + path.encode()).digest()[:16]
        self._gen = np.random.Generator(np.random.Philox(key=int.from_bytes(key, "big")))

    def fork(self, label: str) -> Rng:
        return Rng(self.seed, f"{self.path}/{label}")

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, path={self.path!r})"

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, low: float = 0.0, high: float = 1.0, size: Any = None) -> Any:
        return self._gen.uniform(low, high, size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size: Any = None) -> Any:
        return self._gen.normal(loc, scale, size)

    def integers(self, low: int, high: int, size: Any = None) -> Any:
        return self._gen.integers(low, high, size)

    def randbits(self, bits: int) -> int:
        nbytes = (bits + 7) // 8
        v = int.from_bytes(self._gen.bytes(nbytes), "big")
        return v >> (8 * nbytes - bits)

    def below(self, n: int) -> int:
        """Exactly uniform integer in [0, n) by rejection."""
        bits = max(1, (n - 1).bit_length())
        while True:
            v = self.randbits(bits)
            if v < n:
                return v

    def field_element(self, q: int) -> int:
        return self.below(q)

    def nonce(self) -> int:
        return self.randbits(128)


def rng_fork(rng: Rng, label: str) -> Rng:
    return rng.fork(label)


# -- canonical serialization ----------------------------------------------


def _len4(n: int) -> bytes:
    return n.to_bytes(4, "big")


def canonical(obj: Any) -> bytes:
    """Deterministic tagged byte encoding used for hashing and signing.

    Integers are sign byte + length-prefixed big-endian magnitude; maps are
    emitted with sorted keys; dataclasses encode as maps of their fields.
    """
    if obj is None:
        return b"N"
    if isinstance(obj, (bool, np.bool_)):
        return b"T" if obj else b"F"
    if isinstance(obj, Enum):
        return canonical(obj.value)
    if isinstance(obj, (int, np.integer)):
        v = int(obj)
        mag = abs(v).to_bytes((abs(v).bit_length() + 7) // 8, "big")
        return b"I" + (b"-" if v < 0 else b"+") + _len4(len(mag)) + mag
    if isinstance(obj, (float, np.floating)):
        return b"D" + struct.pack(">d", float(obj))
    if isinstance(obj, str):
        raw = obj.encode("utf-8")
        return b"S" + _len4(len(raw)) + raw
    if isinstance(obj, (bytes, bytearray)):
        return b"B" + _len4(len(obj)) + bytes(obj)
    if isinstance(obj, np.ndarray):
        return canonical(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return b"L" + _len4(len(obj)) + b"".join(canonical(x) for x in obj)
    if isinstance(obj, (set, frozenset)):
        items = sorted(canonical(x) for x in obj)
        return b"L" + _len4(len(items)) + b"".join(items)
    if isinstance(obj, dict):
        keys = sorted(obj)
        if not all(isinstance(k, str) for k in keys):
            raise TypeError("canonical maps need str keys")
        body = b"".join(canonical(k) + canonical(obj[k]) for k in keys)
        return b"M" + _len4(len(keys)) + body
    if is_dataclass(obj):
        return canonical({f.name: getattr(obj, f.name) for f in fields(obj)})
    raise TypeError(f"no canonical encoding for {type(obj).__name__}")


def digest(obj: Any) -> str:
    """Hex SHA-256 of the canonical encoding."""
    return hashlib.sha256(canonical(obj)).hexdigest()

