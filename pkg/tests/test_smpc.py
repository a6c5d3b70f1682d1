from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vanetfl import crypto
from vanetfl.core import Rng, encode_fixed, profile, quantize
from vanetfl.smpc import (
    EmptyRound,
    ProofFailure,
    RoundMismatch,
    ShareEnvelope,
    fedavg_plaintext,
    make_envelopes,
    oracle_partial,
    verify_aggregate,
)

ORACLES = ["o0", "o1", "o2"]


def _round(params, updates, oracles=ORACLES, seed=0, rnd=1):
    envs, comms = {}, {}
    for i, (w, n) in enumerate(updates):
        e, c = make_envelopes(w, n, oracles, params, Rng(seed, f"p{i}"), rnd, f"p{i}")
        envs[f"p{i}"], comms[f"p{i}"] = e, c
    keys = {o: crypto.keygen(Rng(seed, o), params) for o in oracles}
    partials = [oracle_partial([envs[s][i] for s in envs], o, params, keys[o]) for i, o in enumerate(oracles)]
    total = sum(n for _, n in updates)
    return envs, comms, partials, total, {o: k.pk for o, k in keys.items()}, keys


def test_zero_vector_shares_sum_to_zero(params):
    envs, _ = make_envelopes([0.0, 0.0], 5, ORACLES, params, Rng(0))
    for j in range(2):
        assert sum(e.coords[j] for e in envs) % params.q == 0


def test_reconstruction_loop(params):
    rng = Rng(4)
    for t in range(500):
        w = rng.uniform(-3, 3, size=3)
        n = int(rng.integers(1, 300))
        envs, comms = make_envelopes(w, n, ORACLES, params, rng, t)
        for j in range(3):
            assert sum(e.coords[j] for e in envs) % params.q == n * encode_fixed(w[j], params) % params.q


def test_commitment_product_opens_to_total(params):
    w, n = [0.75, -2.0], 40
    envs, comms = make_envelopes(w, n, ORACLES, params, Rng(8))
    for j in range(2):
        total_blind = sum(e.blindings[j] for e in envs) % params.q
        prod = crypto.combine([comms[i][j] for i in range(3)], params)
        assert crypto.open_check(prod, n * encode_fixed(w[j], params), total_blind, params)


def test_needs_two_oracles(params):
    with pytest.raises(ValueError):
        make_envelopes([1.0], 1, ["o0"], params, Rng(0))


def test_envelope_bytes_round_trip():
    e = ShareEnvelope(3, "v", "o1", (1, 2**60), (5, 6))
    assert ShareEnvelope.from_bytes(e.to_bytes()) == e


def test_partial_examples(params):
    e1 = ShareEnvelope(1, "a", "o0", (3, 4), (1, 1))
    assert oracle_partial([e1], "o0", params).partial == (3, 4)
    e2 = ShareEnvelope(1, "b", "o0", (params.q - 1, 10), (2, 2))
    p = oracle_partial([e1, e2], "o0", params)
    assert p.partial == (2, 14) and p.blinding_sum == (3, 3) and p.contributors == ("a", "b")


def test_partial_errors(params):
    with pytest.raises(EmptyRound):
        oracle_partial([], "o0", params)
    with pytest.raises(RoundMismatch):
        oracle_partial([ShareEnvelope(1, "a", "o0", (1,), (1,)), ShareEnvelope(2, "b", "o0", (1,), (1,))], "o0", params)
    with pytest.raises(ValueError):
        oracle_partial([ShareEnvelope(1, "a", "o1", (1,), (1,))], "o0", params)


def test_honest_round_matches_plaintext(params):
    updates = [([0.5, -1.25, 3.0], 10), ([0.1, 0.2, 0.3], 30), ([-2.0, 0.0, 1e-3], 7)]
    _, comms, partials, total, pks, _ = _round(params, updates)
    res = verify_aggregate(partials, comms, total, params, ORACLES, pks)
    assert res.verified and res.contributing == ("p0", "p1", "p2")
    plain = fedavg_plaintext([(quantize(w, params), n) for w, n in updates])
    assert np.array_equal(res.weights, plain)


@given(st.lists(st.tuples(st.lists(st.floats(-50, 50), min_size=3, max_size=3), st.integers(1, 500)), min_size=1, max_size=6))
def test_equivalence_property(updates):
    p = profile("test")
    _, comms, partials, total, pks, _ = _round(p, updates, oracles=ORACLES[:2])
    res = verify_aggregate(partials, comms, total, p, ORACLES[:2], pks)
    assert np.array_equal(res.weights, fedavg_plaintext([(quantize(w, p), n) for w, n in updates]))


def test_corrupted_partial_names_oracle(params):
    _, comms, partials, total, pks, keys = _round(params, [([1.0, 2.0], 5), ([3.0, 4.0], 6)])
    bad = replace(partials[1], partial=(partials[1].partial[0] + 1,) + partials[1].partial[1:], sig=None)
    bad = replace(bad, sig=crypto.sign(keys["o1"].sk, bad.signed_body(), params))
    with pytest.raises(ProofFailure) as exc:
        verify_aggregate([partials[0], bad, partials[2]], comms, total, params, ORACLES, pks)
    assert exc.value.oracles == ("o1",)


def test_unsigned_or_missing_partial(params):
    _, comms, partials, total, pks, _ = _round(params, [([1.0], 5)])
    with pytest.raises(ProofFailure) as exc:
        verify_aggregate([partials[0], replace(partials[1], sig=None)], comms, total, params, ORACLES, pks)
    assert exc.value.oracles == ("o1", "o2")


def test_contributor_mismatch(params):
    _, comms, partials, total, pks, keys = _round(params, [([1.0], 5), ([2.0], 5)])
    dropped = dict(comms)
    dropped.pop("p1")
    with pytest.raises(ProofFailure) as exc:
        verify_aggregate(partials, dropped, total, params, ORACLES, pks)
    assert exc.value.oracles == tuple(ORACLES)


def test_short_partial_is_caught(params):
    _, comms, partials, total, _, _ = _round(params, [([1.0, 2.0], 5)])
    short = replace(partials[0], partial=partials[0].partial[:1], blinding_sum=partials[0].blinding_sum[:1])
    with pytest.raises(ProofFailure):
        verify_aggregate([short] + partials[1:], comms, total, params, ORACLES)


def test_empty_round(params):
    with pytest.raises(EmptyRound):
        verify_aggregate([], {}, 1, params, ORACLES)


def test_fedavg_examples():
    assert np.array_equal(fedavg_plaintext([([1.0, 2.0], 4)]), [1.0, 2.0])
    assert np.array_equal(fedavg_plaintext([([1.0, -2.0], 3), ([-1.0, 2.0], 3)]), [0.0, 0.0])
    assert fedavg_plaintext([([2.0], 1), ([5.0], 3)])[0] == 4.25
    with pytest.raises(EmptyRound):
        fedavg_plaintext([])
    with pytest.raises(ValueError):
        fedavg_plaintext([([1.0], 1), ([1.0, 2.0], 1)])


def test_model_hash_stable(params):
    _, comms, partials, total, pks, _ = _round(params, [([1.0], 5)])
    a = verify_aggregate(partials, comms, total, params, ORACLES, pks)
    b = verify_aggregate(partials, comms, total, params, ORACLES, pks)
    assert a.model_hash == b.model_hash and len(a.model_hash) == 64
