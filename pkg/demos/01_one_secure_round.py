"""One aggregation round by hand: share, commit, sum, verify, decode.

Three vehicles split their quantized updates across four oracles, the
oracles publish signed partial sums, and anyone holding the public
commitments can check those sums before decoding the average.
"""

from dataclasses import replace

import numpy as np

from vanetfl import crypto
from vanetfl.core import Rng, profile, quantize
from vanetfl.smpc import ProofFailure, fedavg_plaintext, make_envelopes, oracle_partial, verify_aggregate

params = profile("test")
rng = Rng(42, "demo")
oracles = ["oracle-0", "oracle-1", "oracle-2", "oracle-3"]
keys = {o: crypto.keygen(rng.fork(o), params) for o in oracles}

updates = {
    "veh-000": (np.array([0.50, -1.25, 2.00]), 120),
    "veh-001": (np.array([0.40, -1.00, 1.75]), 80),
    "veh-002": (np.array([0.65, -1.10, 2.10]), 200),
}

envelopes, commitments = {}, {}
for vid, (w, n) in updates.items():
    envelopes[vid], commitments[vid] = make_envelopes(w, n, oracles, params, rng.fork(vid), 1, vid)

print("what oracle-0 sees from veh-000:", envelopes["veh-000"][0].coords)

partials = [oracle_partial([envelopes[v][i] for v in sorted(envelopes)], o, params, keys[o]) for i, o in enumerate(oracles)]
pks = {o: k.pk for o, k in keys.items()}
total = sum(n for _, n in updates.values())
result = verify_aggregate(partials, commitments, total, params, oracles, pks)

plain = fedavg_plaintext([(quantize(w, params), n) for w, n in updates.values()])
print("secure aggregate:   ", result.weights)
print("plaintext FedAvg:   ", plain)
print("bit-exact:", np.array_equal(result.weights, plain))
print("model hash:", result.model_hash)

# A cheating oracle shifts its partial by one field unit and re-signs it.
bad = replace(partials[2], partial=((partials[2].partial[0] + 1) % params.q,) + partials[2].partial[1:], sig=None)
bad = replace(bad, sig=crypto.sign(keys["oracle-2"].sk, bad.signed_body(), params))
try:
    verify_aggregate(partials[:2] + [bad] + partials[3:], commitments, total, params, oracles, pks)
except ProofFailure as exc:
    print("tampered partial rejected; culprit:", exc.oracles)
