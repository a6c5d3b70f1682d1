from dataclasses import replace

import numpy as np
import pytest

from vanetfl.adversary import (
    Adversary,
    AttackKind,
    AttackScenario,
    LeakPatterns,
    channel_transform,
    count_leaks,
)
from vanetfl.core import Rng, canonical, encode_fixed
from vanetfl.matrix import UNMAPPED_ROWS, matrix_rows, run_scenario
from vanetfl.oracles import RejectReason
from vanetfl.simulation import (
    AbortCascade,
    AttackReport,
    ConfigError,
    SimConfig,
    Simulation,
    run_simulation,
)

BASE = SimConfig(rounds=6)


@pytest.fixture(scope="module")
def clean():
    sim = Simulation(SimConfig())
    return sim, sim.run()


@pytest.fixture(scope="module")
def baseline():
    return Simulation(BASE).run().final_loss


@pytest.mark.parametrize(
    "kw",
    [
        {"n_oracles": 5},
        {"n_vehicles": 0},
        {"rounds": 0},
        {"f": 0},
        {"lr": 0.0},
        {"min_stake": 0.0},
        {"samples_min": 10, "samples_max": 5},
        {"profile": "huge"},
        {"attack": AttackScenario(AttackKind.BYZANTINE_ORACLE, corrupted_oracles=9)},
        {"attack": AttackScenario(AttackKind.REPLAY, victim=10)},
    ],
)
def test_config_errors(kw):
    with pytest.raises(ConfigError):
        SimConfig(**kw)


def test_config_replace_recomputes_seats():
    cfg = replace(SimConfig(), f=2)
    assert cfg.seats == 7


def quantization_floor(sim):
    # Largest loss change from moving every weight (and the bias) by one
    # fixed-point quantum: lambda_max(H) / 2 * (dim + 1) * 2**-32.
    xs = np.concatenate([np.hstack([v.dataset.features, np.ones((v.n_samples, 1))]) for v in sim.honest])
    lam = np.linalg.eigvalsh(2 * xs.T @ xs / len(xs)).max()
    return lam / 2 * xs.shape[1] * 2.0**-32


def test_attack_free_run(clean):
    sim, trace = clean
    assert len(trace) == 20
    assert trace.final_loss <= 0.1**2 + 0.01
    losses = [r.loss for r in trace.rounds]
    assert all(b <= a + quantization_floor(sim) for a, b in zip(losses[2:], losses[3:]))
    assert all(r.outcome == "Committed" and r.plaintext_match for r in trace.rounds)
    assert all(len(r.accepted) == 10 and not r.rejected for r in trace.rounds)
    assert sim.ledger.verify().valid
    assert trace.rounds[-1].tip_hash == sim.ledger.tip_hash


def test_rounds_chain_through_provenance(clean):
    sim, trace = clean
    prov = [b.payload for b in sim.ledger.blocks if b.payload["type"] == "provenance"]
    assert [p["round"] for p in prov] == list(range(1, 21))
    assert prov[0]["parent_model_hash"] == "genesis"
    assert all(b["parent_model_hash"] == a["model_hash"] for a, b in zip(prov, prov[1:]))


def test_trace_json_round_trip(clean):
    import json

    _, trace = clean
    doc = json.loads(trace.to_json())
    assert len(doc["rounds"]) == 20 and doc["abort_reason"] is None


# -- channel -----------------------------------------------------------------


@pytest.fixture(scope="module")
def one_submission():
    sim = Simulation(SimConfig(rounds=1))
    v = sim.participants[0]
    return sim, sim._build(v, np.ones(5), sim.committee.active(), 1, "t")


def test_channel_identity(one_submission):
    _, sub = one_submission
    assert [d.submission for d in channel_transform(sub, None, Rng(0))] == [sub]


def test_channel_eavesdrop_copies(one_submission, params):
    _, sub = one_submission
    adv = Adversary(AttackScenario(AttackKind.EAVESDROP), Rng(0), params)
    out = adv.transmit(sub, None)
    assert [d.submission for d in out] == [sub] and adv.log == [canonical(sub)]


def test_channel_replay_duplicates(one_submission, params):
    _, sub = one_submission
    out = channel_transform(sub, AttackScenario(AttackKind.REPLAY), Rng(0))
    assert [d.submission for d in out] == [sub, sub] and [d.adversarial for d in out] == [False, True]


def test_channel_modification_caught(one_submission, params):
    sim, sub = one_submission
    (d,) = channel_transform(sub, AttackScenario(AttackKind.MESSAGE_MODIFICATION, flip_bytes=(3, 9)), Rng(0))
    assert d.submission.ciphertexts[0].payload != sub.ciphertexts[0].payload
    assert sim._open(d.submission, sim.committee.active()) is None


def test_channel_mitm_and_forgery_fail_signature(one_submission, params):
    sim, sub = one_submission
    from vanetfl.oracles import validate_submission

    adv = Adversary(AttackScenario(AttackKind.MAN_IN_THE_MIDDLE), Rng(0), params)
    (d,) = channel_transform(sub, adv.scenario, adv.rng, adv)
    v = validate_submission(d.submission, sim.registry, sim.ledger.nonces, sub.timestamp, sim.policy, params)
    assert v.reason is RejectReason.BAD_SIGNATURE
    ghost = Adversary(AttackScenario(AttackKind.IMPERSONATION, impersonation_mode="unregistered"), Rng(0), params)
    out = channel_transform(sub, ghost.scenario, ghost.rng, ghost)
    v = validate_submission(out[1].submission, sim.registry, sim.ledger.nonces, sub.timestamp, sim.policy, params)
    assert v.reason is RejectReason.UNREGISTERED_SENDER


def test_channel_needs_adversary_for_active_attacks(one_submission):
    _, sub = one_submission
    with pytest.raises(ValueError):
        channel_transform(sub, AttackScenario(AttackKind.MAN_IN_THE_MIDDLE), Rng(0))


def test_unknown_scenario_options():
    with pytest.raises(ValueError):
        AttackScenario(AttackKind.BYZANTINE_ORACLE, byzantine_mode="loud")
    with pytest.raises(ValueError):
        AttackScenario("NotAnAttack")


# -- leak audit --------------------------------------------------------------


def test_leak_patterns_find_planted_values(params):
    pats = LeakPatterns()
    pats.add_value(0.123456789, params, (1, 40))
    blob = b"xx" + canonical(0.123456789) + b"yy"
    assert count_leaks(blob, pats) == 1
    blob = b'{"w":[0.123456789]}'
    assert count_leaks(blob, pats) == 1
    e = 40 * encode_fixed(0.123456789, params) % params.q
    assert count_leaks(b'{"c":' + str(e).encode() + b"}", pats) == 1
    assert count_leaks(b'{"c":9' + str(e).encode() + b"}", pats) == 0
    assert count_leaks(b'"ab' + str(e).encode() + b'cd"', pats) == 0


def test_plaintext_channel_leaks():
    cfg = SimConfig(rounds=2, secure_channel=False, attack=AttackScenario(AttackKind.EAVESDROP))
    sim = Simulation(cfg)
    sim.run()
    assert sim.channel_leaks() > 0


# -- scenarios -----------------------------------------------------------------


def test_report_invariant():
    with pytest.raises(ValueError):
        AttackReport("Replay", detected=False, blocked=True, detection_mechanism="nonce", accuracy_delta=0.0)


@pytest.mark.parametrize(
    "scenario,mechanism",
    [
        (AttackScenario(AttackKind.REPLAY), "nonce"),
        (AttackScenario(AttackKind.MESSAGE_MODIFICATION), "aead-tag"),
        (AttackScenario(AttackKind.MAN_IN_THE_MIDDLE), "signature"),
        (AttackScenario(AttackKind.IMPERSONATION), "signature"),
        (AttackScenario(AttackKind.IMPERSONATION, impersonation_mode="unregistered"), "registry"),
    ],
)
def test_channel_scenarios(baseline, scenario, mechanism):
    _, rep = run_simulation(replace(BASE, attack=scenario), baseline)
    assert (rep.detected, rep.blocked, rep.detection_mechanism, rep.accuracy_delta) == (True, True, mechanism, 0.0)


def test_replay_later_round_only(baseline):
    trace, rep = run_simulation(replace(BASE, attack=AttackScenario(AttackKind.REPLAY, start_round=4)), baseline)
    assert [len(r.rejected) for r in trace.rounds] == [0, 0, 0, 1, 1, 1]
    assert rep.adversarial_messages == 3


def test_sybil_scenario(baseline):
    sc = AttackScenario(AttackKind.SYBIL, sybil_ids=50, sybil_budget=3)
    _, rep = run_simulation(replace(BASE, attack=sc), baseline)
    assert rep.blocked and rep.detection_mechanism.startswith("stake")
    assert "3 of 50" in rep.notes


def test_sybil_without_contributor_stake(baseline):
    sc = AttackScenario(AttackKind.SYBIL, sybil_ids=50, sybil_budget=3)
    _, rep = run_simulation(replace(BASE, contributor_stake=False, attack=sc), baseline)
    assert "50 of 50" in rep.notes and not rep.blocked


def test_sybil_majority_captures_norm_threshold(baseline):
    # Stake still caps admission at the budget, but ten funded sybils are
    # half the round: the median of declared norms, and so tau, is theirs.
    sc = AttackScenario(AttackKind.SYBIL, sybil_ids=50, sybil_budget=10)
    _, rep = run_simulation(replace(BASE, attack=sc), baseline)
    assert "10 of 50" in rep.notes
    assert rep.detected and not rep.blocked


def test_poisoning_and_control(baseline):
    sc = AttackScenario(AttackKind.DATA_POISONING)
    _, on = run_simulation(replace(BASE, attack=sc), baseline)
    _, off = run_simulation(replace(BASE, attack=sc, defense=False), baseline)
    assert on.blocked and on.detection_mechanism == "norm-filter"
    assert not off.blocked and off.accuracy_delta > on.accuracy_delta


def test_fixed_tau():
    sc = AttackScenario(AttackKind.DATA_POISONING)
    trace, _ = run_simulation(replace(BASE, rounds=2, tau=1e-9, attack=sc), 0.0)
    assert all(r.outcome == "Aborted" and not r.accepted for r in trace.rounds)


@pytest.mark.parametrize("f", [1, 2])
def test_byzantine_within_tolerance(baseline, f):
    cfg = replace(BASE, f=f, rounds=3, attack=AttackScenario(AttackKind.BYZANTINE_ORACLE, corrupted_oracles=f))
    trace, rep = run_simulation(cfg)
    assert rep.blocked and rep.detection_mechanism == "commitment"
    assert rep.slashed_nodes == [f"oracle-{i}" for i in range(f)]
    assert trace.rounds[0].attempts == 2 and all(r.attempts == 1 for r in trace.rounds[1:])
    assert rep.accuracy_delta == 0.0


def test_byzantine_over_threshold_quorum_off():
    cfg = replace(BASE, quorum=False, attack=AttackScenario(AttackKind.BYZANTINE_ORACLE, corrupted_oracles=2))
    with pytest.raises(AbortCascade) as exc:
        run_simulation(cfg)
    assert len(exc.value.trace) == 0 and "excluded" in exc.value.trace.abort_reason
    rep = run_scenario(cfg, 0.0)
    assert rep.over_threshold and not rep.blocked and rep.outcome == "cascade"


def test_byzantine_votes_only(baseline):
    cfg = replace(BASE, rounds=2, attack=AttackScenario(AttackKind.BYZANTINE_ORACLE, byzantine_mode="votes"))
    trace, rep = run_simulation(cfg)
    assert all(r.yes_votes == 3 and r.outcome == "Committed" for r in trace.rounds)
    assert rep.blocked and rep.detection_mechanism == "quorum" and rep.slashed_nodes == []


def test_matrix_rows_cover_table():
    labels = [r.label for r in matrix_rows(BASE)]
    assert len(labels) == len(set(labels)) >= 11
    assert not set(labels) & set(UNMAPPED_ROWS)
    assert sum(r.control for r in matrix_rows(BASE)) == 1


def test_out_of_range_update_is_not_uploaded():
    # a 1e6-scaled poison exceeds max_abs_weight; the sender sits the round out
    sc = AttackScenario(AttackKind.DATA_POISONING, poison_scale=1e6)
    sim = Simulation(replace(BASE, rounds=2, defense=False, attack=sc))
    trace = sim.run()
    assert all(r.outcome == "Committed" and r.plaintext_match for r in trace.rounds)
    assert all("veh-000" not in r.accepted and len(r.accepted) == 9 for r in trace.rounds)
