"""Lock-step round orchestration of the full pipeline.

One round: local training from the current global model, submission
build, channel adversary, oracle validation, share delivery, quorum vote
on the contributor set, partial sums, proof verification, ledger commit
and a provenance record.  Each protocol phase advances the clock by one
tick.

All randomness is forked from the config seed by purpose, round and
participant, so an attack never shifts the random streams of anything
it does not touch.  That is what makes same-seed baselines comparable.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np

from . import crypto
from .adversary import (
    Adversary,
    AttackKind,
    AttackScenario,
    Delivery,
    LeakPatterns,
    count_leaks,
    recover_from_log,
)
from .core import FieldParams, Rng, digest, profile, quantize
from .crypto import AuthFailure, Ciphertext, Commitment, KeyPair
from .ledger import GENESIS, Ledger, ProvenanceRecord, check_nonce, parse_chain, submission_event
from .oracles import (
    NodeStatus,
    OracleCommittee,
    OracleNode,
    Outcome,
    Policy,
    Registry,
    RejectReason,
    Submission,
    Wallet,
    consensus_round,
    register_participant,
    slash,
    validate_submission,
)
from .smpc import (
    PartialSumProof,
    ProofFailure,
    ShareEnvelope,
    fedavg_plaintext,
    make_envelopes,
    oracle_partial,
    verify_aggregate,
)
from .training import (
    Dataset,
    LocalModel,
    VehicleProfile,
    generate_dataset,
    generate_ground_truth,
    local_loss,
    train_local,
)


class ConfigError(ValueError):
    pass


class AbortCascade(RuntimeError):
    """More than ``f`` oracles were excluded; carries the trace so far."""

    def __init__(self, message: str, trace: RoundTrace, simulation: Simulation | None = None):
        super().__init__(message)
        self.trace = trace
        self.simulation = simulation


MECHANISM = {
    RejectReason.REPLAYED_NONCE: "nonce",
    RejectReason.BAD_SIGNATURE: "signature",
    RejectReason.AUTH_FAILURE: "aead-tag",
    RejectReason.UNREGISTERED_SENDER: "registry",
    RejectReason.STALE_TIMESTAMP: "timestamp",
    RejectReason.ANOMALOUS_MAGNITUDE: "norm-filter",
}

# Honest vehicles resend once when their upload was mangled in transit.
_RETRANSMIT_ON = {RejectReason.BAD_SIGNATURE, RejectReason.AUTH_FAILURE}


@dataclass(frozen=True)
class SimConfig:
    n_vehicles: int = 10
    f: int = 1
    n_oracles: int | None = None  # defaults to 3f + 1
    rounds: int = 20
    dim: int = 4
    epochs: int = 1
    lr: float = 0.25
    noise_std: float = 0.1
    min_stake: float = 100.0
    contributor_stake: bool = True  # vehicles stake too, not only oracles
    tau: float | None = None  # None: tau_multiplier x median declared norm of the warm-up round
    tau_multiplier: float = 5.0
    delta: int = 2
    profile: str = "test"
    seed: int = 0
    attack: AttackScenario | None = None
    defense: bool = True  # norm filter
    quorum: bool = True
    secure_channel: bool = True
    samples_min: int = 50
    samples_max: int = 200
    feature_shift: float = 0.5

    def __post_init__(self) -> None:
        n_oracles = self.seats
        for name in ("n_vehicles", "f", "rounds", "dim", "epochs", "delta", "samples_min"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if n_oracles != 3 * self.f + 1:
            raise ConfigError(f"n_oracles={n_oracles} but f={self.f} needs exactly 3f+1={3 * self.f + 1}")
        if self.samples_max < self.samples_min:
            raise ConfigError("samples_max must be >= samples_min")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if self.noise_std < 0 or self.feature_shift < 0:
            raise ConfigError("noise_std and feature_shift must be >= 0")
        if not self.min_stake > 0:
            raise ConfigError("min_stake must be positive")
        if self.tau is not None and not self.tau > 0:
            raise ConfigError("tau must be positive")
        if self.profile not in ("test", "secure", "tiny"):
            raise ConfigError(f"unknown field profile {self.profile!r}")
        a = self.attack
        if a is not None:
            if a.kind is AttackKind.BYZANTINE_ORACLE and not 1 <= a.corrupted_oracles <= n_oracles:
                raise ConfigError("corrupted_oracles must be in [1, n_oracles]")
            if a.kind in (AttackKind.DATA_POISONING,) and not 1 <= a.n_malicious <= self.n_vehicles:
                raise ConfigError("n_malicious must be in [1, n_vehicles]")
            if not 0 <= a.victim < self.n_vehicles:
                raise ConfigError("victim index out of range")

    @property
    def seats(self) -> int:
        return 3 * self.f + 1 if self.n_oracles is None else self.n_oracles

    @property
    def over_threshold(self) -> bool:
        a = self.attack
        return a is not None and a.kind is AttackKind.BYZANTINE_ORACLE and a.corrupted_oracles > self.f

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        if self.attack is not None:
            d["attack"] = {**asdict(self.attack), "kind": self.attack.kind.value, "flip_bytes": list(self.attack.flip_bytes)}
        return d

    def digest(self) -> str:
        return digest(self.to_dict())


@dataclass
class RoundRecord:
    round: int
    outcome: str
    attempts: int
    weights: list[float]
    loss: float
    weight_error: float
    accepted: list[str]
    rejected: list[list[str]]  # [sender, reason]
    yes_votes: int | None
    excluded: list[str]
    tip_hash: str
    model_hash: str | None
    plaintext_match: bool | None


@dataclass
class RoundTrace:
    initial_loss: float
    rounds: list[RoundRecord] = field(default_factory=list)
    abort_reason: str | None = None

    def __len__(self) -> int:
        return len(self.rounds)

    @property
    def final_loss(self) -> float:
        committed = [r for r in self.rounds if r.outcome == Outcome.COMMITTED.value]
        return committed[-1].loss if committed else self.initial_loss

    @property
    def final_weights(self) -> list[float] | None:
        committed = [r for r in self.rounds if r.outcome == Outcome.COMMITTED.value]
        return committed[-1].weights if committed else None

    @property
    def final_model_hash(self) -> str | None:
        committed = [r for r in self.rounds if r.model_hash is not None]
        return committed[-1].model_hash if committed else None

    def to_dict(self) -> dict[str, Any]:
        return {
            "initial_loss": self.initial_loss,
            "abort_reason": self.abort_reason,
            "rounds": [asdict(r) for r in self.rounds],
        }

    def to_json(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()


@dataclass
class AttackReport:
    """Outcome of one attack scenario.

    For the passive rows (eavesdropping, anonymity) "detected" means the
    leak audit ran and found nothing; there is no message to reject.
    """

    kind: str
    detected: bool
    blocked: bool
    detection_mechanism: str
    accuracy_delta: float
    slashed_nodes: list[str] = field(default_factory=list)
    row: str = ""
    over_threshold: bool = False
    outcome: str = "completed"
    adversarial_messages: int = 0
    rejected_messages: int = 0
    notes: str = ""

    def __post_init__(self) -> None:
        if self.blocked and not self.detected:
            raise ValueError("blocked implies detected")


@dataclass
class Participant:
    id: str
    keypair: KeyPair
    dataset: Dataset
    malicious: bool = False
    sybil: bool = False

    @property
    def n_samples(self) -> int:
        return self.dataset.n_samples


@dataclass
class MessageOutcome:
    round: int
    sender: str
    adversarial: bool
    reason: RejectReason | None  # None: accepted into the aggregate


class Simulation:
    def __init__(self, config: SimConfig):
        self.config = config
        self.params: FieldParams = profile(config.profile)
        self.root = Rng(config.seed)
        self.ledger = Ledger()
        self.clock = 0
        self.registry = Registry(config.min_stake, self.ledger, exempt_roles=() if config.contributor_stake else ("vehicle",))
        self.policy = Policy(delta=config.delta, norm_bound=config.tau if config.defense else None)
        self.outcomes: list[MessageOutcome] = []
        self.proof_failures: list[tuple[int, tuple[str, ...]]] = []
        self.sybil_refusals = 0
        self.leaks = LeakPatterns()
        scenario = config.attack
        self.scenario = scenario
        self.adversary = Adversary(scenario, self.root.fork("adversary"), self.params)

        d = config.dim
        self.w_star = generate_ground_truth(d, self.root.fork("ground-truth"))
        self.bias = float(self.root.fork("bias").uniform(-1.0, 1.0))
        self.w_true = np.append(self.w_star, self.bias)
        self.global_w = LocalModel.zeros(d).weights
        self.model_hash = GENESIS

        nodes = []
        for i in range(config.seats):
            kp = crypto.keygen(self.root.fork(f"oracle/{i}/key"), self.params)
            oid = f"oracle-{i}"
            register_participant(self.registry, oid, kp.pk, 2 * config.min_stake, role="oracle", clock=self.clock)
            nodes.append(OracleNode(oid, kp, 2 * config.min_stake))
        self.committee = OracleCommittee(config.f, nodes)

        self.participants: list[Participant] = []
        for i in range(config.n_vehicles):
            self.participants.append(self._make_vehicle(f"veh-{i:03d}", self.root.fork(f"vehicle/{i}")))
            register_participant(self.registry, self.participants[-1].id, self.participants[-1].keypair.pk, config.min_stake, clock=self.clock)
        self.victim_id = self.participants[scenario.victim].id if scenario is not None else None

        self.byzantine: set[str] = set()
        if scenario is not None and scenario.kind is AttackKind.DATA_POISONING:
            for v in self.participants[scenario.victim : scenario.victim + scenario.n_malicious]:
                v.malicious = True
        if scenario is not None and scenario.kind is AttackKind.BYZANTINE_ORACLE:
            self.byzantine = {o.id for o in nodes[: scenario.corrupted_oracles]}
        if scenario is not None and scenario.kind is AttackKind.SYBIL:
            self._enrol_sybils(scenario)

        for v in self.participants:
            if not v.malicious:
                for x in np.concatenate([v.dataset.features.ravel(), v.dataset.targets]):
                    self.leaks.add_value(x, self.params)
        self.honest = [v for v in self.participants if not v.malicious]

    # -- setup helpers --------------------------------------------------------

    def _make_vehicle(self, vid: str, rng: Rng) -> Participant:
        cfg = self.config
        n = int(rng.fork("n").integers(cfg.samples_min, cfg.samples_max + 1))
        shift = rng.fork("shift").uniform(-cfg.feature_shift, cfg.feature_shift, size=cfg.dim)
        prof = VehicleProfile(vid, n, noise_std=cfg.noise_std, feature_shift=shift)
        data = generate_dataset(prof, self.w_star, rng.fork("data"), bias=self.bias)
        return Participant(vid, crypto.keygen(rng.fork("key"), self.params), data)

    def _enrol_sybils(self, scenario: AttackScenario) -> None:
        wallet = Wallet(scenario.sybil_budget * self.config.min_stake)
        rng = self.root.fork("sybil")
        for j in range(scenario.sybil_ids):
            p = self._make_vehicle(f"syb-{j:03d}", rng.fork(str(j)))
            if register_participant(self.registry, p.id, p.keypair.pk, self.config.min_stake, wallet=wallet, clock=self.clock):
                p.malicious = p.sybil = True
                self.participants.append(p)
            else:
                self.sybil_refusals += 1

    # -- round machinery --------------------------------------------------------

    def tick(self) -> int:
        self.clock += 1
        return self.clock

    def global_loss(self, w: np.ndarray) -> float:
        total = sum(v.n_samples for v in self.honest)
        return float(sum(v.n_samples * local_loss(w, v.dataset) for v in self.honest) / total)

    def _attacking(self, r: int) -> bool:
        return self.scenario is not None and r >= self.scenario.start_round

    def _local_updates(self, r: int) -> dict[str, np.ndarray]:
        cfg = self.config
        updates = {}
        for v in self.participants:
            w = train_local(LocalModel(self.global_w.copy()), v.dataset, cfg.epochs, cfg.lr).weights
            if v.malicious and self._attacking(r):
                w = -self.scenario.poison_scale * w
            else:
                for x in np.concatenate([w, quantize(w, self.params)]):
                    self.leaks.add_value(x, self.params, (1, v.n_samples))
            updates[v.id] = w
        return updates

    def _in_range(self, w: np.ndarray) -> bool:
        return bool(np.all(np.isfinite(w)) and np.max(np.abs(w)) <= self.params.max_abs_weight)

    def _build(self, v: Participant, w: np.ndarray, compute: list[OracleNode], r: int, tag: str) -> Submission:
        rng = self.root.fork(f"tx/{r}/{tag}/{v.id}")
        ids = [o.id for o in compute]
        envs, comms = make_envelopes(w, v.n_samples, ids, self.params, rng.fork("shares"), r, v.id)
        cts = []
        for env, o in zip(envs, compute):
            if self.config.secure_channel:
                cts.append(crypto.aead_encrypt(v.keypair, o.keypair.pk, o.id, env.to_bytes(), rng.nonce(), self.params))
            else:
                cts.append(Ciphertext(env.to_bytes(), v.keypair.pk, o.id, 0, b""))
        sub = Submission(
            round=r,
            sender=v.id,
            nonce=rng.nonce(),
            timestamp=self.clock,
            n_samples=v.n_samples,
            declared_norm=float(np.linalg.norm(w - self.global_w)),
            ciphertexts=tuple(cts),
            share_commitments=tuple(tuple(c.c for c in row) for row in comms),
        )
        return sub.signed(v.keypair.sk, self.params)

    def _open(self, sub: Submission, compute: list[OracleNode]) -> list[ShareEnvelope] | None:
        """Each computation oracle decrypts its ciphertext; None on any failure."""
        if len(sub.ciphertexts) != len(compute):
            return None
        envs = []
        for ct, o in zip(sub.ciphertexts, compute):
            try:
                if self.config.secure_channel:
                    raw = crypto.aead_decrypt(o.keypair, o.id, ct, self.params)
                else:
                    raw = ct.payload
                env = ShareEnvelope.from_bytes(raw)
            except (AuthFailure, ValueError, TypeError, UnicodeDecodeError):
                return None
            if (env.round, env.sender, env.to_oracle) != (sub.round, sub.sender, o.id) or len(env.coords) != self.config.dim + 1:
                return None
            envs.append(env)
        return envs

    def _intake(
        self,
        deliveries: list[Delivery],
        r: int,
        compute: list[OracleNode],
        accepted: dict[str, tuple[Submission, list[ShareEnvelope], bool]],
        rejected: list[list[str]],
    ) -> list[str]:
        """Validate and open deliveries; returns senders owed a retransmission."""
        clock = self.tick()
        resend = []
        for d in deliveries:
            sub = d.submission
            verdict = validate_submission(sub, self.registry, self.ledger.nonces, clock, self.policy, self.params)
            reason = verdict.reason
            if reason is None and sub.sender in accepted:
                reason = RejectReason.REPLAYED_NONCE  # one upload per sender per round
            if reason is None:
                check_nonce(self.ledger.nonces, sub.sender, sub.nonce, r)
                envs = self._open(sub, compute)
                if envs is None:
                    reason = RejectReason.AUTH_FAILURE
                else:
                    accepted[sub.sender] = (sub, envs, d.adversarial)
            if reason is not None:
                rejected.append([sub.sender, reason.value])
                self.outcomes.append(MessageOutcome(r, sub.sender, d.adversarial, reason))
                if reason in _RETRANSMIT_ON:
                    resend.append(sub.sender)
        return sorted({s for s in resend if s not in accepted})

    def _partials(self, r: int, compute: list[OracleNode], accepted: dict) -> list[PartialSumProof]:
        partials = []
        corrupt = self._attacking(r) and self.scenario.byzantine_mode in ("partials", "both")
        for i, o in enumerate(compute):
            p = oracle_partial([accepted[s][1][i] for s in sorted(accepted)], o.id, self.params, o.keypair)
            if corrupt and o.id in self.byzantine:
                bad = ((p.partial[0] + 1) % self.params.q,) + p.partial[1:]
                p = replace(p, partial=bad, sig=None)
                p = replace(p, sig=crypto.sign(o.keypair.sk, p.signed_body(), self.params))
            partials.append(p)
        return partials

    def _attempt(self, r: int, attempt: int, updates: dict[str, np.ndarray], trace: RoundTrace) -> RoundRecord | None:
        cfg = self.config
        compute = self.committee.active()
        by_id = {v.id: v for v in self.participants}
        self.tick()
        deliveries: list[Delivery] = []
        for v in self.participants:
            if not self._in_range(updates[v.id]):
                continue  # cannot be encoded without risking a wrapped sum
            sub = self._build(v, updates[v.id], compute, r, f"{attempt}/0")
            deliveries += self.adversary.transmit(sub, self.victim_id, first_transmission=attempt == 0)

        if cfg.defense and self.policy.norm_bound is None and deliveries:
            # Warm-up: the first batch of declared norms fixes tau.
            self.policy.norm_bound = cfg.tau_multiplier * float(np.median([d.submission.declared_norm for d in deliveries]))

        accepted: dict[str, tuple[Submission, list[ShareEnvelope], bool]] = {}
        rejected: list[list[str]] = []
        resend = self._intake(deliveries, r, compute, accepted, rejected)
        if resend:
            self.tick()
            again = []
            for sid in resend:
                sub = self._build(by_id[sid], updates[sid], compute, r, f"{attempt}/1")
                again += self.adversary.transmit(sub, self.victim_id, first_transmission=False)
            self._intake(again, r, compute, accepted, rejected)

        def record(outcome: str, yes: int | None, model_hash: str | None = None, match: bool | None = None) -> RoundRecord:
            return RoundRecord(
                round=r,
                outcome=outcome,
                attempts=attempt + 1,
                weights=[float(x) for x in self.global_w],
                loss=self.global_loss(self.global_w),
                weight_error=float(np.max(np.abs(self.global_w - self.w_true))),
                accepted=sorted(accepted),
                rejected=rejected,
                yes_votes=yes,
                excluded=sorted(o.id for o in self.committee.excluded()),
                tip_hash=self.ledger.tip_hash,
                model_hash=model_hash,
                plaintext_match=match,
            )

        if not accepted:
            return record(Outcome.ABORTED.value, None)
        contributors = sorted(accepted)
        yes = None
        if cfg.quorum:
            proposal = digest(["round", r, attempt, [accepted[s][0].digest() for s in contributors]])
            vote_no = self.byzantine if self._attacking(r) and self.scenario.byzantine_mode in ("votes", "both") else set()
            decision = consensus_round(self.committee.nodes, proposal, cfg.f, True, byzantine=vote_no, byzantine_vote=False)
            yes = decision.yes
            self.tick()
            if decision.outcome is Outcome.ABORTED:
                return record(Outcome.ABORTED.value, yes)

        partials = self._partials(r, compute, accepted)
        commitments = {s: [[Commitment(c) for c in row] for row in accepted[s][0].share_commitments] for s in contributors}
        total = sum(accepted[s][0].n_samples for s in contributors)
        clock = self.tick()
        try:
            result = verify_aggregate(
                partials, commitments, total, self.params, [o.id for o in compute], {o.id: o.keypair.pk for o in compute}
            )
        except ProofFailure as exc:
            self.proof_failures.append((r, exc.oracles))
            for oid in exc.oracles:
                node = self.committee.by_id(oid)
                if node.status is NodeStatus.ACTIVE:
                    slash(node, 1.0, "ProofFailure", cfg.min_stake, self.ledger, clock)
            if len(self.committee.excluded()) > cfg.f:
                trace.abort_reason = f"AbortCascade: {len(self.committee.excluded())} oracles excluded in round {r} (f={cfg.f})"
                raise AbortCascade(trace.abort_reason, trace, self)
            return None

        plain = fedavg_plaintext([(quantize(updates[s], self.params), by_id[s].n_samples) for s in contributors])
        match = bool(np.array_equal(plain, result.weights))

        clock = self.tick()
        digests = []
        for s in contributors:
            sub = accepted[s][0]
            digests.append(sub.digest())
            self.ledger.append(
                submission_event(r, s, digests[-1], [digest(ct) for ct in sub.ciphertexts], [list(row) for row in sub.share_commitments]),
                clock,
            )
            self.outcomes.append(MessageOutcome(r, s, accepted[s][2], None))
        oracle_ids = tuple(o.id for o in compute)
        self.ledger.append(
            {
                "type": "aggregate",
                "round": r,
                "weights": [float(x) for x in result.weights],
                "total_samples": total,
                "contributing": list(result.contributing),
                "oracle_ids": list(oracle_ids),
                "proof_bundle_hash": result.proof_bundle_hash,
                "model_hash": result.model_hash,
                "verified": result.verified,
            },
            clock,
        )
        prov = ProvenanceRecord(r, result.model_hash, self.model_hash, result.contributing, oracle_ids, tuple(digests), result.proof_bundle_hash)
        self.ledger.append(prov.to_payload(), clock)
        self.global_w = result.weights
        self.model_hash = result.model_hash
        return record(Outcome.COMMITTED.value, yes, result.model_hash, match)

    def run(self) -> RoundTrace:
        trace = RoundTrace(initial_loss=self.global_loss(self.global_w))
        for r in range(1, self.config.rounds + 1):
            self.tick()
            updates = self._local_updates(r)
            attempt = 0
            while (rec := self._attempt(r, attempt, updates, trace)) is None:
                attempt += 1
            trace.rounds.append(rec)
        return trace

    # -- audits -------------------------------------------------------------------

    def channel_leaks(self) -> int:
        hits = count_leaks(b"".join(self.adversary.log), self.leaks)
        recovered = LeakPatterns()
        for x in recover_from_log(self.adversary.captured, self.params.q):
            recovered.add_int(x)
        return hits + len(recovered.binary & self.leaks.binary)

    def ledger_leaks(self) -> int:
        return count_leaks(self.ledger.export_bytes(), self.leaks)

    def slashed(self) -> list[str]:
        return sorted(o.id for o in self.committee.excluded())


# -- reports -----------------------------------------------------------------------


def _message_report(sim: Simulation, kind: str, delta: float, predicate=lambda o: o.adversarial) -> AttackReport:
    adv = [o for o in sim.outcomes if predicate(o)]
    rejected = [o for o in adv if o.reason is not None]
    mechs = sorted({MECHANISM[o.reason] for o in rejected})
    detected = bool(adv) and len(rejected) == len(adv)
    return AttackReport(
        kind=kind,
        detected=detected,
        blocked=detected,
        detection_mechanism="+".join(mechs) if mechs else "none",
        accuracy_delta=delta,
        slashed_nodes=sim.slashed(),
        adversarial_messages=len(adv),
        rejected_messages=len(rejected),
    )


def build_report(sim: Simulation, trace: RoundTrace, baseline_loss: float) -> AttackReport:
    """Score an attacked run against ground truth only the harness knows."""
    cfg, s = sim.config, sim.scenario
    delta = trace.final_loss - baseline_loss
    kind = s.kind
    if kind in (AttackKind.REPLAY, AttackKind.MESSAGE_MODIFICATION, AttackKind.MAN_IN_THE_MIDDLE, AttackKind.IMPERSONATION):
        return _message_report(sim, kind.value, delta)
    if kind is AttackKind.DATA_POISONING:
        malicious = {v.id for v in sim.participants if v.malicious}
        rep = _message_report(sim, kind.value, delta, lambda o: o.sender in malicious and o.round >= s.start_round)
        if not cfg.defense:
            rep.notes = "norm filter disabled"
        return rep
    if kind is AttackKind.SYBIL:
        sybils = {v.id for v in sim.participants if v.sybil}
        rep = _message_report(sim, kind.value, delta, lambda o: o.sender in sybils and o.round >= s.start_round)
        bound = int(s.sybil_budget)
        held = len(sybils) <= bound and sim.sybil_refusals > 0
        detected = sim.sybil_refusals > 0
        blocked = held and (rep.blocked or not sybils)
        mechs = ["stake"] + ([rep.detection_mechanism] if sybils and rep.detection_mechanism != "none" else [])
        return replace(
            rep,
            detected=detected,
            blocked=blocked,
            detection_mechanism="+".join(mechs),
            notes=f"{len(sybils)} of {s.sybil_ids} ids admitted, {sim.sybil_refusals} refused",
        )
    if kind is AttackKind.BYZANTINE_ORACLE:
        named = set().union(*[set(o) for _, o in sim.proof_failures]) if sim.proof_failures else set()
        aborted = [rec for rec in trace.rounds if rec.outcome == Outcome.ABORTED.value]
        over = cfg.over_threshold
        dissent = bool(aborted) or s.byzantine_mode == "votes"
        detected = (bool(named) and sim.byzantine <= named) or dissent
        complete = trace.abort_reason is None and not aborted and len(trace) == cfg.rounds
        blocked = detected and complete and not over
        mechs = (["commitment"] if named else []) + (["quorum"] if dissent and cfg.quorum else [])
        outcome = "completed" if complete else ("cascade" if trace.abort_reason else "aborted")
        return AttackReport(
            kind=kind.value,
            detected=detected,
            blocked=blocked,
            detection_mechanism="+".join(mechs) or "none",
            accuracy_delta=delta,
            slashed_nodes=sim.slashed(),
            over_threshold=over,
            outcome=outcome,
            notes=(trace.abort_reason or f"{len(aborted)} rounds aborted") if not complete else "",
        )
    if kind is AttackKind.EAVESDROP:
        if s.audit == "ledger":
            leaks, mech = sim.ledger_leaks(), "secret-sharing"
        else:
            leaks, mech = sim.channel_leaks(), "encryption"
        ok = leaks == 0
        return AttackReport(kind.value, ok, ok, mech, delta, sim.slashed(), notes=f"{leaks} plaintext hits over {len(sim.leaks)} patterns")
    if kind is AttackKind.LEDGER_TAMPERING:
        data = bytearray(sim.ledger.export_bytes())
        lines = bytes(data).split(b"\n")
        target = len(sim.ledger) // 2
        offset = sum(len(x) + 1 for x in lines[:target]) + len(lines[target]) // 2
        data[offset] ^= 0x01
        _, status = parse_chain(bytes(data))
        ok = not status.valid and status.broken_at <= target
        return AttackReport(kind.value, ok, ok, "hash-chain", delta, sim.slashed(), notes=f"flip in block {target} -> {status}")
    raise ValueError(f"no report for {kind}")


def run_simulation(config: SimConfig, baseline_loss: float | None = None) -> tuple[RoundTrace, AttackReport | None]:
    """Run ``config``; with an attack, also score it against a same-seed baseline.

    Raises :class:`AbortCascade` when more than ``f`` oracles get excluded.
    """
    sim = Simulation(config)
    trace = sim.run()
    if config.attack is None:
        return trace, None
    if baseline_loss is None:
        baseline_loss = run_simulation(replace(config, attack=None))[0].final_loss
    return trace, build_report(sim, trace, baseline_loss)
