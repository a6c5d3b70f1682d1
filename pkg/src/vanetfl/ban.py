"""A small BAN-logic engine: belief formulas, inference rules and a
deterministic forward-chaining prover with derivation trees.

Besides the classical message-meaning, nonce-verification, jurisdiction
and decryption rules it carries the composite freshness-receipt rule used
for the weight-upload and proof-submission steps::

    OnlyKnownTo(M, {S, O}),  S believes fresh(O)   |-   O receives M from S fresh
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterable, Iterator, Union

Principal = str


@dataclass(frozen=True)
class Encrypted:
    body: "Term"
    key: str

    def __str__(self) -> str:
        return f"{{{self.body}}}_{self.key}"


Term = Union[str, Encrypted]


@dataclass(frozen=True)
class Believes:
    who: Principal
    what: object

    def __str__(self) -> str:
        return f"{self.who} believes ({self.what})"


@dataclass(frozen=True)
class Fresh:
    what: object

    def __str__(self) -> str:
        return f"fresh({self.what})"


@dataclass(frozen=True)
class Sees:
    who: Principal
    what: Term

    def __str__(self) -> str:
        return f"{self.who} sees {self.what}"


@dataclass(frozen=True)
class Said:
    who: Principal
    what: object

    def __str__(self) -> str:
        return f"{self.who} said {self.what}"


@dataclass(frozen=True)
class Controls:
    who: Principal
    what: object

    def __str__(self) -> str:
        return f"{self.who} controls {self.what}"


@dataclass(frozen=True)
class SharedSecret:
    a: Principal
    b: Principal
    key: str

    def __str__(self) -> str:
        return f"{self.a} <-{self.key}-> {self.b}"

    def links(self, p: Principal) -> Principal | None:
        if p == self.a:
            return self.b
        if p == self.b:
            return self.a
        return None


@dataclass(frozen=True)
class OnlyKnownTo:
    what: Term
    principals: frozenset

    def __str__(self) -> str:
        return f"{self.what} only known to {{{', '.join(sorted(self.principals))}}}"


@dataclass(frozen=True)
class ReceivedFresh:
    receiver: Principal
    what: Term
    sender: Principal

    def __str__(self) -> str:
        return f"{self.receiver} receives {self.what} from {self.sender} in fresh state"


Formula = Union[Believes, Fresh, Sees, Said, Controls, SharedSecret, OnlyKnownTo, ReceivedFresh]

Conclusion = tuple[Formula, tuple[Formula, ...]]


@dataclass(frozen=True)
class Rule:
    name: str
    pattern: str
    apply: Callable[[list[Formula]], Iterator[Conclusion]]


def _fresh_receipt(facts: list[Formula]) -> Iterator[Conclusion]:
    for b, o in product(facts, facts):
        if not (isinstance(b, Believes) and isinstance(b.what, Fresh) and isinstance(o, OnlyKnownTo)):
            continue
        sender, receiver = b.who, b.what.what
        if isinstance(receiver, str) and receiver != sender and o.principals == frozenset({sender, receiver}):
            yield ReceivedFresh(receiver, o.what, sender), (o, b)


def _message_meaning(facts: list[Formula]) -> Iterator[Conclusion]:
    for k, s in product(facts, facts):
        if (
            isinstance(k, Believes)
            and isinstance(k.what, SharedSecret)
            and isinstance(s, Sees)
            and s.who == k.who
            and isinstance(s.what, Encrypted)
            and s.what.key == k.what.key
        ):
            other = k.what.links(k.who)
            if other is not None and other != k.who:
                yield Believes(k.who, Said(other, s.what.body)), (k, s)


def _decrypt(facts: list[Formula]) -> Iterator[Conclusion]:
    for k, s in product(facts, facts):
        if (
            isinstance(k, Believes)
            and isinstance(k.what, SharedSecret)
            and k.what.links(k.who) is not None
            and isinstance(s, Sees)
            and s.who == k.who
            and isinstance(s.what, Encrypted)
            and s.what.key == k.what.key
        ):
            yield Sees(k.who, s.what.body), (k, s)


def _nonce_verification(facts: list[Formula]) -> Iterator[Conclusion]:
    for f, s in product(facts, facts):
        if (
            isinstance(f, Believes)
            and isinstance(f.what, Fresh)
            and isinstance(s, Believes)
            and s.who == f.who
            and isinstance(s.what, Said)
            and s.what.what == f.what.what
        ):
            yield Believes(f.who, Believes(s.what.who, s.what.what)), (f, s)


def _jurisdiction(facts: list[Formula]) -> Iterator[Conclusion]:
    for c, b in product(facts, facts):
        if (
            isinstance(c, Believes)
            and isinstance(c.what, Controls)
            and isinstance(b, Believes)
            and b.who == c.who
            and b.what == Believes(c.what.who, c.what.what)
        ):
            yield Believes(c.who, c.what.what), (c, b)


DEFAULT_RULES: tuple[Rule, ...] = (
    Rule("fresh-receipt", "OnlyKnownTo(M,{S,O}), S believes fresh(O) |- O receives M from S fresh", _fresh_receipt),
    Rule("message-meaning", "P believes P<-K->Q, P sees {X}_K |- P believes Q said X", _message_meaning),
    Rule("decryption", "P believes P<-K->Q, P sees {X}_K |- P sees X", _decrypt),
    Rule("nonce-verification", "P believes fresh(X), P believes Q said X |- P believes Q believes X", _nonce_verification),
    Rule("jurisdiction", "P believes Q controls X, P believes Q believes X |- P believes X", _jurisdiction),
)


@dataclass(frozen=True)
class Derivation:
    formula: Formula
    rule: str
    premises: tuple["Derivation", ...] = ()

    def dump(self, indent: int = 0) -> str:
        lines = [f"{'  ' * indent}{self.formula}    [{self.rule}]"]
        lines += [p.dump(indent + 1) for p in self.premises]
        return "\n".join(lines)

    def walk(self) -> Iterator[Derivation]:
        yield self
        for p in self.premises:
            yield from p.walk()


@dataclass(frozen=True)
class ProofResult:
    goal: Formula
    tree: Derivation | None

    @property
    def proved(self) -> bool:
        return self.tree is not None

    def __bool__(self) -> bool:
        return self.proved

    def __str__(self) -> str:
        return "Proved" if self.proved else "NotProved"


def derive(
    assumptions: Iterable[Formula],
    goal: Formula,
    rules: Iterable[Rule] = DEFAULT_RULES,
    depth_limit: int = 8,
) -> ProofResult:
    """Forward-chain from ``assumptions`` for at most ``depth_limit`` rounds."""
    if depth_limit < 1:
        raise ValueError("depth_limit must be >= 1")
    rules = tuple(rules)
    known: dict[Formula, tuple[str, tuple[Formula, ...]]] = {}
    for a in assumptions:
        known.setdefault(a, ("assumption", ()))
    for _ in range(depth_limit):
        if goal in known:
            break
        facts = sorted(known, key=repr)
        fresh: dict[Formula, tuple[str, tuple[Formula, ...]]] = {}
        for rule in rules:
            for concl, prem in rule.apply(facts):
                if concl not in known and concl not in fresh:
                    fresh[concl] = (rule.name, prem)
        if not fresh:
            break
        known.update(fresh)
    if goal not in known:
        return ProofResult(goal, None)

    def build(f: Formula) -> Derivation:
        rule, prem = known[f]
        return Derivation(f, rule, tuple(build(p) for p in prem))

    return ProofResult(goal, build(goal))


# -- protocol instances -------------------------------------------------------


@dataclass(frozen=True)
class ProtocolCase:
    name: str
    assumptions: tuple[tuple[str, Formula], ...]
    goal: Formula


def _receipt_case(name: str, sender: str, receiver: str, message: str) -> ProtocolCase:
    return ProtocolCase(
        name,
        (
            (f"{sender} believes fresh({receiver})", Believes(sender, Fresh(receiver))),
            (f"{message} only known to {sender},{receiver}", OnlyKnownTo(message, frozenset({sender, receiver}))),
        ),
        ReceivedFresh(receiver, message, sender),
    )


def _classical_case(name: str, sender: str, receiver: str, message: str, key: str) -> ProtocolCase:
    return ProtocolCase(
        name,
        (
            (f"{receiver} believes {receiver}<-{key}->{sender}", Believes(receiver, SharedSecret(receiver, sender, key))),
            (f"{receiver} sees {{{message}}}_{key}", Sees(receiver, Encrypted(message, key))),
            (f"{receiver} believes fresh({message})", Believes(receiver, Fresh(message))),
        ),
        Believes(receiver, Believes(sender, message)),
    )


# Weight upload (vehicle S -> oracle network O) and proof submission
# (computation oracle O_i -> chain B).
WEIGHT_UPLOAD = _receipt_case("weight-upload", "S", "O", "M_weights")
PROOF_SUBMISSION = _receipt_case("proof-submission", "O_i", "B", "M_proof")
PROTOCOL_CASES = (WEIGHT_UPLOAD, PROOF_SUBMISSION)
CLASSICAL_CASES = (
    _classical_case("weight-upload/classical", "S", "O", "M_weights", "K_SO"),
    _classical_case("proof-submission/classical", "O_i", "B", "M_proof", "K_OB"),
)


@dataclass(frozen=True)
class CaseResult:
    case: str
    removed: str | None
    result: ProofResult


@dataclass
class BanReport:
    rows: list[CaseResult] = field(default_factory=list)

    @property
    def goals_proved(self) -> bool:
        return all(r.result.proved for r in self.rows if r.removed is None and r.case in {c.name for c in PROTOCOL_CASES})

    @property
    def ablations_blocked(self) -> bool:
        return all(not r.result.proved for r in self.rows if r.removed is not None)

    def text(self) -> str:
        out = []
        for r in self.rows:
            label = r.case if r.removed is None else f"{r.case} without [{r.removed}]"
            out.append(f"{label}: {r.result}  goal: {r.result.goal}")
            if r.result.tree is not None:
                out.append(r.result.tree.dump(indent=1))
        return "\n".join(out) + "\n"


def check_protocol(case: ProtocolCase, depth_limit: int = 8) -> list[CaseResult]:
    """The full-assumption run followed by every single-assumption ablation."""
    rows = [CaseResult(case.name, None, derive([f for _, f in case.assumptions], case.goal, depth_limit=depth_limit))]
    for i, (label, _) in enumerate(case.assumptions):
        rest = [f for j, (_, f) in enumerate(case.assumptions) if j != i]
        rows.append(CaseResult(case.name, label, derive(rest, case.goal, depth_limit=depth_limit)))
    return rows


def check_paper_protocols(include_classical: bool = True) -> BanReport:
    report = BanReport()
    for case in PROTOCOL_CASES + (CLASSICAL_CASES if include_classical else ()):
        report.rows.extend(check_protocol(case))
    return report
