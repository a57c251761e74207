"""Committee agreement state machines.

Candidates collect signed Step-0 values through their referees, propose the
highest-priority ballot as a one-signature chain, and then for a fixed number
of iterations extend and re-send any strictly better chain they validate.
Referees only verify and forward. The chain-length rule (at least ``i``
distinct committee signatures in iteration ``i``) is the Dolev-Strong
argument that makes the final choice identical at every honest candidate.

State machines see ports and payloads only; they never learn which node sits
behind a port.
"""

from __future__ import annotations

from collections.abc import Collection, Iterable, Mapping
from dataclasses import dataclass
from itertools import chain as _chain
from typing import Callable, Optional

from .committee import CandidateSet
from .crypto import DOM_BALLOT, DOM_CHAIN, DOM_FINAL, DOM_STEP0, Pki, SecretKey, Signature, encode_words, public_digest

Inbox = list[tuple[int, list]]
chain_from_iterable = _chain.from_iterable
PriorityKey = tuple[int, int, int]


@dataclass(frozen=True, eq=False, slots=True)
class Step0Msg:
    value: int
    sig: Signature


@dataclass(frozen=True, eq=False, slots=True)
class Ballot:
    """A value plus the Step-0 signatures backing it, sorted by signer."""

    value: int
    evidence: tuple[Step0Msg, ...]


@dataclass(frozen=True, eq=False, slots=True)
class Chain:
    ballot: Ballot
    sigs: tuple[Signature, ...]

    @property
    def signers(self) -> tuple[int, ...]:
        return tuple(s.signer for s in self.sigs)


@dataclass(frozen=True, eq=False, slots=True)
class FinalMsg:
    value: int
    sig: Signature


@dataclass(frozen=True, eq=False, slots=True)
class Noise:
    """Unparseable filler of a given size."""

    bits: int
    blob: int = 0


def step0_payload(value: int) -> bytes:
    return encode_words(DOM_STEP0, value)


def final_payload(value: int) -> bytes:
    return encode_words(DOM_FINAL, value)


def ballot_digest(ballot: Ballot) -> int:
    words = [DOM_BALLOT, ballot.value, len(ballot.evidence)]
    for m in ballot.evidence:
        words.append(m.sig.signer)
        words.append(m.sig.tag)
    return public_digest(encode_words(*words))


def chain_payload(digest: int, position: int, prev_tag: int) -> bytes:
    """Bytes signed by the ``position``-th chain signer; binds the ballot and the previous link."""
    return encode_words(DOM_CHAIN, digest, position, prev_tag)


@dataclass(frozen=True)
class PriorityBallot:
    value: int
    signer_set: frozenset[int]

    @property
    def support_count(self) -> int:
        return len(self.signer_set)


def is_majority(support: int, committee_size: int) -> bool:
    return 2 * support > committee_size


def compute_priority(ballots: Mapping[int, Collection[int]], committee_size: int) -> Optional[PriorityBallot]:
    """Highest-priority majority value: most supporters, then the larger value.

    Returns None when no value is backed by more than half the committee.
    """
    best: Optional[tuple[int, int]] = None
    for value, signers in ballots.items():
        support = len(set(signers))
        if is_majority(support, committee_size) and (best is None or (support, value) > best):
            best = (support, value)
    if best is None:
        return None
    return PriorityBallot(best[1], frozenset(ballots[best[1]]))


def priority_key(value: int, support: int, committee_size: int) -> PriorityKey:
    """Total order on ballots.

    Majority ballots rank above everything else, by support then value.
    Non-majority ballots carry the default-value rule: smaller value ranks
    higher, so the minimum propagates like any other best ballot.
    """
    if is_majority(support, committee_size):
        return (1, support, value)
    return (0, 0, -value)


class SizeModel:
    """Semantic bit sizes and CONGEST fragment counts of payloads."""

    HEADER_BITS = 2

    def __init__(self, log_n: int, value_bits: int, kappa: int, word_factor: int) -> None:
        self.log_n = log_n
        self.value_bits = value_bits
        self.kappa = kappa
        self.budget = word_factor * log_n

    def bits(self, payload: object) -> int:
        if isinstance(payload, Chain):
            nsig = len(getattr(payload.ballot, "evidence", ())) + len(payload.sigs)
            return self.HEADER_BITS + self.log_n + self.value_bits + self.kappa * nsig
        if isinstance(payload, (Step0Msg, FinalMsg)):
            return self.HEADER_BITS + self.value_bits + self.kappa
        if isinstance(payload, Noise):
            return max(1, payload.bits)
        raise TypeError(f"cannot size {type(payload).__name__}")

    def fragments(self, payload: object) -> int:
        return -(-self.bits(payload) // self.budget)

    def bundle(self, payloads: list) -> tuple[int, int]:
        """(fragments, bits) of a payload sequence, each payload fragmented separately."""
        budget = self.budget
        flat = self.HEADER_BITS + self.value_bits + self.kappa
        flat_frags = -(-flat // budget)
        chain_base = self.HEADER_BITS + self.log_n + self.value_bits
        frags = bits = 0
        for p in payloads:
            tp = type(p)
            if tp is Step0Msg or tp is FinalMsg:
                frags += flat_frags
                bits += flat
                continue
            if tp is Chain and type(p.ballot) is Ballot:
                b = chain_base + self.kappa * (len(p.ballot.evidence) + len(p.sigs))
            else:
                b = self.bits(p)
            frags += -(-b // budget)
            bits += b
        return frags, bits


class Verifier:
    """Signature and structure checks for one trial, memoised per payload object.

    Every honest node would run the same deterministic checks on the same
    bytes, so caching the verdict per object changes cost, not outcomes.
    """

    def __init__(self, pki: Pki, committee: CandidateSet) -> None:
        self.pki = pki
        self.committee = committee.as_set
        self.committee_size = len(committee)
        self._step0: dict[object, bool] = {}
        self._ballot: dict[object, tuple[int, int]] = {}
        self._chain: dict[object, bool] = {}
        self._final: dict[object, bool] = {}

    def step0_ok(self, msg: object) -> bool:
        ok = self._step0.get(msg)
        if ok is None:
            ok = (
                isinstance(msg, Step0Msg)
                and isinstance(msg.sig, Signature)
                and isinstance(msg.value, int)
                and msg.sig.signer in self.committee
                and self.pki.verify_index(msg.sig.signer, step0_payload(msg.value), msg.sig)
            )
            self._step0[msg] = ok
        return ok

    def final_ok(self, msg: object) -> bool:
        ok = self._final.get(msg)
        if ok is None:
            ok = (
                isinstance(msg, FinalMsg)
                and isinstance(msg.sig, Signature)
                and msg.sig.signer in self.committee
                and self.pki.verify_index(msg.sig.signer, final_payload(msg.value), msg.sig)
            )
            self._final[msg] = ok
        return ok

    def ballot_info(self, ballot: object) -> tuple[int, int]:
        """(support, digest) of a well-formed ballot, or (-1, 0)."""
        info = self._ballot.get(ballot)
        if info is None:
            info = self._check_ballot(ballot)
            self._ballot[ballot] = info
        return info

    def _check_ballot(self, ballot: object) -> tuple[int, int]:
        if not isinstance(ballot, Ballot) or not isinstance(ballot.evidence, tuple) or not ballot.evidence:
            return (-1, 0)
        last = -1
        for m in ballot.evidence:
            if not self.step0_ok(m) or m.value != ballot.value or m.sig.signer <= last:
                return (-1, 0)
            last = m.sig.signer
        return (len(ballot.evidence), ballot_digest(ballot))

    def ballot_key(self, ballot: Ballot) -> PriorityKey:
        support, _ = self.ballot_info(ballot)
        return priority_key(ballot.value, support, self.committee_size)

    def chain_ok(self, chain: object) -> bool:
        """Signatures, distinctness and membership; the length rule is separate."""
        ok = self._chain.get(chain)
        if ok is None:
            ok = self._check_chain(chain)
            self._chain[chain] = ok
        return ok

    def _check_chain(self, chain: object) -> bool:
        if not isinstance(chain, Chain) or not isinstance(chain.sigs, tuple) or not chain.sigs:
            return False
        support, digest = self.ballot_info(chain.ballot)
        if support < 0:
            return False
        seen: set[int] = set()
        prev = 0
        for pos, sig in enumerate(chain.sigs):
            if not isinstance(sig, Signature) or sig.signer in seen or sig.signer not in self.committee:
                return False
            if not self.pki.verify_index(sig.signer, chain_payload(digest, pos, prev), sig):
                return False
            seen.add(sig.signer)
            prev = sig.tag
        return True

    def validate(self, chain: object, iteration: int) -> bool:
        return self.chain_ok(chain) and len(chain.sigs) >= iteration  # type: ignore[union-attr]


def validate_chain(chain: object, iteration: int, committee: CandidateSet, pki: Pki) -> bool:
    """Standalone check: all signatures verify, signers distinct committee members, length >= iteration."""
    return Verifier(pki, committee).validate(chain, iteration)


def _distinct(inbox: Inbox) -> list:
    """Payloads of an inbox with duplicates removed, in arrival order."""
    return list(dict.fromkeys(chain_from_iterable(payloads for _, payloads in inbox)))


class CandidateState:
    """One honest committee member.

    ``ports`` are the ports the candidate talks through: its sampled referees
    in KT0, the other candidates in KT1.
    """

    def __init__(
        self,
        node: int,
        value: int,
        secret_key: SecretKey,
        sign: Callable[[SecretKey, bytes], Signature],
        verifier: Verifier,
        ports: list[int],
    ) -> None:
        self.node = node
        self.value = value
        self._sk = secret_key
        self._sign = sign
        self.verifier = verifier
        self.ports = ports
        self.view: dict[int, dict[int, Step0Msg]] = {}
        self.best: Optional[Ballot] = None
        self.best_key: Optional[PriorityKey] = None
        self.best_sent_key: Optional[PriorityKey] = None
        self.sent_keys: list[PriorityKey] = []
        self.accepted: list[Chain] = []
        self.decision: Optional[int] = None

    def step0(self) -> list[Step0Msg]:
        msg = Step0Msg(self.value, self._sign(self._sk, step0_payload(self.value)))
        self.view.setdefault(self.value, {})[self.node] = msg
        return [msg]

    def absorb_step0(self, inbox: Inbox) -> None:
        ok = self.verifier.step0_ok
        for p in _distinct(inbox):
            if ok(p):
                self.view.setdefault(p.value, {}).setdefault(p.sig.signer, p)

    def step0_ballots(self) -> dict[int, frozenset[int]]:
        return {v: frozenset(signers) for v, signers in self.view.items()}

    def initial_ballot(self) -> Ballot:
        chosen = compute_priority(self.step0_ballots(), self.verifier.committee_size)
        value = chosen.value if chosen is not None else min(self.view)
        backing = self.view[value]
        return Ballot(value, tuple(backing[s] for s in sorted(backing)))

    def _link(self, ballot: Ballot, sigs: tuple[Signature, ...]) -> Signature:
        _, digest = self.verifier.ballot_info(ballot)
        prev = sigs[-1].tag if sigs else 0
        return self._sign(self._sk, chain_payload(digest, len(sigs), prev))

    def _adopt(self, ballot: Ballot, key: PriorityKey) -> None:
        self.best = ballot
        self.best_key = key

    def _record_sent(self, key: PriorityKey) -> None:
        if self.best_sent_key is not None and key < self.best_sent_key:
            raise AssertionError("best_sent priority decreased")
        self.best_sent_key = key
        self.sent_keys.append(key)

    def propose(self) -> Chain:
        """Sign the Step-0 priority ballot as a one-link chain."""
        ballot = self.initial_ballot()
        key = self.verifier.ballot_key(ballot)
        self._adopt(ballot, key)
        chain = Chain(ballot, (self._link(ballot, ()),))
        self._record_sent(key)
        return chain

    def _rank(self, chain: Chain) -> tuple:
        _, digest = self.verifier.ballot_info(chain.ballot)
        # ties between equal-priority chains are broken canonically, never by arrival order
        return (self.verifier.ballot_key(chain.ballot), -len(chain.sigs), -digest)

    def iterate(self, inbox: Inbox, iteration: int, last: bool = False) -> Optional[Chain]:
        """Validate chains for this iteration; extend and return the best one if it beats what was sent."""
        if not inbox:
            return None
        best_chain: Optional[Chain] = None
        best_rank = None
        for p in _distinct(inbox):
            if self.verifier.validate(p, iteration):
                rank = self._rank(p)
                if best_rank is None or rank > best_rank:
                    best_chain, best_rank = p, rank
        if best_chain is None:
            return None
        key = best_rank[0]
        if self.best_key is not None and key <= self.best_key:
            return None
        self.accepted.append(best_chain)
        self._adopt(best_chain.ballot, key)
        if last:
            return None
        if self.node in best_chain.signers:
            out = best_chain
        else:
            out = Chain(best_chain.ballot, best_chain.sigs + (self._link(best_chain.ballot, best_chain.sigs),))
        self._record_sent(key)
        return out

    def decide(self) -> int:
        if self.decision is None:
            if self.best is None:
                self.best = self.initial_ballot()
                self.best_key = self.verifier.ballot_key(self.best)
            self.decision = self.best.value
        return self.decision

    def final_message(self) -> FinalMsg:
        value = self.decide()
        return FinalMsg(value, self._sign(self._sk, final_payload(value)))


class RefereeState:
    """An honest node relaying between the candidates that contacted it."""

    def __init__(self, node: int, verifier: Verifier) -> None:
        self.node = node
        self.verifier = verifier
        self.contacts: dict[int, None] = {}
        self.step0_msgs: dict[int, Step0Msg] = {}
        self.best_key: Optional[PriorityKey] = None
        self.forwarded = 0

    @property
    def ports(self) -> list[int]:
        return sorted(self.contacts)

    def absorb_step0(self, inbox: Inbox) -> None:
        ok = self.verifier.step0_ok
        for port, payloads in inbox:
            for p in payloads:
                if ok(p):
                    self.contacts[port] = None
                    self.step0_msgs.setdefault(id(p), p)

    def relay0(self) -> list[Step0Msg]:
        """Every verified Step-0 message, to be sent to every contact."""
        msgs = list(self.step0_msgs.values())
        msgs.sort(key=lambda m: (m.sig.signer, m.value, m.sig.tag))
        return msgs

    def iterate(self, inbox: Inbox, iteration: int) -> Optional[Chain]:
        """The best chain valid for this iteration, if it beats everything forwarded so far."""
        best_chain: Optional[Chain] = None
        best_rank = None
        v = self.verifier
        verdict: dict[int, bool] = {}
        for port, payloads in inbox:
            for p in payloads:
                ok = verdict.get(id(p))
                if ok is None:
                    ok = verdict[id(p)] = v.validate(p, iteration)
                    if ok:
                        _, digest = v.ballot_info(p.ballot)
                        rank = (v.ballot_key(p.ballot), -len(p.sigs), -digest)
                        if best_rank is None or rank > best_rank:
                            best_chain, best_rank = p, rank
                if ok:
                    self.contacts[port] = None
        if best_chain is None or (self.best_key is not None and best_rank[0] <= self.best_key):
            return None
        self.best_key = best_rank[0]
        self.forwarded += 1
        return best_chain


def tally_finals(payloads: Iterable[object], verifier: Verifier) -> Optional[int]:
    """Value signed by the most distinct candidates, if they are more than half of those heard from."""
    votes: dict[int, set[int]] = {}
    heard: set[int] = set()
    for p in payloads:
        if verifier.final_ok(p):
            votes.setdefault(p.value, set()).add(p.sig.signer)
            heard.add(p.sig.signer)
    if not votes:
        return None
    value, signers = max(votes.items(), key=lambda kv: (len(kv[1]), kv[0]))
    if 2 * len(signers) > len(heard):
        return value
    return None
