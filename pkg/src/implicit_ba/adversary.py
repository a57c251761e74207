"""Static, rushing, full-information adversary with pluggable strategies.

One :class:`Strategy` instance controls every corrupt node of a trial. The
engine calls :meth:`Strategy.act` once per phase, after the honest traffic of
that phase is final, and hands it an :class:`AdversaryView` with that
traffic, whatever the corrupt nodes received in the previous phase, and the
honest candidates' states. The strategy signs only through a
:class:`~implicit_ba.crypto.Signer` restricted to corrupt keys, so any honest
signature it sends is a replay.

Custom strategies subclass :class:`Strategy` and register with
:func:`register_strategy`::

    @register_strategy("my_attack")
    class MyAttack(Strategy):
        def act(self, view):
            ...
"""

from __future__ import annotations

import math
import zlib
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .committee import CandidateSet
from .crypto import Signer
from .errors import ConfigError
from .protocol import (
    Ballot,
    Chain,
    Noise,
    Step0Msg,
    Verifier,
    chain_payload,
    step0_payload,
)

Send = tuple[int, int, list]

# phases in which payloads land at candidates, by mode
CANDIDATE_PHASES = {"kt0": ("relay0", "down"), "kt1": ("step0", "direct")}


def max_faults(n: int, eps: float) -> int:
    """floor((1/2 - eps) n), with a small guard against float noise."""
    return max(0, math.floor((0.5 - eps) * n + 1e-9))


def choose_corrupt_set(n: int, f: int, strategy: str, adversary_seed: int, eps: float = 0.1) -> frozenset[int]:
    """The static corrupt set, fixed before keys or coin exist."""
    limit = max_faults(n, eps)
    if f < 0 or f > limit:
        raise ConfigError(f"f={f} outside [0, {limit}] for n={n}, eps={eps}")
    if f == 0:
        return frozenset()
    rng = np.random.default_rng(np.random.SeedSequence([int(adversary_seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(strategy.encode())]))
    return frozenset(int(x) for x in rng.choice(n, size=f, replace=False))


@dataclass
class AdversaryContext:
    """Everything the adversary knows from the start of a trial."""

    n: int
    corrupt: frozenset[int]
    committee: CandidateSet
    referees: dict[int, np.ndarray]
    inputs: list[int]
    signer: Signer
    verifier: Verifier
    rng: np.random.Generator
    value_domain: int
    iterations: int
    mode: str
    peer: Callable[[int, int], int]
    params: dict[str, Any] = field(default_factory=dict)


class AdversaryView:
    """Snapshot handed to the strategy in one phase.

    ``honest_out`` is this phase's honest traffic as ``(sender, receivers,
    payloads)``. ``corrupt_inbox`` maps each corrupt node to what it received
    at the end of the previous phase, as ``(sender, payloads)``; it is built
    on first access because most strategies never look.
    """

    def __init__(
        self,
        phase: str,
        iteration: int,
        honest_out: list[tuple[int, np.ndarray, list]],
        raw_inbox: dict[int, list[tuple[int, list]]],
        candidates: dict[int, Any],
        peers: Optional[Callable[[int, np.ndarray], np.ndarray]] = None,
    ) -> None:
        self.phase = phase
        self.iteration = iteration
        self.honest_out = honest_out
        self.candidates = candidates
        self._raw = raw_inbox
        self._peers = peers
        self._inbox: Optional[dict[int, list[tuple[int, list]]]] = None

    @property
    def corrupt_inbox(self) -> dict[int, list[tuple[int, list]]]:
        if self._inbox is None:
            if self._peers is None:
                self._inbox = self._raw
            else:
                self._inbox = {}
                for z in sorted(self._raw):
                    box = self._raw[z]
                    senders = self._peers(z, np.fromiter((port for port, _ in box), dtype=np.int64, count=len(box)))
                    self._inbox[z] = list(zip(senders.tolist(), (payloads for _, payloads in box)))
        return self._inbox


class Strategy:
    """Base class; the default behaviour is to stay silent."""

    name = "base"

    def __init__(self, ctx: AdversaryContext) -> None:
        self.ctx = ctx
        self.corrupt_candidates = [u for u in ctx.committee.members if u in ctx.corrupt]
        self.honest_candidates = [u for u in ctx.committee.members if u not in ctx.corrupt]
        self.honest_step0: dict[int, Step0Msg] = {}
        self._own_step0: dict[tuple[int, int], Step0Msg] = {}

    def act(self, view: AdversaryView) -> list[Send]:
        return []

    def observe(self, view: AdversaryView) -> None:
        """Harvest honest Step-0 signatures from the traffic in view."""
        for _, _, payloads in view.honest_out:
            for p in payloads:
                if isinstance(p, Step0Msg) and p.sig.signer not in self.ctx.corrupt:
                    self.honest_step0.setdefault(p.sig.signer, p)

    # toolkit

    def to_candidates(self, view: AdversaryView) -> bool:
        kind = "kt1" if self.ctx.mode == "kt1" else "kt0"
        return view.phase in CANDIDATE_PHASES[kind]

    def honest_values(self) -> set[int]:
        return {self.ctx.inputs[u] for u in self.honest_candidates}

    def foreign_values(self, k: int) -> list[int]:
        """Up to ``k`` values no honest candidate holds, padded with domain values if needed."""
        held = self.honest_values()
        out = [v for v in range(self.ctx.value_domain - 1, -1, -1) if v not in held][:k]
        for v in range(self.ctx.value_domain):
            if len(out) >= k:
                break
            if v not in out:
                out.append(v)
        return out

    def step0(self, node: int, value: int) -> Step0Msg:
        key = (node, value)
        msg = self._own_step0.get(key)
        if msg is None:
            msg = self._own_step0[key] = Step0Msg(value, self.ctx.signer.sign_as(node, step0_payload(value)))
        return msg

    def ballot(self, value: int, msgs: Iterable[Step0Msg]) -> Ballot:
        by_signer: dict[int, Step0Msg] = {}
        for m in msgs:
            if m.value == value:
                by_signer.setdefault(m.sig.signer, m)
        return Ballot(value, tuple(by_signer[s] for s in sorted(by_signer)))

    def strongest_ballot(self, values: Iterable[int], signers: list[int]) -> Optional[Ballot]:
        """Best-priority ballot buildable from ``signers``' fresh signatures plus observed honest ones."""
        best, best_key = None, None
        for v in values:
            msgs = [self.step0(z, v) for z in signers]
            msgs += [m for m in self.honest_step0.values() if m.value == v]
            b = self.ballot(v, msgs)
            if not b.evidence:
                continue
            key = self.ctx.verifier.ballot_key(b)
            if best_key is None or key > best_key:
                best, best_key = b, key
        return best

    def chain(self, ballot: Ballot, signers: list[int]) -> Chain:
        """Chain over ``ballot`` signed in order by corrupt ``signers``."""
        _, digest = self.ctx.verifier.ballot_info(ballot)
        sigs: list = []
        prev = 0
        for pos, z in enumerate(signers):
            sig = self.ctx.signer.sign_as(z, chain_payload(digest, pos, prev))
            sigs.append(sig)
            prev = sig.tag
        return Chain(ballot, tuple(sigs))


STRATEGIES: dict[str, type[Strategy]] = {}


def register_strategy(name: str) -> Callable[[type[Strategy]], type[Strategy]]:
    """Class decorator adding a strategy to the registry under ``name``."""

    def deco(cls: type[Strategy]) -> type[Strategy]:
        if name in STRATEGIES and STRATEGIES[name] is not cls:
            raise ValueError(f"strategy {name!r} already registered")
        cls.name = name
        STRATEGIES[name] = cls
        return cls

    return deco


def get_strategy(name: str) -> type[Strategy]:
    try:
        return STRATEGIES[name]
    except KeyError:
        raise ConfigError(f"unknown adversary strategy {name!r}; known: {', '.join(sorted(STRATEGIES))}") from None


@register_strategy("silent")
class Silent(Strategy):
    """Corrupt nodes crash before sending anything."""


@register_strategy("random_noise")
class RandomNoise(Strategy):
    """Signed random values to random nodes, plus unparseable filler and bogus chains."""

    FANOUT = 1

    def act(self, view: AdversaryView) -> list[Send]:
        ctx, rng = self.ctx, self.ctx.rng
        bad = self.corrupt_candidates
        if not bad:
            return []
        k = len(bad)
        values = rng.integers(ctx.value_domain, size=k).tolist()
        sizes = rng.integers(1, 64, size=k).tolist()
        blobs = rng.integers(1 << 62, size=k).tolist()
        # uniform targets among the other n - 1 nodes (may repeat, which is harmless noise)
        picks = rng.integers(ctx.n - 1, size=(k, self.FANOUT)).tolist()
        out: list[Send] = []
        for z, value, size, blob, row in zip(bad, values, sizes, blobs, picks):
            targets = ctx.referees[z].tolist() if view.phase == "step0" else [t + (t >= z) for t in row]
            junk = Noise(size, blob)
            msg = self.step0(z, value)
            if view.phase in ("step0", "relay0"):
                payload: list = [msg, junk]
            else:
                payload = [Chain(Ballot(value, (msg,)), (msg.sig, msg.sig)), junk]
            for t in targets:
                out.append((z, t, payload))
        return out


@register_strategy("equivocate")
class Equivocate(Strategy):
    """Corrupt candidates sign value a for half their referees and b for the rest, then push the best ballot."""

    def act(self, view: AdversaryView) -> list[Send]:
        ctx = self.ctx
        self.observe(view)
        a, b = self.foreign_values(2)
        out: list[Send] = []
        step0_phase = "step0"
        propose_phase = ("up", 1) if ctx.mode != "kt1" else ("direct", 1)
        if view.phase == step0_phase:
            for z in self.corrupt_candidates:
                targets = self._fanout(z)
                half = len(targets) // 2
                for t in targets[:half]:
                    out.append((z, t, [self.step0(z, a)]))
                for t in targets[half:]:
                    out.append((z, t, [self.step0(z, b)]))
        elif (view.phase, view.iteration) == propose_phase:
            for z in self.corrupt_candidates:
                ballot = self.strongest_ballot((a, b), self.corrupt_candidates)
                if ballot is None:
                    continue
                chain = self.chain(ballot, [z])
                for t in self._fanout(z):
                    out.append((z, t, [chain]))
        return out

    def _fanout(self, z: int) -> list[int]:
        if self.ctx.mode == "kt1":
            return [u for u in self.ctx.committee.members if u != z]
        return self.ctx.referees[z].tolist()


@register_strategy("delay_chain")
class DelayChain(Strategy):
    """Dolev-Strong stretcher.

    Corrupt candidates sign a value among themselves only, build the best
    ballot they can from their signatures and observed honest ones, and in
    iteration ``i`` hand a chain with exactly ``i`` corrupt signatures to one
    honest candidate.
    """

    def __init__(self, ctx: AdversaryContext) -> None:
        super().__init__(ctx)
        self._ballot: Optional[Ballot] = None

    def act(self, view: AdversaryView) -> list[Send]:
        self.observe(view)
        bad = self.corrupt_candidates
        if not bad or not self.honest_candidates or not self.to_candidates(view) or view.iteration < 1:
            return []
        i = view.iteration
        if i > len(bad):
            return []
        if self._ballot is None:
            self._ballot = self.strongest_ballot(range(self.ctx.value_domain), bad)
        if self._ballot is None:
            return []
        target = self.honest_candidates[(i - 1) % len(self.honest_candidates)]
        return [(bad[i - 1], target, [self.chain(self._ballot, bad[:i])])]


@register_strategy("referee_lie")
class RefereeLie(Strategy):
    """Corrupt relays alter what they forward; corrupt candidates stay silent."""

    def act(self, view: AdversaryView) -> list[Send]:
        if view.phase not in ("relay0", "down"):
            return []
        domain = self.ctx.value_domain
        out: list[Send] = []
        for z in sorted(view.corrupt_inbox):
            senders: dict[int, None] = {}
            mutated: list = []
            for sender, payloads in view.corrupt_inbox[z]:
                senders[sender] = None
                for p in payloads:
                    if isinstance(p, Step0Msg):
                        mutated.append(Step0Msg((p.value + 1) % domain, p.sig))
                    elif isinstance(p, Chain):
                        mutated.append(Chain(Ballot((p.ballot.value + 1) % domain, p.ballot.evidence), p.sigs))
            if mutated:
                for s in senders:
                    out.append((z, s, mutated))
        return out


@register_strategy("scripted")
class Scripted(Strategy):
    """Replays a fixed schedule; used to drive exhaustive comparisons.

    ``params["step0"]`` maps a corrupt candidate to ``{honest candidate:
    value}``: that signed Step-0 value is delivered straight to that
    candidate. ``params["release"]`` maps a corrupt candidate to ``(k, target,
    value)``: in iteration ``k`` the target receives a chain for ``value``
    signed by every corrupt candidate, whose evidence is every Step-0
    signature on ``value`` the adversary holds.
    """

    def act(self, view: AdversaryView) -> list[Send]:
        self.observe(view)
        if not self.to_candidates(view):
            return []
        out: list[Send] = []
        step0 = self.ctx.params.get("step0", {})
        release = self.ctx.params.get("release", {})
        if view.iteration == 0:
            for z in self.corrupt_candidates:
                for h, v in sorted(step0.get(z, {}).items()):
                    out.append((z, h, [self.step0(z, v)]))
            return out
        for z in self.corrupt_candidates:
            spec = release.get(z)
            if spec is None or spec[0] != view.iteration:
                continue
            _, target, value = spec
            signed = {w for w, sched in step0.items() if value in sched.values()}
            msgs = [self.step0(w, value) for w in self.corrupt_candidates if w in signed]
            msgs += [m for m in self.honest_step0.values() if m.value == value]
            out.append((z, target, [self.chain(self.ballot(value, msgs), self.corrupt_candidates)]))
        return out
