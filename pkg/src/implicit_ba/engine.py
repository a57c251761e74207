"""Trial orchestration: setup in the order the model requires, then the protocol phases.

Setup order is adversary commitment, PKI, coin, committee, referees. A
:class:`~implicit_ba.errors.PhaseClock` enforces it, so the corrupt set can
never depend on the keys or the coin.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import IO, Any, Optional

import numpy as np

from . import committee as cm
from .adversary import AdversaryContext, AdversaryView, choose_corrupt_set, get_strategy, max_faults
from .crypto import DIGEST_BITS, Pki, Signer
from .errors import ConfigError, PhaseClock
from .network import Network, PortMap
from .protocol import CandidateState, RefereeState, SizeModel, Verifier, tally_finals

MODES = ("implicit", "explicit", "kt1", "pubkey-select")
INPUT_MODES = ("unanimous", "random", "alternate")
PROFILES = ("paper", "desk")


@dataclass
class TrialConfig:
    """One trial. ``c=None`` takes the constant from ``profile``; ``f=None`` means the largest tolerated f."""

    n: int
    eps: float = 0.1
    f: Optional[int] = None
    c: Optional[float] = None
    profile: str = "paper"
    mode: str = "implicit"
    adversary: str = "silent"
    seed: int = 0
    adversary_seed: Optional[int] = None
    inputs: str = "unanimous"
    input_value: int = 5
    value_domain: int = 16
    word_factor: int = 8
    digest_bits: int = DIGEST_BITS
    corrupt: Optional[tuple[int, ...]] = None
    input_values: Optional[tuple[int, ...]] = None
    adversary_params: dict[str, Any] = field(default_factory=dict)

    def resolved_c(self) -> float:
        if self.c is not None:
            return float(self.c)
        return cm.paper_c(self.eps) if self.profile == "paper" else cm.desk_c(self.eps)

    def resolved_f(self) -> int:
        if self.corrupt is not None:
            return len(set(self.corrupt))
        return max_faults(self.n, self.eps) if self.f is None else self.f

    def validate(self) -> None:
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if not 0 < self.eps < 0.5:
            raise ConfigError("eps must lie in (0, 1/2)")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.inputs not in INPUT_MODES:
            raise ConfigError(f"inputs must be one of {INPUT_MODES}")
        if self.profile not in PROFILES:
            raise ConfigError(f"profile must be one of {PROFILES}")
        if self.c is not None and self.c <= 0:
            raise ConfigError("c must be positive")
        if self.value_domain < 1 or not 0 <= self.input_value < self.value_domain:
            raise ConfigError("input_value must lie in [0, value_domain)")
        if self.input_values is not None and (
            len(self.input_values) != self.n or any(not 0 <= v < self.value_domain for v in self.input_values)
        ):
            raise ConfigError("input_values needs one value in [0, value_domain) per node")
        if self.word_factor < 1:
            raise ConfigError("word_factor must be at least 1")
        f, limit = self.resolved_f(), max_faults(self.n, self.eps)
        if f < 0 or f > limit:
            raise ConfigError(f"f={f} exceeds floor((1/2 - eps) n) = {limit} for n={self.n}, eps={self.eps}")
        if self.corrupt is not None and any(not 0 <= u < self.n for u in self.corrupt):
            raise ConfigError("corrupt override names a node outside [0, n)")
        get_strategy(self.adversary)


def make_inputs(cfg: TrialConfig) -> list[int]:
    """Input values for every node, chosen by the environment (not the protocol)."""
    if cfg.input_values is not None:
        return list(cfg.input_values)
    if cfg.inputs == "alternate":
        kind = "unanimous" if cfg.seed % 2 == 0 else "random"
    else:
        kind = cfg.inputs
    if kind == "unanimous":
        return [cfg.input_value] * cfg.n
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed & 0xFFFFFFFFFFFFFFFF, 0x1297]))
    return [int(v) for v in rng.integers(0, cfg.value_domain, size=cfg.n)]


@dataclass
class PropertyVerdict:
    consistency: bool
    validity: bool
    termination: bool
    implicit_states: bool
    honest_majority: bool
    referee_coverage: bool

    @property
    def agreement_ok(self) -> bool:
        return self.consistency and self.validity and self.termination and self.implicit_states


@dataclass
class TrialReport:
    n: int
    eps: float
    f: int
    c: float
    mode: str
    adversary: str
    seed: int
    adversary_seed: int
    word_factor: int
    committee_size: int
    iteration_budget: int
    referee_sample: int
    committee: list[int]
    corrupt_in_committee: int
    honest_majority: bool
    referee_coverage_ok: bool
    unanimous_input: Optional[int]
    decisions: list[Optional[int]]
    honest: list[bool]
    honest_messages: int
    honest_bits: int
    adversary_messages: int
    rounds: int
    iterations: int
    final_messages: int
    phase_rounds: dict[str, int]
    phase_messages: dict[str, int]
    verdict: Optional[dict[str, bool]] = None

    @property
    def decided_values(self) -> set[int]:
        return {d for d, h in zip(self.decisions, self.honest) if h and d is not None}

    @property
    def committee_corrupt_frac(self) -> float:
        return self.corrupt_in_committee / self.committee_size

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        """Canonical JSON: sorted keys, fixed separators, so equal reports are equal bytes."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def check_properties(report: TrialReport, inputs: list[int]) -> PropertyVerdict:
    """Agreement properties over honest nodes, plus the per-trial committee facts."""
    honest_idx = [i for i, h in enumerate(report.honest) if h]
    decided = {report.decisions[i] for i in honest_idx if report.decisions[i] is not None}
    consistency = len(decided) <= 1
    honest_inputs = {inputs[i] for i in honest_idx}
    validity = True
    if len(honest_inputs) == 1:
        (v,) = honest_inputs
        validity = all(report.decisions[i] in (None, v) for i in honest_idx)
    members = set(report.committee)
    honest_members = [i for i in report.committee if report.honest[i]]
    if report.mode == "explicit":
        termination = all(report.decisions[i] is not None for i in honest_idx)
        implicit_states = True
    else:
        termination = not honest_members or any(report.decisions[i] is not None for i in honest_members)
        implicit_states = all(report.decisions[i] is None for i in honest_idx if i not in members)
    termination = termination and report.iterations <= report.iteration_budget
    return PropertyVerdict(
        consistency, validity, termination, implicit_states, report.honest_majority, report.referee_coverage_ok
    )


@dataclass
class Setup:
    """Everything fixed before the first message: corrupt set, keys, committee, wiring, referees."""

    corrupt: frozenset[int]
    adversary_seed: int
    pki: Pki
    c: float
    budget: int
    committee: cm.CandidateSet
    portmap: PortMap
    ports: dict[int, np.ndarray]
    referees: dict[int, np.ndarray]
    clock: PhaseClock


def build_setup(cfg: TrialConfig) -> Setup:
    """Run the pre-protocol steps in the order the model requires."""
    cfg.validate()
    n = cfg.n
    clock = PhaseClock()
    adversary_seed = cfg.seed if cfg.adversary_seed is None else cfg.adversary_seed
    if cfg.corrupt is not None:
        corrupt = frozenset(cfg.corrupt)
    else:
        corrupt = choose_corrupt_set(n, cfg.resolved_f(), cfg.adversary, adversary_seed, cfg.eps)
    clock.mark("adversary_committed")
    pki = Pki(cfg.seed, n, cfg.digest_bits, log_signatures=False)
    clock.mark("pki_published")
    c = cfg.resolved_c()
    size = cm.committee_size(n, c)
    if cfg.mode == "pubkey-select":
        committee = cm.select_candidates_by_pubkey(pki.public_keys, size)
    else:
        coin = cm.draw_coin(cfg.seed, cfg.digest_bits, clock)
        committee = cm.select_candidates(coin, pki.public_keys, size, cfg.digest_bits)
    portmap = PortMap(n, cfg.seed)
    ports: dict[int, np.ndarray] = {}
    referees: dict[int, np.ndarray] = {}
    for u in committee.members:
        if cfg.mode == "kt1":
            # KT1: a candidate knows which port leads to each fellow candidate
            ports[u] = np.array([portmap.port_of(u, v) for v in committee.members if v != u], dtype=np.int64)
        else:
            ports[u] = cm.sample_referee_ports(n, cm.node_rng(cfg.seed, u))
        referees[u] = portmap.peers(u, ports[u])
    return Setup(corrupt, adversary_seed, pki, c, cm.iteration_budget(n, c), committee, portmap, ports, referees, clock)


class _Trial:
    """State of one running trial; :func:`run_trial` is the public entry point."""

    def __init__(self, cfg: TrialConfig, trace: Optional[IO[str]]) -> None:
        setup = build_setup(cfg)
        self.cfg = cfg
        n = cfg.n
        self.clock = setup.clock
        self.adversary_seed = setup.adversary_seed
        self.corrupt = setup.corrupt
        self.pki = setup.pki
        self.c = setup.c
        self.budget = setup.budget
        self.committee = setup.committee
        self.portmap = setup.portmap
        self.ports = setup.ports
        self.referees = setup.referees
        self.kt1 = cfg.mode == "kt1"
        members = self.committee.members
        self.inputs = make_inputs(cfg)
        log_n = max(1, math.ceil(math.log2(n)))
        value_bits = max(1, math.ceil(math.log2(cfg.value_domain))) if cfg.value_domain > 1 else 1
        self.sizes = SizeModel(log_n, value_bits, log_n, cfg.word_factor)
        self.net = Network(self.portmap, self.sizes, self.corrupt, cfg.seed, self.budget, trace)
        self.verifier = Verifier(self.pki, self.committee)
        self.candidates: dict[int, CandidateState] = {}
        for u in members:
            if u not in self.corrupt:
                self.candidates[u] = CandidateState(
                    u, self.inputs[u], self.pki.secret_key(u), self.pki.sign, self.verifier, list(self.ports[u])
                )
        self.referee_states: dict[int, RefereeState] = {}
        self.strategy = get_strategy(cfg.adversary)(
            AdversaryContext(
                n=n,
                corrupt=self.corrupt,
                committee=self.committee,
                referees=self.referees,
                inputs=self.inputs,
                signer=Signer(self.pki, self.corrupt),
                verifier=self.verifier,
                rng=np.random.default_rng(np.random.SeedSequence([self.adversary_seed & 0xFFFFFFFFFFFFFFFF, cfg.seed & 0xFFFFFFFFFFFFFFFF, 0xAD])),
                value_domain=cfg.value_domain,
                iterations=self.budget,
                mode="kt1" if self.kt1 else "kt0",
                peer=self.portmap.peer,
                params=dict(cfg.adversary_params),
            )
        )
        self.corrupt_inbox: dict[int, list[tuple[int, list]]] = {}
        self.iterations = 0

    def referee(self, node: int) -> RefereeState:
        st = self.referee_states.get(node)
        if st is None:
            st = self.referee_states[node] = RefereeState(node, self.verifier)
        return st

    def phase(self, name: str, iteration: int = 0) -> dict[int, list]:
        """Let the adversary act on this phase's honest traffic, then deliver everything."""
        view = AdversaryView(
            name, iteration, self.net.pending_honest, self.corrupt_inbox, self.candidates, self.portmap.peers
        )
        for sender, receiver, payloads in self.strategy.act(view):
            self.net.inject(sender, receiver, payloads)
        inboxes = self.net.flush(name, iteration)
        corrupt = self.corrupt
        # port-tagged, as delivered; the view translates ports to senders on demand
        self.corrupt_inbox = {z: inboxes.pop(z) for z in [r for r in inboxes if r in corrupt]}
        return inboxes

    def run_kt0(self) -> None:
        net, cands = self.net, self.candidates
        for u, st in cands.items():
            net.multicast(u, self.ports[u], st.step0())
        for node, inbox in self.phase("step0").items():
            self.referee(node).absorb_step0(inbox)
        for node in sorted(self.referee_states):
            ref = self.referee_states[node]
            if ref.contacts:
                net.multicast(node, np.array(ref.ports, dtype=np.int64), ref.relay0())
        for node, inbox in self.phase("relay0").items():
            if node in cands:
                cands[node].absorb_step0(inbox)
        for u, st in cands.items():
            net.multicast(u, self.ports[u], [st.propose()])
        up = self.phase("up", 1)
        for i in range(1, self.budget + 1):
            for node in sorted(up):
                fwd = self.referee(node).iterate(up[node], i)
                if fwd is not None:
                    net.multicast(node, np.array(self.referee_states[node].ports, dtype=np.int64), [fwd])
            down = self.phase("down", i)
            last = i == self.budget
            for u in sorted(cands):
                out = cands[u].iterate(down.get(u, []), i, last)
                if out is not None:
                    net.multicast(u, self.ports[u], [out])
            self.iterations = i
            if not last:
                up = self.phase("up", i + 1)

    def run_kt1(self) -> None:
        net, cands = self.net, self.candidates
        for u, st in cands.items():
            net.multicast(u, self.ports[u], st.step0())
        for node, inbox in self.phase("step0").items():
            if node in cands:
                cands[node].absorb_step0(inbox)
        for u, st in cands.items():
            net.multicast(u, self.ports[u], [st.propose()])
        for i in range(1, self.budget + 1):
            inbox = self.phase("direct", i)
            last = i == self.budget
            for u in sorted(cands):
                out = cands[u].iterate(inbox.get(u, []), i, last)
                if out is not None and not last:
                    net.multicast(u, self.ports[u], [out])
            self.iterations = i

    def run(self) -> TrialReport:
        cfg, n = self.cfg, self.cfg.n
        if self.kt1:
            self.run_kt1()
        else:
            self.run_kt0()
        decisions: list[Optional[int]] = [None] * n
        for u, st in self.candidates.items():
            decisions[u] = st.decide()
        final_messages = 0
        if cfg.mode == "explicit":
            before = self.net.counters.honest_messages
            everyone = np.arange(n - 1, dtype=np.int64)
            for u in sorted(self.candidates):
                self.net.multicast(u, everyone, [self.candidates[u].final_message()])
            inboxes = self.phase("final", self.budget + 1)
            for node in range(n):
                if node in self.corrupt or node in self.candidates:
                    continue
                payloads = [p for _, bundle in inboxes.get(node, []) for p in bundle]
                decisions[node] = tally_finals(payloads, self.verifier)
            final_messages = self.net.counters.honest_messages - before
        counters = self.net.counters
        phase_rounds: dict[str, int] = {}
        phase_messages: dict[str, int] = {}
        for ph in counters.phases:
            phase_rounds[ph.name] = phase_rounds.get(ph.name, 0) + ph.duration
            phase_messages[ph.name] = phase_messages.get(ph.name, 0) + ph.honest_messages
        honest = [i not in self.corrupt for i in range(n)]
        honest_inputs = {self.inputs[i] for i in range(n) if honest[i]}
        report = TrialReport(
            n=n,
            eps=cfg.eps,
            f=len(self.corrupt),
            c=self.c,
            mode=cfg.mode,
            adversary=cfg.adversary,
            seed=cfg.seed,
            adversary_seed=self.adversary_seed,
            word_factor=cfg.word_factor,
            committee_size=len(self.committee),
            iteration_budget=self.budget,
            referee_sample=0 if self.kt1 else cm.referee_sample_size(n),
            committee=list(self.committee.members),
            corrupt_in_committee=cm.corrupt_in(self.committee, self.corrupt),
            honest_majority=cm.honest_majority(self.committee, self.corrupt),
            referee_coverage_ok=True if self.kt1 else cm.referee_coverage(self.committee, self.referees, self.corrupt, n),
            unanimous_input=next(iter(honest_inputs)) if len(honest_inputs) == 1 else None,
            decisions=decisions,
            honest=honest,
            honest_messages=counters.honest_messages,
            honest_bits=counters.honest_bits,
            adversary_messages=counters.adversary_messages,
            rounds=counters.rounds,
            iterations=self.iterations,
            final_messages=final_messages,
            phase_rounds=phase_rounds,
            phase_messages=phase_messages,
        )
        report.verdict = asdict(check_properties(report, self.inputs))
        return report


def run_trial(cfg: TrialConfig, trace: Optional[IO[str]] = None) -> TrialReport:
    """Run one trial; deterministic in the config (seeds included)."""
    return _Trial(cfg, trace).run()


def run_implicit(cfg: TrialConfig) -> list[Optional[int]]:
    return run_trial(_with_mode(cfg, "implicit")).decisions


def run_explicit(cfg: TrialConfig) -> list[Optional[int]]:
    return run_trial(_with_mode(cfg, "explicit")).decisions


def run_kt1(cfg: TrialConfig) -> list[Optional[int]]:
    return run_trial(_with_mode(cfg, "kt1")).decisions


def _with_mode(cfg: TrialConfig, mode: str) -> TrialConfig:
    data = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    data["mode"] = mode
    return TrialConfig(**data)


@dataclass(frozen=True)
class LeaderResult:
    leader: int
    honest: bool
    messages: int


def run_leader_election(n: int, f: int, seed: int, adversary_seed: Optional[int] = None, eps: float = 0.1,
                        bits: int = DIGEST_BITS) -> LeaderResult:
    """Elect the node whose key is nearest the coin; no message is ever sent."""
    clock = PhaseClock()
    corrupt = choose_corrupt_set(n, f, "leader", seed if adversary_seed is None else adversary_seed, eps)
    clock.mark("adversary_committed")
    pki = Pki(seed, n, bits)
    clock.mark("pki_published")
    coin = cm.draw_coin(seed, bits, clock)
    leader = cm.elect_leader(coin, pki.public_keys)
    return LeaderResult(leader, leader not in corrupt, 0)
