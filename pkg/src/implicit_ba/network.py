"""Synchronous KT0 network with CONGEST fragmentation and exact accounting.

The simulation advances in phases. Within a phase every node hands its
outgoing payloads to the network, the adversary adds its own after seeing
them (rushing), and :meth:`Network.flush` delivers everything at the end of
the phase. A phase lasts as many rounds as its busiest directed edge needs to
carry one fragment per honest round, and never less than one round.
Adversary traffic cannot stretch a phase: each adversary edge carries at
most that many fragments per phase and the rest waits for the next one.

Nodes address ports only. Port ``p`` of node ``i`` leads to a peer given by a
per-node affine bijection over the ``n - 1`` other nodes; receivers learn the
port a message arrived on, never the sender's index.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Optional

import numpy as np

from .errors import CapacityError, SimulationFault
from .protocol import Chain, FinalMsg, Noise, SizeModel, Step0Msg


class PortMap:
    """Hidden wiring of the complete graph: ``peer(i, p)`` for ports ``p`` in ``[0, n-1)``."""

    def __init__(self, n: int, seed: int) -> None:
        if n < 2:
            raise ValueError("a network needs at least two nodes")
        self.n = n
        m = n - 1
        rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, 0x9077]))
        a = np.ones(n, dtype=np.int64)
        if m > 1:
            units = np.array([x for x in range(1, m) if math.gcd(x, m) == 1], dtype=np.int64)
            a = units[rng.integers(0, len(units), size=n)]
        self._a = a
        self._a_inv = np.array([pow(int(x), -1, m) if m > 1 else 1 for x in a], dtype=np.int64)
        self._b = rng.integers(0, m, size=n).astype(np.int64)

    def peer(self, node: int, port: int) -> int:
        m = self.n - 1
        if not 0 <= port < m:
            raise ValueError(f"port {port} outside [0, {m})")
        return int((node + 1 + (self._a[node] * port + self._b[node]) % m) % self.n)

    def peers(self, node: int, ports: np.ndarray) -> np.ndarray:
        m = self.n - 1
        ports = np.asarray(ports, dtype=np.int64)
        return (node + 1 + (self._a[node] * ports + self._b[node]) % m) % self.n

    def port_of(self, node: int, peer: int) -> int:
        return int(self.ports_at(np.array([node]), peer)[0])

    def arrival_ports(self, receivers: np.ndarray, senders: np.ndarray) -> np.ndarray:
        """Port of ``receivers[k]`` that leads to ``senders[k]``, elementwise."""
        m = self.n - 1
        d = (senders - receivers - 1) % self.n
        if np.any(d >= m):
            raise ValueError("a node has no port to itself")
        return ((d - self._b[receivers]) % m) * self._a_inv[receivers] % m

    def ports_at(self, nodes: np.ndarray, peer: int) -> np.ndarray:
        """Port on which each of ``nodes`` sees ``peer``."""
        m = self.n - 1
        nodes = np.asarray(nodes, dtype=np.int64)
        d = (peer - nodes - 1) % self.n
        if np.any(d >= m):
            raise ValueError("a node has no port to itself")
        return ((d - self._b[nodes]) % m) * self._a_inv[nodes] % m


def payload_kind(payload: object) -> str:
    if isinstance(payload, Step0Msg):
        return "step0"
    if isinstance(payload, Chain):
        return "chain"
    if isinstance(payload, FinalMsg):
        return "final"
    if isinstance(payload, Noise):
        return "noise"
    return type(payload).__name__.lower()


@dataclass
class PhaseStats:
    name: str
    iteration: int
    start_round: int
    duration: int
    honest_messages: int
    honest_bits: int
    adversary_messages: int


@dataclass
class Counters:
    honest_messages: int = 0
    honest_bits: int = 0
    adversary_messages: int = 0
    rounds: int = 0
    phases: list[PhaseStats] = field(default_factory=list)


Inbox = list[tuple[int, list]]


class Network:
    """Collects one phase of traffic, accounts for it and delivers it."""

    def __init__(
        self,
        portmap: PortMap,
        sizes: SizeModel,
        corrupt: frozenset[int],
        shuffle_seed: int,
        max_phase_rounds: int,
        trace: Optional[IO[str]] = None,
    ) -> None:
        self.portmap = portmap
        self.n = portmap.n
        self.sizes = sizes
        self.corrupt = corrupt
        self.max_phase_rounds = max_phase_rounds
        self.counters = Counters()
        self._rng = np.random.default_rng(np.random.SeedSequence([int(shuffle_seed) & 0xFFFFFFFFFFFFFFFF, 0x5A0F]))
        self._trace = trace
        self._honest: list[tuple[int, np.ndarray, list]] = []
        self._adv: list[tuple[int, int, list]] = []
        # adversary bundles in flight, in arrival order: [sender, receiver, payloads, fragments left, total]
        self._backlog: list[list] = []

    def _size(self, payloads: list) -> tuple[int, int]:
        return self.sizes.bundle(payloads)

    def multicast(self, sender: int, ports: np.ndarray, payloads: list) -> None:
        """Honest send of the same payload sequence on every port in ``ports``."""
        if sender in self.corrupt:
            raise SimulationFault(f"honest send issued for corrupt node {sender}")
        if not payloads or len(ports) == 0:
            return
        self._honest.append((sender, self.portmap.peers(sender, ports), list(payloads)))

    def inject(self, sender: int, receiver: int, payloads: list) -> None:
        """Adversary send from a corrupt node; the adversary addresses peers directly."""
        if sender not in self.corrupt:
            raise SimulationFault(f"adversary tried to send as honest node {sender}")
        if receiver == sender or not 0 <= receiver < self.n:
            raise SimulationFault(f"invalid receiver {receiver}")
        if payloads:
            self._adv.append((sender, receiver, list(payloads)))

    @property
    def pending_honest(self) -> list[tuple[int, np.ndarray, list]]:
        """Honest envelopes of the current phase, as the rushing adversary sees them."""
        return self._honest

    def flush(self, name: str, iteration: int = 0) -> dict[int, Inbox]:
        """Account for and deliver this phase's traffic; returns each receiver's inbox."""
        start = self.counters.rounds
        if not (self._honest or self._adv or self._backlog):
            self.counters.rounds += 1
            self.counters.phases.append(PhaseStats(name, iteration, start, 1, 0, 0, 0))
            return {}
        honest_msgs = honest_bits = 0
        duration = 1
        per_sender: dict[int, list[tuple[np.ndarray, int]]] = {}
        bundles: list[list] = []
        recv_parts: list[np.ndarray] = []
        send_ids: list[int] = []
        send_counts: list[int] = []
        trace_sends: list[tuple] = []
        for sender, receivers, payloads in self._honest:
            frags, pbits = self._size(payloads)
            honest_msgs += frags * len(receivers)
            honest_bits += pbits * len(receivers)
            per_sender.setdefault(sender, []).append((receivers, frags))
            recv_parts.append(receivers)
            send_ids.append(sender)
            send_counts.append(len(receivers))
            bundles.extend([payloads] * len(receivers))
            if self._trace is not None:
                trace_sends.extend((sender, r, payloads, True, None, 0, None) for r in receivers.tolist())
        for sender, items in per_sender.items():
            if len(items) == 1:
                load = items[0][1]
            else:
                rs = np.concatenate([r for r, _ in items])
                ws = np.concatenate([np.full(len(r), w, dtype=np.int64) for r, w in items])
                load = int(np.bincount(rs, weights=ws).max())
            duration = max(duration, load)
        if duration > self.max_phase_rounds:
            raise CapacityError(
                f"phase {name}:{iteration} needs {duration} rounds on one edge, limit {self.max_phase_rounds}"
            )
        adv_msgs = 0
        adv_r: list[int] = []
        adv_s: list[int] = []
        adv_frags = [self._size(p)[0] for _, _, p in self._adv]
        if not self._backlog and self._trace is None:
            load: dict[tuple[int, int], int] = {}
            for (s, r, _), fr in zip(self._adv, adv_frags):
                load[(s, r)] = load.get((s, r), 0) + fr
            if max(load.values(), default=0) <= duration:
                # common case: every adversary edge drains within the phase
                for s, r, payloads in self._adv:
                    adv_r.append(r)
                    adv_s.append(s)
                    bundles.append(payloads)
                adv_msgs = sum(adv_frags)
                adv_frags = []
        if adv_frags:
            for (s, r, payloads), fr in zip(self._adv, adv_frags):
                self._backlog.append([s, r, payloads, fr, fr])
        if self._backlog:
            # each edge carries `duration` fragments this phase, FIFO; a bundle
            # arrives at the end of the phase that carries its last fragment
            items = self._backlog
            key = np.array([it[0] * self.n + it[1] for it in items], dtype=np.int64)
            left = np.array([it[3] for it in items], dtype=np.int64)
            order = np.argsort(key, kind="stable")
            k = key[order]
            rem = left[order]
            before = np.cumsum(rem) - rem
            first = np.ones(len(k), dtype=bool)
            first[1:] = k[1:] != k[:-1]
            base = np.maximum.accumulate(np.where(first, before, 0))
            offset = before - base
            sent = np.clip(duration - offset, 0, rem)
            adv_msgs += int(sent.sum())
            for j in np.flatnonzero(sent).tolist():
                item = items[order[j]]
                moved = int(sent[j])
                if self._trace is not None:
                    trace_sends.append((item[0], item[1], item[2], False, int(offset[j]), item[4] - item[3], moved))
                item[3] -= moved
                if item[3] == 0:
                    adv_r.append(item[1])
                    adv_s.append(item[0])
                    bundles.append(item[2])
            kept = [items[i] for i in order[rem > sent].tolist()]
            self._backlog = kept
        if adv_r:
            recv_parts.append(np.array(adv_r, dtype=np.int64))
            send_ids.extend(adv_s)
            send_counts.extend([1] * len(adv_s))
        if self._trace is not None:
            self._write_trace(trace_sends, start)
        self._honest = []
        self._adv = []
        c = self.counters
        c.honest_messages += honest_msgs
        c.honest_bits += honest_bits
        c.adversary_messages += adv_msgs
        c.rounds += duration
        c.phases.append(PhaseStats(name, iteration, start, duration, honest_msgs, honest_bits, adv_msgs))
        if not bundles:
            return {}
        senders = np.repeat(np.array(send_ids, dtype=np.int64), np.array(send_counts, dtype=np.int64))
        return self._route(np.concatenate(recv_parts), senders, bundles)

    def _route(self, receivers: np.ndarray, senders: np.ndarray, bundles: list[list]) -> dict[int, Inbox]:
        """Group deliveries by receiver in a seeded random order, tagging each with its arrival port."""
        order = self._rng.permutation(len(bundles))
        receivers = receivers[order]
        ports = self.portmap.arrival_ports(receivers, senders[order])
        by_receiver = np.argsort(receivers, kind="stable")
        r_sorted = receivers[by_receiver]
        cuts = np.flatnonzero(np.diff(r_sorted)) + 1
        bounds = [0, *cuts.tolist(), len(r_sorted)]
        idx = order[by_receiver].tolist()
        port_list = ports[by_receiver].tolist()
        heads = r_sorted[bounds[:-1]].tolist() if len(r_sorted) else []
        inboxes: dict[int, Inbox] = {}
        for k, r in enumerate(heads):
            lo, hi = bounds[k], bounds[k + 1]
            inboxes[r] = [(port_list[j], bundles[idx[j]]) for j in range(lo, hi)]
        return inboxes

    def _fragments(self, payloads: list) -> list[tuple[str, int]]:
        """(kind, bits) of every fragment of a payload sequence, in transmission order."""
        budget = self.sizes.budget
        out = []
        for p in payloads:
            b = self.sizes.bits(p)
            kind = payload_kind(p)
            while True:
                chunk = min(b, budget)
                out.append((kind, chunk))
                b -= chunk
                if b <= 0:
                    break
        return out

    def _write_trace(self, sends: list[tuple], start: int) -> None:
        """One record per fragment. Honest sends are laid out FIFO per edge from the
        phase start; adversary entries carry their own offset and fragment window."""
        edge_next: dict[tuple[int, int], int] = {}
        out = self._trace
        for s, r, payloads, honest, offset, skip, count in sends:
            frags = self._fragments(payloads)
            if offset is None:
                offset = edge_next.get((s, r), 0)
                edge_next[(s, r)] = offset + len(frags)
            else:
                frags = frags[skip:skip + count]
            for k, (kind, bits) in enumerate(frags):
                rec = {"round": start + offset + k, "sender": s, "receiver": r, "kind": kind, "bits": bits, "honest": honest}
                out.write(json.dumps(rec, separators=(",", ":")) + "\n")
