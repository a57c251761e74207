"""Knowledge-level reference for small committees, written without the package.

It tracks which ballots each honest candidate knows about, not messages:
honest candidates always reach each other (every node is a referee at n=8),
an honest candidate that adopts a ballot in iteration i < T passes it to all
honest candidates for iteration i + 1, and a corrupt release reaches only its
target, and only if it carries at least i signatures. Used to cross-check
the message-level state machines over enumerated adversary schedules.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Optional

N = 8
VALUES = (0, 1, 2, 3)


@dataclass(frozen=True)
class Schedule:
    # corrupt candidate -> ((honest target, value), ...): signed Step-0 values delivered only to that target
    step0: tuple[tuple[int, tuple[tuple[int, int], ...]], ...]
    # corrupt candidate -> (iteration, honest target, value)
    release: tuple[tuple[int, tuple[int, int, int]], ...]

    def as_params(self) -> dict:
        return {
            "step0": {z: dict(pairs) for z, pairs in self.step0},
            "release": {z: spec for z, spec in self.release},
        }


def _strength(value: int, support: int, size: int) -> tuple[int, int, int]:
    # a value backed by more than half the committee beats any non-majority one;
    # among majorities more support wins, then the larger value;
    # among non-majorities the smaller value wins
    if support * 2 > size:
        return (1, support, value)
    return (0, 0, -value)


def _value(strength: tuple[int, int, int]) -> int:
    return strength[2] if strength[0] == 1 else -strength[2]


def reference_decisions(
    committee: tuple[int, ...],
    corrupt: frozenset[int],
    inputs: dict[int, int],
    schedule: Schedule,
    iterations: int,
) -> dict[int, int]:
    size = len(committee)
    honest = [u for u in committee if u not in corrupt]
    bad = [u for u in committee if u in corrupt]
    step0 = {z: dict(pairs) for z, pairs in schedule.step0}
    release = dict(schedule.release)

    best: dict[int, tuple[int, int, int]] = {}
    for h in honest:
        seen: dict[int, set[int]] = {}
        for h2 in honest:
            seen.setdefault(inputs[h2], set()).add(h2)
        for z in bad:
            if h in step0.get(z, {}):
                seen.setdefault(step0[z][h], set()).add(z)
        majorities = [(len(s), v) for v, s in seen.items() if 2 * len(s) > size]
        if majorities:
            support, v = max(majorities)
        else:
            v = min(seen)
            support = len(seen[v])
        best[h] = _strength(v, support, size)

    outgoing = dict(best)
    for i in range(1, iterations + 1):
        incoming: dict[int, list] = {h: list(outgoing.values()) for h in honest}
        for z in bad:
            spec = release.get(z)
            if spec is None or spec[0] != i or len(bad) < i:
                continue
            _, target, v = spec
            signers = {w for w in bad if v in step0.get(w, {}).values()}
            signers |= {h for h in honest if inputs[h] == v}
            if signers:
                incoming[target].append(_strength(v, len(signers), size))
        outgoing = {}
        for h in honest:
            if not incoming[h]:
                continue
            top = max(incoming[h])
            if top > best[h]:
                best[h] = top
                if i < iterations:
                    outgoing[h] = top
    return {h: _value(best[h]) for h in honest}


def _step0_options(honest: list[int], max_targets: Optional[int] = None) -> list[tuple[tuple[int, int], ...]]:
    per_target = [[None, *VALUES] for _ in honest]
    out = []
    for combo in itertools.product(*per_target):
        pairs = tuple((h, v) for h, v in zip(honest, combo) if v is not None)
        if max_targets is None or len(pairs) <= max_targets:
            out.append(pairs)
    return out


def _release_options(honest: list[int], iterations: int) -> list[Optional[tuple[int, int, int]]]:
    opts: list[Optional[tuple[int, int, int]]] = [None]
    for k in range(1, iterations + 1):
        for h in honest:
            for v in VALUES:
                opts.append((k, h, v))
    return opts


def enumerate_cases(committee: tuple[int, ...], corrupt: frozenset[int], iterations: int,
                    max_targets: Optional[int] = None):
    """Every (inputs, schedule) pair: honest inputs over VALUES, every Step-0 and release choice.

    ``max_targets`` caps how many honest candidates one corrupt node's Step-0 votes reach.
    """
    honest = [u for u in committee if u not in corrupt]
    bad = [u for u in committee if u in corrupt]
    s0 = _step0_options(honest, max_targets)
    rel = _release_options(honest, iterations)
    per_bad = list(itertools.product(s0, rel))
    for in_combo in itertools.product(VALUES, repeat=len(honest)):
        inputs = dict(zip(honest, in_combo))
        for choice in itertools.product(per_bad, repeat=len(bad)):
            step0 = tuple((z, c[0]) for z, c in zip(bad, choice) if c[0])
            release = tuple((z, c[1]) for z, c in zip(bad, choice) if c[1] is not None)
            yield inputs, Schedule(step0, release)


def sample_cases(committee: tuple[int, ...], corrupt: frozenset[int], iterations: int, count: int, seed: int):
    """A seeded uniform sample of the same space, for committees too large to enumerate."""
    rng = random.Random(seed)
    honest = [u for u in committee if u not in corrupt]
    bad = [u for u in committee if u in corrupt]
    s0 = _step0_options(honest)
    rel = _release_options(honest, iterations)
    for _ in range(count):
        inputs = {h: rng.choice(VALUES) for h in honest}
        step0 = []
        release = []
        for z in bad:
            pairs = rng.choice(s0)
            if pairs:
                step0.append((z, pairs))
            spec = rng.choice(rel)
            if spec is not None:
                release.append((z, spec))
        yield inputs, Schedule(tuple(step0), tuple(release))
