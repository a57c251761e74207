"""Global coin, hash-lottery committee, referee sampling and leader election."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .crypto import DIGEST_BITS, derive_key, lottery_digests
from .errors import ConfigWarning, PhaseClock

HASH_LOTTERY = "hash_lottery"
SMALLEST_PUBKEY = "smallest_pubkey"

# Committee constant for desk-scale runs; see ``desk_c``.
DESK_C = 9.1


def paper_c(eps: float) -> float:
    """c = 3*alpha/eps^2 with alpha = 1/2 - eps."""
    alpha = 0.5 - eps
    return 3.0 * alpha / (eps * eps)


def desk_c(eps: float) -> float:
    return DESK_C


def _ceil(x: float) -> int:
    # guards against 30.000000000000004 style products
    return math.ceil(x - 1e-9)


def committee_size(n: int, c: float) -> int:
    return max(1, min(_ceil(c * math.log2(n)), n)) if n > 1 else 1


def iteration_budget(n: int, c: float) -> int:
    """Number of Step 1/2 iterations, ceil(c log2 n) (not clamped to n)."""
    return max(1, _ceil(c * math.log2(n))) if n > 1 else 1


def referee_sample_size(n: int) -> int:
    """ceil(2 sqrt(n log2 n)), capped at the n - 1 other nodes."""
    if n <= 1:
        return 0
    return min(_ceil(2.0 * math.sqrt(n * math.log2(n))), n - 1)


def draw_coin(trial_seed: int, bits: int = DIGEST_BITS, clock: PhaseClock | None = None) -> int:
    """The shared random number r, revealed after the corrupt set is fixed."""
    if clock is not None:
        clock.require("adversary_committed")
        clock.mark("coin_drawn")
    k0, k1 = derive_key(trial_seed, "coin")
    return _kernels.siphash24_u64(k0, k1, 0) & ((1 << bits) - 1)


@dataclass(frozen=True)
class CandidateSet:
    """Committee members in lottery order (best rank first)."""

    members: tuple[int, ...]
    selection_mode: str

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, node: object) -> bool:
        return node in self.as_set

    @property
    def as_set(self) -> frozenset[int]:
        cached = self.__dict__.get("_set")
        if cached is None:
            cached = frozenset(self.members)
            object.__setattr__(self, "_set", cached)
        return cached


def _clamp(size: int, n: int) -> int:
    if size < 1:
        raise ValueError("committee_size must be at least 1")
    if size > n:
        warnings.warn(f"committee_size {size} > n={n}; clamped to n", ConfigWarning, stacklevel=3)
        return n
    return size


def select_by_digests(digests: Sequence[int], public_keys: Sequence[int], committee_size: int) -> list[int]:
    """Indices of the ``committee_size`` smallest digests; ties go to the larger public key."""
    d = np.asarray(digests, dtype=np.uint64)
    pk = np.asarray(public_keys, dtype=np.uint64)
    # lexsort sorts by the last key first; ~pk orders larger keys earlier
    order = np.lexsort((~pk, d))
    return [int(i) for i in order[:committee_size]]


def select_candidates(
    coin: int, public_keys: Sequence[int], committee_size: int, bits: int = DIGEST_BITS
) -> CandidateSet:
    n = len(public_keys)
    size = _clamp(committee_size, n)
    digests = lottery_digests(coin, public_keys, bits)
    return CandidateSet(tuple(select_by_digests(digests, public_keys, size)), HASH_LOTTERY)


def select_candidates_by_pubkey(public_keys: Sequence[int], committee_size: int) -> CandidateSet:
    n = len(public_keys)
    size = _clamp(committee_size, n)
    order = np.argsort(np.asarray(public_keys, dtype=np.uint64), kind="stable")
    return CandidateSet(tuple(int(i) for i in order[:size]), SMALLEST_PUBKEY)


def node_rng(trial_seed: int, node: int) -> np.random.Generator:
    """Private randomness of one node, independent across nodes and replayable."""
    return np.random.default_rng(np.random.SeedSequence([int(trial_seed) & 0xFFFFFFFFFFFFFFFF, 0x5EF, int(node)]))


def sample_referee_ports(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample without replacement of ``referee_sample_size(n)`` of a node's n - 1 ports."""
    k = referee_sample_size(n)
    if k >= n - 1:
        return np.arange(n - 1, dtype=np.int64)
    return np.sort(rng.choice(n - 1, size=k, replace=False)).astype(np.int64)


def sample_referees(candidate: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Referee node indices for one candidate, uniform among the other nodes.

    Uses the identity wiring (port ``p`` leads to the p-th other node); the
    engine maps the same port sample through the hidden port map instead.
    """
    others = sample_referee_ports(n, rng)
    # skip the candidate's own index
    return others + (others >= candidate)


def assign_referees(committee: CandidateSet, n: int, trial_seed: int) -> dict[int, np.ndarray]:
    return {u: sample_referees(u, n, node_rng(trial_seed, u)) for u in committee.members}


def elect_leader(coin: int, public_keys: Sequence[int]) -> int:
    """Node whose key is nearest the coin; equal distance goes to the larger key."""
    return int(_kernels.nearest_key(np.asarray(public_keys, dtype=np.uint64), coin))


def corrupt_in(committee: CandidateSet, corrupt: frozenset[int] | set[int]) -> int:
    return sum(1 for u in committee.members if u in corrupt)


def honest_majority(committee: CandidateSet, corrupt: frozenset[int] | set[int]) -> bool:
    """Strictly fewer than half the members are corrupt."""
    return 2 * corrupt_in(committee, corrupt) < len(committee)


def referee_coverage(
    committee: CandidateSet, referees: Mapping[int, np.ndarray], corrupt: frozenset[int] | set[int], n: int
) -> bool:
    """Every pair of honest candidates shares at least one honest referee."""
    honest_members = [u for u in committee.members if u not in corrupt]
    if len(honest_members) < 2:
        return True
    membership = np.zeros((len(honest_members), n), dtype=np.uint8)
    for row, u in enumerate(honest_members):
        membership[row, referees[u]] = 1
    honest = np.ones(n, dtype=np.uint8)
    if corrupt:
        honest[list(corrupt)] = 0
    return bool(_kernels.pairwise_common_honest(membership, honest))
