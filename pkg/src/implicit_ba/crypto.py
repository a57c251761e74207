"""Simulated PKI: key pairs, signatures and the keyed hash used for the lottery.

Signatures are SipHash-2-4 tags keyed by a per-node 128-bit secret that only the
simulator holds. Unforgeability is therefore enforced by access control (the
adversary is never handed an honest :class:`SecretKey`) rather than by a
hardness assumption. Everything is a deterministic function of the trial seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import ForgeryError

DIGEST_BITS = 64

# Fixed public key for domain-separated seed derivation and public digests.
_MASTER = (0x1B873593CC9E2D51, 0x85EBCA6BC2B2AE35)

# Payload domains, so a tag over one message kind never verifies as another.
DOM_STEP0 = 1
DOM_BALLOT = 2
DOM_CHAIN = 3
DOM_FINAL = 4
DOM_LOTTERY = 0x4C4F5454  # "LOTT"


def _mask(bits: int) -> int:
    return (1 << bits) - 1


def encode_words(*words: int) -> bytes:
    """Little-endian 64-bit encoding of a payload given as integers."""
    return struct.pack(f"<{len(words)}Q", *(w & 0xFFFFFFFFFFFFFFFF for w in words))


def derive_key(seed: int, label: str) -> tuple[int, int]:
    """128-bit SipHash key for one named random stream of a trial."""
    base = f"{label}:{int(seed)}".encode()
    return (
        _kernels.siphash24(*_MASTER, base + b"/0"),
        _kernels.siphash24(*_MASTER, base + b"/1"),
    )


def public_digest(payload: bytes) -> int:
    """Unkeyed (publicly computable) 64-bit digest, used to name ballots."""
    return _kernels.siphash24(*_MASTER, payload)


@dataclass(frozen=True)
class SecretKey:
    owner: int
    k0: int = field(repr=False)
    k1: int = field(repr=False)


@dataclass(frozen=True)
class KeyPair:
    public_key: int
    secret_key: SecretKey


@dataclass(frozen=True, slots=True)
class Signature:
    """A tag over a payload; ``signer`` is the node index the tag claims."""

    signer: int
    tag: int


def sign(secret_key: SecretKey, payload: bytes) -> Signature:
    return Signature(secret_key.owner, _kernels.siphash24(secret_key.k0, secret_key.k1, payload))


def _secret_for(seed: int, index: int) -> SecretKey:
    k0, k1 = derive_key(seed, "secret")
    return SecretKey(index, _kernels.siphash24_u64(k0, k1, 2 * index), _kernels.siphash24_u64(k0, k1, 2 * index + 1))


def public_key_array(seed: int, n: int, bits: int = DIGEST_BITS) -> np.ndarray:
    """All n public keys of a trial as a ``uint64`` array (collisions re-rolled)."""
    k0, k1 = derive_key(seed, "pubkey")
    raw = _kernels.siphash24_u64_array(k0, k1, np.arange(n, dtype=np.uint64))
    if bits < 64:
        raw = raw & np.uint64(_mask(bits))
    if len(np.unique(raw)) == n:
        return raw
    if n > (1 << bits):
        raise ValueError(f"cannot draw {n} distinct {bits}-bit public keys")
    keys = [int(x) for x in raw]
    taken: set[int] = set()
    for i, k in enumerate(keys):
        salt = 0
        while k in taken:
            salt += 1
            k = _kernels.siphash24_u64(k0, k1, (salt << 40) | i) & _mask(bits)
        taken.add(k)
        keys[i] = k
    return np.array(keys, dtype=np.uint64)


@lru_cache(maxsize=16)
def _public_keys(seed: int, n: int, bits: int) -> tuple[int, ...]:
    return tuple(int(x) for x in public_key_array(seed, n, bits))


def gen_keypair(trial_seed: int, node_index: int, n: int, bits: int = DIGEST_BITS) -> KeyPair:
    """Key pair of one node; distinct from every other node's key in the same trial."""
    if not 0 <= node_index < n:
        raise ValueError(f"node_index {node_index} outside [0, {n})")
    return KeyPair(_public_keys(trial_seed, n, bits)[node_index], _secret_for(trial_seed, node_index))


def keyed_hash(key: int, message: int, salt: int = 0, bits: int = DIGEST_BITS) -> int:
    """H_key(message) truncated to ``bits``; ``salt`` re-derives on collisions."""
    k1 = DOM_LOTTERY ^ (salt << 32)
    return _kernels.siphash24_u64(key, k1, message) & _mask(bits)


def lottery_digests(key: int, messages, bits: int = DIGEST_BITS, max_salt: int = 32) -> np.ndarray:
    """Keyed hashes of all messages, with collisions re-derived by salt.

    Within a collision group the largest message keeps its digest and the
    others are re-hashed with an incrementing salt. If the digest space is too
    small to separate everything, the remaining ties are left for the caller
    to break (by larger message).
    """
    msgs = np.asarray(messages, dtype=np.uint64)
    out = _kernels.siphash24_u64_array(key, DOM_LOTTERY, msgs)
    if bits < 64:
        out = out & np.uint64(_mask(bits))
    if len(np.unique(out)) == len(out):
        return out
    digests = [int(x) for x in out]
    keeper: dict[int, int] = {}
    for i, d in enumerate(digests):
        j = keeper.get(d)
        if j is None or int(msgs[i]) > int(msgs[j]):
            keeper[d] = i
    losers = sorted((i for i, d in enumerate(digests) if keeper[d] != i), key=lambda i: -int(msgs[i]))
    taken = set(digests)
    for i in losers:
        salt = 1
        d = keyed_hash(key, int(msgs[i]), salt, bits)
        while d in taken and salt < max_salt:
            salt += 1
            d = keyed_hash(key, int(msgs[i]), salt, bits)
        digests[i] = d
        taken.add(d)
    return np.array(digests, dtype=np.uint64)


class Pki:
    """The trusted setup for one trial: all public keys and the secrets behind them.

    ``public_keys`` is common knowledge. Secrets are only handed out through
    :meth:`secret_key`, which the engine calls for honest nodes and which the
    adversary toolkit calls only for corrupt ones.
    """

    def __init__(self, seed: int, n: int, bits: int = DIGEST_BITS, log_signatures: bool = False) -> None:
        self.seed = seed
        self.n = n
        self.bits = bits
        self.public_keys: tuple[int, ...] = _public_keys(seed, n, bits)
        self._index = {pk: i for i, pk in enumerate(self.public_keys)}
        self._secrets: dict[int, SecretKey] = {}
        self.sign_log: set[tuple[int, int]] | None = set() if log_signatures else None

    def _secret(self, index: int) -> SecretKey:
        sk = self._secrets.get(index)
        if sk is None:
            sk = self._secrets[index] = _secret_for(self.seed, index)
        return sk

    def secret_key(self, index: int) -> SecretKey:
        return self._secret(index)

    def keypair(self, index: int) -> KeyPair:
        return KeyPair(self.public_keys[index], self._secret(index))

    def sign(self, secret_key: SecretKey, payload: bytes) -> Signature:
        sig = sign(secret_key, payload)
        if self.sign_log is not None:
            self.sign_log.add((sig.signer, sig.tag))
        return sig

    def verify(self, public_key: int, payload: bytes, sig: Signature) -> bool:
        index = self._index.get(public_key)
        if index is None:
            return False
        return self.verify_index(index, payload, sig)

    def verify_index(self, index: int, payload: bytes, sig: object) -> bool:
        if not isinstance(sig, Signature) or sig.signer != index or not 0 <= index < self.n:
            return False
        sk = self._secret(index)
        return _kernels.siphash24(sk.k0, sk.k1, payload) == sig.tag

    def was_signed(self, sig: Signature) -> bool:
        """True iff the tag was produced by a logged sign call (needs ``log_signatures``)."""
        if self.sign_log is None:
            raise RuntimeError("signature logging is off")
        return (sig.signer, sig.tag) in self.sign_log


class Signer:
    """Signing capability restricted to a fixed set of nodes."""

    def __init__(self, pki: Pki, allowed: frozenset[int]) -> None:
        self._pki = pki
        self._allowed = allowed

    def sign_as(self, node: int, payload: bytes) -> Signature:
        if node not in self._allowed:
            raise ForgeryError(f"signature requested under node {node}'s key, which is not held")
        return self._pki.sign(self._pki.secret_key(node), payload)
