"""Hashing, deterministic signatures, nonce chains, and the commitment registry.

A nonce chain is a one-way hash chain built from a private master key. The
final link (the m-fold hash of the chain base) is published as a commitment;
per-height participation reveals earlier links, each checkable against the
commitment by re-hashing. Chain indexing follows element(d) = hash^(m-d)(base),
so the commitment is element(0) and valid reveals use d in [1, m].
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

DIGEST_SIZE = 32

# Domain separator between the master key and the chain base.
_BASE_TAG = b"base"


class CryptoError(Exception):
    """Base error for this module."""


class HeightOutOfRange(CryptoError):
    """Requested reveal height falls outside the chain's usable window."""


class StaleRegistration(CryptoError):
    """Re-registration overlaps the height window of an existing entry."""


class NotRegistered(CryptoError):
    """No active registry entry for the node."""


class Digest(bytes):
    """A 32-byte hash value. Renders as 64 lowercase hex chars via .hex()."""

    def __new__(cls, value: bytes) -> "Digest":
        if len(value) != DIGEST_SIZE:
            raise ValueError(f"digest must be {DIGEST_SIZE} bytes, got {len(value)}")
        return super().__new__(cls, value)

    @classmethod
    def from_hex(cls, text: str) -> "Digest":
        return cls(bytes.fromhex(text))


ZERO_DIGEST = Digest(bytes(DIGEST_SIZE))


def hash_bytes(data: bytes) -> Digest:
    """SHA-256 of data."""
    return Digest(hashlib.sha256(data).digest())


def hash_iter(seed: Digest, n: int) -> Digest:
    """n-fold composition of hash_bytes starting from seed. n = 0 is identity."""
    if n < 0:
        raise ValueError("iteration count must be >= 0")
    value = bytes(seed)
    sha256 = hashlib.sha256
    for _ in range(n):
        value = sha256(value).digest()
    return Digest(value)


# ---------------------------------------------------------------------------
# Signatures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Keypair:
    """Deterministic signing identity. node_id is the hash of the public key."""

    private_key: bytes
    public_key: bytes
    node_id: Digest
    _signer: object = field(compare=False, repr=False, default=None)


class Ed25519Scheme:
    """Default signature scheme: Ed25519 (deterministic by construction).

    The scheme object exists so a lighter simulation-grade scheme can be
    swapped in without touching callers; all module-level helpers delegate
    to the active scheme.
    """

    def keypair_from_seed(self, seed: bytes) -> Keypair:
        if len(seed) != 32:
            raise ValueError("seed must be 32 bytes")
        signer = Ed25519PrivateKey.from_private_bytes(seed)
        public = signer.public_key().public_bytes_raw()
        return Keypair(
            private_key=seed,
            public_key=public,
            node_id=hash_bytes(public),
            _signer=signer,
        )

    def sign(self, key: Keypair, message: bytes) -> bytes:
        signer = key._signer
        if signer is None:
            signer = Ed25519PrivateKey.from_private_bytes(key.private_key)
        return signer.sign(message)

    def verify(self, public_key: bytes, message: bytes, signature: bytes) -> bool:
        try:
            Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
            return True
        except (InvalidSignature, ValueError):
            return False


_scheme = Ed25519Scheme()


def keypair_from_seed(seed: bytes) -> Keypair:
    """Derive a keypair deterministically from a 32-byte seed."""
    return _scheme.keypair_from_seed(seed)


def sign(key: Keypair, message: bytes) -> bytes:
    """Sign message; byte-identical across calls for the same (key, message)."""
    return _scheme.sign(key, message)


def verify(public_key: bytes, message: bytes, signature: bytes) -> bool:
    """True iff signature is valid for (public_key, message). Never raises."""
    return _scheme.verify(public_key, message, signature)


# ---------------------------------------------------------------------------
# Nonce chains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NonceChain:
    """A node's private hash chain plus its public commitment.

    elements[d] = hash^(m-d)(base) for d in [0, m]; elements[0] is the public
    commitment, elements[m] is the base. Elements other than the commitment
    must never leave the owning node except through chain_reveal.
    """

    master_key: bytes
    m: int
    start_height: int
    elements: tuple
    commitment: Digest


def chain_generate(master_key: bytes, m: int, start_height: int) -> NonceChain:
    """Build a nonce chain of length m usable at heights start_height+1 .. start_height+m."""
    if m < 1:
        raise ValueError("chain length m must be >= 1")
    base = hash_bytes(master_key + _BASE_TAG)
    # Walk from the base down to the commitment; elements[d] = hash^(m-d)(base).
    links = [bytes(base)]
    sha256 = hashlib.sha256
    value = bytes(base)
    for _ in range(m):
        value = sha256(value).digest()
        links.append(value)
    links.reverse()
    elements = tuple(Digest(v) for v in links)
    return NonceChain(
        master_key=master_key,
        m=m,
        start_height=start_height,
        elements=elements,
        commitment=elements[0],
    )


def chain_commitment(chain: NonceChain) -> Digest:
    """The public commitment: the m-fold hash of the chain base."""
    return chain.commitment


def chain_reveal(chain: NonceChain, height: int) -> tuple[Digest, int]:
    """Reveal the element for a block height as (element, d) with d = height - start_height.

    Raises HeightOutOfRange outside [start_height + 1, start_height + m]; the
    node must then register a fresh chain before participating again.
    """
    d = height - chain.start_height
    if not 1 <= d <= chain.m:
        raise HeightOutOfRange(
            f"height {height} outside usable window "
            f"[{chain.start_height + 1}, {chain.start_height + chain.m}]"
        )
    return chain.elements[d], d


def reveal_verify(element: Digest, d: int, commitment: Digest) -> bool:
    """True iff d-fold hashing of element reproduces the commitment."""
    if d < 1:
        raise ValueError("reveal depth d must be >= 1")
    return hash_iter(element, d) == commitment


# ---------------------------------------------------------------------------
# Commitment registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegistryEntry:
    node_id: Digest
    commitment: Digest
    start_height: int
    m: int
    public_key: bytes

    @property
    def last_usable_height(self) -> int:
        return self.start_height + self.m

    def to_record(self) -> dict:
        """Commitment announcement record (the public wire form)."""
        return {
            "node_id": self.node_id.hex(),
            "commitment": self.commitment.hex(),
            "start_height": self.start_height,
            "m": self.m,
            "public_key": self.public_key.hex(),
        }

    @classmethod
    def from_record(cls, record: dict) -> "RegistryEntry":
        return cls(
            node_id=Digest.from_hex(record["node_id"]),
            commitment=Digest.from_hex(record["commitment"]),
            start_height=int(record["start_height"]),
            m=int(record["m"]),
            public_key=bytes.fromhex(record["public_key"]),
        )


class CommitmentRegistry:
    """node_id -> active commitment entry. One entry per node.

    Replacement requires the new start_height to lie strictly past the old
    entry's last usable height, so a commitment window can never be reused.
    Mutable; callers needing cross-thread sharing must synchronize externally.
    """

    def __init__(self) -> None:
        self._entries: dict[Digest, RegistryEntry] = {}

    def register(
        self,
        node_id: Digest,
        commitment: Digest,
        start_height: int,
        m: int,
        public_key: bytes,
    ) -> RegistryEntry:
        existing = self._entries.get(node_id)
        if existing is not None and start_height <= existing.last_usable_height:
            raise StaleRegistration(
                f"start_height {start_height} overlaps active window ending at "
                f"{existing.last_usable_height}"
            )
        entry = RegistryEntry(node_id, commitment, start_height, m, public_key)
        self._entries[node_id] = entry
        return entry

    def register_record(self, record: dict) -> RegistryEntry:
        entry = RegistryEntry.from_record(record)
        return self.register(
            entry.node_id, entry.commitment, entry.start_height, entry.m, entry.public_key
        )

    def lookup(self, node_id: Digest) -> RegistryEntry:
        try:
            return self._entries[node_id]
        except KeyError:
            raise NotRegistered(f"unknown node_id {node_id.hex()}") from None

    def __contains__(self, node_id: Digest) -> bool:
        return node_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def entries(self) -> list[RegistryEntry]:
        return list(self._entries.values())

    def to_records(self) -> list[dict]:
        return [e.to_record() for e in self._entries.values()]

    @classmethod
    def from_records(cls, records: list[dict]) -> "CommitmentRegistry":
        registry = cls()
        for record in records:
            registry.register_record(record)
        return registry

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_records(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CommitmentRegistry":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_records(json.load(fh))
