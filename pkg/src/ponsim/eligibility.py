"""The block-generation lottery.

Every height, each registered node derives a 256-bit score from the previous
block hash plus private material it can later prove, and wins the right to
propose when the score falls under a shared threshold. Scores are uniform, so
the threshold doubles as a per-node win probability: threshold / 2^256.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

from .crypto_chain import (
    CommitmentRegistry,
    Digest,
    Keypair,
    hash_bytes,
    hash_iter,
    reveal_verify,
    sign,
    verify,
)

SCORE_BITS = 256
SCORE_SPACE = 1 << SCORE_BITS

# A round with no eligible proposer redraws at most this many times.
MAX_RETRIES = 10


@dataclass(frozen=True)
class Threshold:
    """Reference value for the lottery; implied win probability value / 2^256."""

    value: int

    def __post_init__(self) -> None:
        if not 0 <= self.value < SCORE_SPACE:
            raise ValueError("threshold out of [0, 2^256)")

    @classmethod
    def from_exponent(cls, k: int) -> "Threshold":
        """Threshold 2^k, i.e. win probability 2^(k-256)."""
        if not 0 <= k <= SCORE_BITS - 1:
            raise ValueError("threshold exponent out of [0, 255]")
        return cls(1 << k)

    @property
    def probability(self) -> float:
        return self.value / SCORE_SPACE


@dataclass(frozen=True)
class CandidateProof:
    """Publicly checkable evidence of block-generation right at one height."""

    node_id: Digest
    height: int
    reveal_element: Digest
    d: int
    score: int
    signature: Optional[bytes] = None

    def to_record(self) -> dict:
        return {
            "node_id": self.node_id.hex(),
            "height": self.height,
            "reveal": self.reveal_element.hex(),
            "d": self.d,
            "score": format(self.score, "064x"),
            "signature": self.signature.hex() if self.signature is not None else None,
        }

    @classmethod
    def from_record(cls, record: dict) -> "CandidateProof":
        raw_sig = record.get("signature")
        return cls(
            node_id=Digest.from_hex(record["node_id"]),
            height=int(record["height"]),
            reveal_element=Digest.from_hex(record["reveal"]),
            d=int(record["d"]),
            score=int(record["score"], 16),
            signature=bytes.fromhex(raw_sig) if raw_sig is not None else None,
        )


def score_from_reveal(prev_hash: Digest, element: Digest) -> int:
    """Lottery score from a nonce-chain reveal: int of H(prev_hash || element)."""
    return int.from_bytes(hash_bytes(bytes(prev_hash) + bytes(element)), "big")


def score_from_signature(key: Keypair, prev_hash: Digest) -> tuple[int, bytes]:
    """Lottery score from a deterministic signature over the previous hash.

    Returns (score, signature); publishing the signature lets any verifier
    recompute the score as int of H(signature).
    """
    signature = sign(key, bytes(prev_hash))
    return int.from_bytes(hash_bytes(signature), "big"), signature


def is_eligible(score: int, threshold: Threshold) -> bool:
    """Strict comparison; a score equal to the threshold is ineligible."""
    return score < threshold.value


def expected_proposers(n_nodes: int, threshold: Threshold) -> float:
    """Mean number of lottery winners per height among n_nodes."""
    if n_nodes < 0:
        raise ValueError("n_nodes must be >= 0")
    return n_nodes * threshold.value / SCORE_SPACE


def retry_prev_hash(prev_hash: Digest, retry: int) -> Digest:
    """Redraw basis for retry r: the previous hash salted with the counter.

    retry 0 is the plain previous hash so first draws stay byte-compatible
    with the unsalted definition.
    """
    if not 0 <= retry <= MAX_RETRIES:
        raise ValueError(f"retry counter out of [0, {MAX_RETRIES}]")
    if retry == 0:
        return prev_hash
    return hash_bytes(bytes(prev_hash) + struct.pack(">I", retry))


def signing_message(prev_hash: Digest, height: int) -> bytes:
    """Byte string the optional proof signature covers."""
    return bytes(prev_hash) + struct.pack(">Q", height)


def build_proof(
    node_id: Digest,
    height: int,
    reveal_element: Digest,
    d: int,
    prev_hash: Digest,
    key: Optional[Keypair] = None,
) -> CandidateProof:
    """Assemble a proof for a reveal, signing it when a key is supplied."""
    signature = sign(key, signing_message(prev_hash, height)) if key else None
    return CandidateProof(
        node_id=node_id,
        height=height,
        reveal_element=reveal_element,
        d=d,
        score=score_from_reveal(prev_hash, reveal_element),
        signature=signature,
    )


def _reveal_ok(proof: CandidateProof, entry, reveal_cache: Optional[dict]) -> bool:
    """Reveal check, optionally shortcut through a cache of prior reveals.

    A cached element at depth c proves any later element at depth d > c with
    only d - c hash applications, because revealed elements chain into each
    other on the way to the commitment. Equivalent to the full check.
    """
    if reveal_cache is not None:
        cached = reveal_cache.get(proof.node_id)
        if cached is not None:
            commitment, cached_d, cached_element = cached
            if commitment == entry.commitment:
                if proof.d == cached_d:
                    return proof.reveal_element == cached_element
                if proof.d > cached_d:
                    ok = (
                        hash_iter(proof.reveal_element, proof.d - cached_d)
                        == cached_element
                    )
                    if ok:
                        reveal_cache[proof.node_id] = (
                            entry.commitment, proof.d, proof.reveal_element,
                        )
                    return ok
    ok = reveal_verify(proof.reveal_element, proof.d, entry.commitment)
    if ok and reveal_cache is not None:
        reveal_cache[proof.node_id] = (
            entry.commitment, proof.d, proof.reveal_element,
        )
    return ok


def verify_candidacy(
    proof: CandidateProof,
    prev_hash: Digest,
    registry: CommitmentRegistry,
    threshold: Threshold,
    reveal_cache: Optional[dict] = None,
) -> bool:
    """Check a claimed block-generation right against public data.

    Validates the reveal against the registered commitment, the depth against
    the registered window, the score recomputation, eligibility, and the
    signature when one is attached. Raises NotRegistered for unknown nodes;
    any other failure returns False. reveal_cache (node_id -> (commitment, d,
    element)) speeds up repeat verification of the same proposer's chain.
    """
    entry = registry.lookup(proof.node_id)
    if proof.d != proof.height - entry.start_height:
        return False
    if proof.d < 1 or proof.d > entry.m:
        return False
    if not _reveal_ok(proof, entry, reveal_cache):
        return False
    if proof.score != score_from_reveal(prev_hash, proof.reveal_element):
        return False
    if not is_eligible(proof.score, threshold):
        return False
    if proof.signature is not None:
        if not verify(
            entry.public_key, signing_message(prev_hash, proof.height), proof.signature
        ):
            return False
    return True
