"""Blocks, transactions, and the append-only chain.

Headers hash over a fixed big-endian byte layout, never over JSON, so a chain
file can be re-serialized without disturbing any hash. The persisted form is
JSON Lines, one block per line. Secrecy capacity rides in the header as a
milli-resolution integer; floats stay out of the canonical bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .crypto_chain import (
    DIGEST_SIZE,
    ZERO_DIGEST,
    CommitmentRegistry,
    Digest,
    NotRegistered,
    hash_bytes,
)
from .eligibility import (
    MAX_RETRIES,
    CandidateProof,
    Threshold,
    retry_prev_hash,
    score_from_reveal,
    verify_candidacy,
)

HEADER_VERSION = 1

# version(4) prev(32) timestamp(8) reveal(32) d(4) height(8) root(32) proposer(32) cap(4)
_HEADER_LAYOUT = ">I32sQ32sIQ32s32sI"
HEADER_SIZE = struct.calcsize(_HEADER_LAYOUT)


class LedgerError(Exception):
    pass


class HeightMismatch(LedgerError):
    pass


class ParseError(LedgerError):
    """Chain file line that is not a well-formed block record."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class TxKind(Enum):
    BSM = "BSM"
    LINK_UPDATE = "LinkUpdate"


class RejectReason(Enum):
    LINK = "link"
    HEIGHT = "height"
    TX_ROOT = "tx_root"
    CANDIDACY = "candidacy"
    SECRECY_GATE = "secrecy_gate"
    TIMESTAMP = "timestamp"
    GENESIS = "genesis"


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    reason: Optional[RejectReason] = None
    height: Optional[int] = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok

    @classmethod
    def accept(cls) -> "ValidationResult":
        return cls(ok=True)

    @classmethod
    def reject(
        cls, reason: RejectReason, height: int, detail: str = ""
    ) -> "ValidationResult":
        return cls(ok=False, reason=reason, height=height, detail=detail)


@dataclass(frozen=True)
class TrafficRecord:
    """One vehicle's reported state: where, how fast, which way, when."""

    vehicle_id: str
    latitude: float
    longitude: float
    speed: float
    heading: float
    timestamp_ms: int
    link_id: Optional[str] = None

    def __post_init__(self) -> None:
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError("latitude out of [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError("longitude out of [-180, 180]")
        if self.speed < 0:
            raise ValueError("speed must be >= 0")
        if not 0.0 <= self.heading < 360.0:
            raise ValueError("heading out of [0, 360)")

    def to_record(self) -> dict:
        return {
            "vehicle_id": self.vehicle_id,
            "latitude": self.latitude,
            "longitude": self.longitude,
            "speed": self.speed,
            "heading": self.heading,
            "timestamp_ms": self.timestamp_ms,
            "link_id": self.link_id,
        }

    @classmethod
    def from_record(cls, record: dict) -> "TrafficRecord":
        return cls(
            vehicle_id=record["vehicle_id"],
            latitude=float(record["latitude"]),
            longitude=float(record["longitude"]),
            speed=float(record["speed"]),
            heading=float(record["heading"]),
            timestamp_ms=int(record["timestamp_ms"]),
            link_id=record.get("link_id"),
        )


def _canonical_tx_bytes(kind: TxKind, record: TrafficRecord) -> bytes:
    payload = {"kind": kind.value, "record": record.to_record()}
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()


@dataclass(frozen=True)
class Transaction:
    kind: TxKind
    record: TrafficRecord
    tx_id: Digest

    def to_record(self) -> dict:
        return {
            "kind": self.kind.value,
            "record": self.record.to_record(),
            "tx_id": self.tx_id.hex(),
        }

    @classmethod
    def from_record(cls, record: dict) -> "Transaction":
        # tx_id is taken verbatim; block_validate recomputes and compares.
        return cls(
            kind=TxKind(record["kind"]),
            record=TrafficRecord.from_record(record["record"]),
            tx_id=Digest.from_hex(record["tx_id"]),
        )


def tx_build(kind: TxKind, record: TrafficRecord) -> Transaction:
    return Transaction(kind, record, hash_bytes(_canonical_tx_bytes(kind, record)))


def tx_id_recompute(tx: Transaction) -> Digest:
    return hash_bytes(_canonical_tx_bytes(tx.kind, tx.record))


# ---------------------------------------------------------------------------
# Merkle summary
# ---------------------------------------------------------------------------

def tx_root(transactions: list) -> Digest:
    """Binary Merkle root over tx_ids; odd node duplicated; empty list -> zero."""
    if not transactions:
        return ZERO_DIGEST
    level = [bytes(tx.tx_id) for tx in transactions]
    while True:
        if len(level) % 2:
            level.append(level[-1])
        level = [
            bytes(hash_bytes(level[i] + level[i + 1]))
            for i in range(0, len(level), 2)
        ]
        if len(level) == 1:
            return Digest(level[0])


def merkle_path(transactions: list, index: int) -> list:
    """Sibling path for transactions[index] as [(digest, sibling_is_right), ...]."""
    if not 0 <= index < len(transactions):
        raise IndexError("transaction index out of range")
    level = [bytes(tx.tx_id) for tx in transactions]
    path = []
    pos = index
    while True:
        if len(level) % 2:
            level.append(level[-1])
        sibling = pos + 1 if pos % 2 == 0 else pos - 1
        path.append((Digest(level[sibling]), sibling > pos))
        level = [
            bytes(hash_bytes(level[i] + level[i + 1]))
            for i in range(0, len(level), 2)
        ]
        pos //= 2
        if len(level) == 1:
            return path


def merkle_verify(tx_id: Digest, path: list, root: Digest) -> bool:
    value = bytes(tx_id)
    for sibling, sibling_is_right in path:
        if sibling_is_right:
            value = bytes(hash_bytes(value + bytes(sibling)))
        else:
            value = bytes(hash_bytes(bytes(sibling) + value))
    return Digest(value) == root


# ---------------------------------------------------------------------------
# Headers and blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockHeader:
    version: int
    prev_hash: Digest
    timestamp_ms: int
    reveal_element: Digest
    d: int
    height: int
    tx_root: Digest
    proposer_id: Digest
    secrecy_capacity_milli: int

    def to_record(self) -> dict:
        return {
            "version": self.version,
            "prev_hash": self.prev_hash.hex(),
            "timestamp_ms": self.timestamp_ms,
            "reveal_element": self.reveal_element.hex(),
            "d": self.d,
            "height": self.height,
            "tx_root": self.tx_root.hex(),
            "proposer_id": self.proposer_id.hex(),
            "secrecy_capacity_milli": self.secrecy_capacity_milli,
        }

    @classmethod
    def from_record(cls, record: dict) -> "BlockHeader":
        return cls(
            version=int(record["version"]),
            prev_hash=Digest.from_hex(record["prev_hash"]),
            timestamp_ms=int(record["timestamp_ms"]),
            reveal_element=Digest.from_hex(record["reveal_element"]),
            d=int(record["d"]),
            height=int(record["height"]),
            tx_root=Digest.from_hex(record["tx_root"]),
            proposer_id=Digest.from_hex(record["proposer_id"]),
            secrecy_capacity_milli=int(record["secrecy_capacity_milli"]),
        )


def header_bytes(header: BlockHeader) -> bytes:
    """Canonical fixed-width big-endian serialization (the hashed form)."""
    return struct.pack(
        _HEADER_LAYOUT,
        header.version,
        bytes(header.prev_hash),
        header.timestamp_ms,
        bytes(header.reveal_element),
        header.d,
        header.height,
        bytes(header.tx_root),
        bytes(header.proposer_id),
        header.secrecy_capacity_milli,
    )


def header_hash(header: BlockHeader) -> Digest:
    return hash_bytes(header_bytes(header))


def capacity_to_milli(secrecy_capacity: float) -> int:
    """floor(C_s * 1000); the integer form carried in headers."""
    if secrecy_capacity < 0:
        raise ValueError("secrecy capacity must be >= 0")
    return int(secrecy_capacity * 1000)


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    transactions: tuple

    def to_record(self) -> dict:
        return {
            "header": self.header.to_record(),
            "transactions": [tx.to_record() for tx in self.transactions],
        }

    @classmethod
    def from_record(cls, record: dict) -> "Block":
        return cls(
            header=BlockHeader.from_record(record["header"]),
            transactions=tuple(
                Transaction.from_record(t) for t in record["transactions"]
            ),
        )


def genesis_block(timestamp_ms: int = 0) -> Block:
    header = BlockHeader(
        version=HEADER_VERSION,
        prev_hash=ZERO_DIGEST,
        timestamp_ms=timestamp_ms,
        reveal_element=ZERO_DIGEST,
        d=0,
        height=0,
        tx_root=ZERO_DIGEST,
        proposer_id=ZERO_DIGEST,
        secrecy_capacity_milli=0,
    )
    return Block(header=header, transactions=())


def block_build(
    prev_header: Optional[BlockHeader],
    height: int,
    transactions: list,
    proof: Optional[CandidateProof],
    secrecy_capacity: float,
    timestamp_ms: int,
) -> Block:
    """Assemble a block; prev_header None with height 0 builds genesis."""
    if prev_header is None:
        if height != 0:
            raise HeightMismatch("genesis must have height 0")
        return genesis_block(timestamp_ms)
    if height != prev_header.height + 1:
        raise HeightMismatch(
            f"height {height} does not extend previous height {prev_header.height}"
        )
    if proof is None or proof.height != height:
        raise HeightMismatch("candidacy proof height does not match block height")
    header = BlockHeader(
        version=HEADER_VERSION,
        prev_hash=header_hash(prev_header),
        timestamp_ms=timestamp_ms,
        reveal_element=proof.reveal_element,
        d=proof.d,
        height=height,
        tx_root=tx_root(transactions),
        proposer_id=proof.node_id,
        secrecy_capacity_milli=capacity_to_milli(secrecy_capacity),
    )
    return Block(header=header, transactions=tuple(transactions))


def _candidacy_from_header(
    header: BlockHeader,
    prev_hash: Digest,
    registry: CommitmentRegistry,
    threshold: Threshold,
    retry: Optional[int] = None,
    reveal_cache: Optional[dict] = None,
) -> bool:
    """Re-derive the proposer's lottery right from header fields alone.

    The header stores no retry counter. Online verifiers know the current
    counter and pass it; offline validation scans the bounded retry window,
    accepting any counter that yields an eligible, verifying score.
    """
    retries = range(MAX_RETRIES + 1) if retry is None else (retry,)
    for r in retries:
        basis = retry_prev_hash(prev_hash, r)
        proof = CandidateProof(
            node_id=header.proposer_id,
            height=header.height,
            reveal_element=header.reveal_element,
            d=header.d,
            score=score_from_reveal(basis, header.reveal_element),
        )
        try:
            if verify_candidacy(proof, basis, registry, threshold,
                                reveal_cache=reveal_cache):
                return True
        except NotRegistered:
            return False
    return False


def block_validate(
    block: Block,
    prev_header: Optional[BlockHeader],
    registry: CommitmentRegistry,
    threshold: Threshold,
    c_ref: float,
    retry: Optional[int] = None,
    reveal_cache: Optional[dict] = None,
) -> ValidationResult:
    """Full admission check against the predecessor header and public state.

    retry pins the lottery redraw counter when the verifier knows it (online
    path); None scans the bounded window (offline validation of a persisted
    chain). reveal_cache speeds up repeated checks of one proposer's chain.
    """
    header = block.header
    if prev_header is None:
        genesis = genesis_block(header.timestamp_ms)
        if block.transactions or header != genesis.header:
            # report the chain position, not whatever the header claims
            return ValidationResult.reject(
                RejectReason.GENESIS, 0, "malformed genesis block"
            )
        return ValidationResult.accept()
    if header.prev_hash != header_hash(prev_header):
        return ValidationResult.reject(
            RejectReason.LINK, header.height, "prev_hash does not match predecessor"
        )
    if header.height != prev_header.height + 1:
        return ValidationResult.reject(
            RejectReason.HEIGHT, prev_header.height + 1,
            f"height {header.height} does not increment from "
            f"{prev_header.height}",
        )
    for tx in block.transactions:
        if tx_id_recompute(tx) != tx.tx_id:
            return ValidationResult.reject(
                RejectReason.TX_ROOT, header.height, "transaction id mismatch"
            )
    if tx_root(list(block.transactions)) != header.tx_root:
        return ValidationResult.reject(
            RejectReason.TX_ROOT, header.height, "merkle root mismatch"
        )
    if not _candidacy_from_header(header, header.prev_hash, registry, threshold,
                                  retry=retry, reveal_cache=reveal_cache):
        return ValidationResult.reject(
            RejectReason.CANDIDACY, header.height, "candidacy proof fails"
        )
    if header.secrecy_capacity_milli < capacity_to_milli(c_ref):
        return ValidationResult.reject(
            RejectReason.SECRECY_GATE, header.height,
            f"capacity {header.secrecy_capacity_milli} below gate "
            f"{capacity_to_milli(c_ref)}",
        )
    if header.timestamp_ms < prev_header.timestamp_ms:
        return ValidationResult.reject(
            RejectReason.TIMESTAMP, header.height, "timestamp regressed"
        )
    return ValidationResult.accept()


# ---------------------------------------------------------------------------
# Chain
# ---------------------------------------------------------------------------

@dataclass
class Chain:
    blocks: list = field(default_factory=list)

    @property
    def head(self) -> Digest:
        if not self.blocks:
            return ZERO_DIGEST
        return header_hash(self.blocks[-1].header)

    @property
    def head_header(self) -> Optional[BlockHeader]:
        return self.blocks[-1].header if self.blocks else None

    def __len__(self) -> int:
        return len(self.blocks)


def chain_append(chain: Chain, block: Block) -> ValidationResult:
    """Structural append: linkage, height, tx binding, timestamp order.

    Callers wanting the full admission check (candidacy, secrecy gate) run
    block_validate against the head first.
    """
    header = block.header
    prev = chain.head_header
    if prev is None:
        if header.height != 0 or header.prev_hash != ZERO_DIGEST:
            return ValidationResult.reject(
                RejectReason.GENESIS, header.height, "chain must start at genesis"
            )
    else:
        if header.prev_hash != chain.head:
            return ValidationResult.reject(
                RejectReason.LINK, header.height, "prev_hash does not match head"
            )
        if header.height != prev.height + 1:
            return ValidationResult.reject(
                RejectReason.HEIGHT, header.height, "height does not increment"
            )
        if header.timestamp_ms < prev.timestamp_ms:
            return ValidationResult.reject(
                RejectReason.TIMESTAMP, header.height, "timestamp regressed"
            )
    if tx_root(list(block.transactions)) != header.tx_root:
        return ValidationResult.reject(
            RejectReason.TX_ROOT, header.height, "merkle root mismatch"
        )
    chain.blocks.append(block)
    return ValidationResult.accept()


def chain_validate(
    chain: Chain,
    registry: CommitmentRegistry,
    threshold: Threshold,
    c_ref: float,
) -> ValidationResult:
    """Ok iff every block passes block_validate against its predecessor."""
    prev: Optional[BlockHeader] = None
    for block in chain.blocks:
        result = block_validate(block, prev, registry, threshold, c_ref)
        if not result:
            return result
        prev = block.header
    return ValidationResult.accept()


def chain_save(chain: Chain, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for block in chain.blocks:
            fh.write(json.dumps(block.to_record(), sort_keys=True))
            fh.write("\n")


def chain_from_lines(lines) -> Chain:
    """Parse JSONL lines into a chain; blank lines are skipped.

    Structure is not judged here; run chain_validate for admission checks.
    """
    chain = Chain()
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            block = Block.from_record(record)
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(line_number, str(exc)) from exc
        chain.blocks.append(block)
    return chain


def chain_load(path) -> Chain:
    with open(path, "r", encoding="utf-8") as fh:
        return chain_from_lines(fh)
