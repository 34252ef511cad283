"""Round state machine: propose behind the secrecy gate, verify, vote, lock,
finalize, and the confirmation-time models.

Per height: elite nodes draw lottery scores; winners become proposers and may
generate a candidate only if the knob control loop reaches the capacity gate.
Reporters verify qualification and block contents, then vote for the candidate
with minimum distance (its score). A quorum of matching votes locks the
candidate; the anchor appends it and broadcasts. One lock per height is what
makes the chain fork-free.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .crypto_chain import (
    Digest,
    Keypair,
    NonceChain,
    NotRegistered,
    chain_reveal,
    hash_bytes,
)
from .eligibility import (
    CandidateProof,
    Threshold,
    build_proof,
    is_eligible,
    retry_prev_hash,
    score_from_reveal,
    verify_candidacy,
)
from .ledger import (
    Block,
    BlockHeader,
    Chain,
    HeightMismatch,
    block_build,
    block_validate,
    capacity_to_milli,
    chain_append,
    header_hash,
)
from .secrecy import (
    ChannelEnv,
    ControlBounds,
    EveReceiver,
    RadioParams,
    control_until,
    link_report,
)

log = logging.getLogger(__name__)

# Verifier tolerance when comparing a header's claimed capacity against an
# independent channel-oracle recomputation.
CAPACITY_TOLERANCE_BITS = 1e-3


class ConsensusError(Exception):
    pass


class CertificateMismatch(ConsensusError):
    pass


class LockHeld(ConsensusError):
    pass


class MixedHeights(ConsensusError):
    pass


class Role(Enum):
    ELITE = "elite"
    PROPOSER = "proposer"
    REPORTER = "reporter"
    ANCHOR = "anchor"


@dataclass(frozen=True)
class LinkSnapshot:
    """Channel state for one node at one draw instant.

    radio is the node's setting after any knob control at that instant; the
    simulator's oracle knows it, which is what lets reporters re-derive a
    proposer's claimed capacity (unverifiable remotely in a real deployment).
    """

    env: ChannelEnv
    main_distance_m: float
    eve_distance_m: Optional[float]
    eve: EveReceiver = EveReceiver()
    radio: Optional[RadioParams] = None


# Maps a node id to its frozen channel geometry at the current draw.
ChannelOracle = Callable[[Digest], LinkSnapshot]


@dataclass
class NodeState:
    """One elite node's identity and local view."""

    node_id: Digest
    keypair: Keypair
    nonce_chain: NonceChain
    radio: RadioParams
    chain: Chain = field(default_factory=Chain)

    @property
    def head_header(self) -> Optional[BlockHeader]:
        return self.chain.head_header


@dataclass(frozen=True)
class Vote:
    reporter_id: Digest
    height: int
    distance: int
    candidate_hash: Digest

    def to_record(self) -> dict:
        return {
            "reporter_id": self.reporter_id.hex(),
            "height": self.height,
            "distance": format(self.distance, "064x"),
            "candidate_hash": self.candidate_hash.hex(),
        }

    @classmethod
    def from_record(cls, record: dict) -> "Vote":
        return cls(
            reporter_id=Digest.from_hex(record["reporter_id"]),
            height=int(record["height"]),
            distance=int(record["distance"], 16),
            candidate_hash=Digest.from_hex(record["candidate_hash"]),
        )


@dataclass(frozen=True)
class LockCertificate:
    height: int
    candidate_hash: Digest
    supporters: tuple
    quorum_ratio: float

    def to_record(self) -> dict:
        return {
            "height": self.height,
            "candidate_hash": self.candidate_hash.hex(),
            "supporters": [s.hex() for s in self.supporters],
            "quorum_ratio": self.quorum_ratio,
        }

    @classmethod
    def from_record(cls, record: dict) -> "LockCertificate":
        return cls(
            height=int(record["height"]),
            candidate_hash=Digest.from_hex(record["candidate_hash"]),
            supporters=tuple(Digest.from_hex(s) for s in record["supporters"]),
            quorum_ratio=float(record["quorum_ratio"]),
        )


@dataclass(frozen=True)
class TimingModel:
    """Per-height confirmation decomposition, simulated milliseconds."""

    t_b_ms: int
    t_q_ms: int
    t_v_ms: int
    t_s_ms: int

    def __post_init__(self) -> None:
        for name in ("t_b_ms", "t_q_ms", "t_v_ms", "t_s_ms"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class PowModel:
    z: int
    t_ms: int

    def __post_init__(self) -> None:
        if self.z < 0 or self.t_ms < 0:
            raise ValueError("z and t_ms must be >= 0")


def confirmation_time(model: TimingModel) -> int:
    return model.t_b_ms + model.t_q_ms + model.t_v_ms + model.t_s_ms


def pow_confirmation_time(model: PowModel) -> int:
    return model.z * model.t_ms


def quorum_needed(reporters_count: int, quorum_ratio: float) -> int:
    return math.ceil(quorum_ratio * reporters_count)


def round_propose(
    node: NodeState,
    prev_header: BlockHeader,
    pending_txs: list,
    threshold: Threshold,
    c_ref: float,
    channel_oracle: ChannelOracle,
    bounds: ControlBounds,
    now_ms: int,
    retry: int = 0,
    sign_proof: bool = False,
    stats: Optional[dict] = None,
) -> Optional[tuple[Block, int]]:
    """Attempt to generate a candidate block at the next height.

    None when the lottery misses or the capacity gate is infeasible (the
    temporary block is discarded). On success returns the block plus the
    control time (iterations x iter_cost_ms) consumed reaching the gate; the
    node's radio keeps the tuned setting. Raises HeightOutOfRange when the
    nonce chain no longer covers the height. When a stats dict is supplied it
    receives eligible/feasible/control_iters for metering.
    """
    height = prev_header.height + 1
    basis = retry_prev_hash(header_hash(prev_header), retry)
    element, d = chain_reveal(node.nonce_chain, height)
    score = score_from_reveal(basis, element)
    if stats is not None:
        stats["eligible"] = False
        stats["feasible"] = False
        stats["control_iters"] = 0
    if not is_eligible(score, threshold):
        return None
    if stats is not None:
        stats["eligible"] = True
    snapshot = channel_oracle(node.node_id)
    radio, iters, feasible = control_until(
        node.radio,
        bounds,
        snapshot.env,
        snapshot.main_distance_m,
        snapshot.eve_distance_m,
        c_ref,
        snapshot.eve,
    )
    control_ms = iters * bounds.iter_cost_ms
    if stats is not None:
        stats["feasible"] = feasible
        stats["control_iters"] = iters
    if not feasible:
        log.debug(
            "node %s height %d: gate infeasible after %d iterations, "
            "candidate discarded", node.node_id.hex()[:8], height, iters,
        )
        return None
    node.radio = radio
    report = link_report(
        radio, snapshot.env, snapshot.main_distance_m, snapshot.eve_distance_m,
        snapshot.eve,
    )
    proof = build_proof(
        node.node_id, height, element, d, basis,
        key=node.keypair if sign_proof else None,
    )
    block = block_build(
        prev_header, height, pending_txs, proof, report.capacity_bits, now_ms
    )
    return block, control_ms


def verify_qualification(
    candidate: Block,
    prev_header: BlockHeader,
    registry,
    threshold: Threshold,
    retry: int = 0,
    reveal_cache: Optional[dict] = None,
) -> bool:
    """Reporter-side check of the proposer's lottery right (charged t_q)."""
    header = candidate.header
    if header.height != prev_header.height + 1:
        return False
    basis = retry_prev_hash(header_hash(prev_header), retry)
    proof = CandidateProof(
        node_id=header.proposer_id,
        height=header.height,
        reveal_element=header.reveal_element,
        d=header.d,
        score=score_from_reveal(basis, header.reveal_element),
    )
    try:
        return verify_candidacy(
            proof, basis, registry, threshold, reveal_cache=reveal_cache
        )
    except NotRegistered:
        return False


def verify_candidate(
    candidate: Block,
    prev_header: BlockHeader,
    registry,
    threshold: Threshold,
    c_ref: float,
    channel_oracle: ChannelOracle,
    retry: int = 0,
    reveal_cache: Optional[dict] = None,
) -> bool:
    """Reporter-side full block check plus capacity anti-lying (charged t_v).

    The claimed header capacity is recomputed through the channel oracle at
    the proposal-time geometry; a claim more than the tolerance above the
    oracle's best value is rejected.
    """
    result = block_validate(candidate, prev_header, registry, threshold, c_ref,
                            retry=retry, reveal_cache=reveal_cache)
    if not result:
        return False
    snapshot = channel_oracle(candidate.header.proposer_id)
    if snapshot.radio is None:
        return False
    oracle_capacity = link_report(
        snapshot.radio, snapshot.env, snapshot.main_distance_m,
        snapshot.eve_distance_m, snapshot.eve,
    ).capacity_bits
    claimed = candidate.header.secrecy_capacity_milli / 1000.0
    return claimed <= oracle_capacity + CAPACITY_TOLERANCE_BITS


def vote(
    reporter_id: Digest, verified: list
) -> Optional[Vote]:
    """Vote for the minimum-distance candidate among those this reporter
    verified; ties break toward the smaller header hash. None if nothing
    verified.
    """
    if not verified:
        return None
    best_block, best_score = min(
        verified, key=lambda pair: (pair[1], bytes(header_hash(pair[0].header)))
    )
    return Vote(
        reporter_id=reporter_id,
        height=best_block.header.height,
        distance=best_score,
        candidate_hash=header_hash(best_block.header),
    )


def tally_and_lock(
    votes: list,
    reporters_count: int,
    quorum_ratio: float,
) -> Optional[LockCertificate]:
    """Master-side tally (charged t_s). Certificate for the minimum distance
    backed by >= ceil(quorum_ratio x reporters_count) votes; None if no
    candidate reaches quorum.
    """
    if not 0.5 < quorum_ratio <= 1.0:
        raise ValueError("quorum_ratio must be in (0.5, 1]")
    if not votes:
        return None
    heights = {v.height for v in votes}
    if len(heights) != 1:
        raise MixedHeights(f"votes span heights {sorted(heights)}")
    needed = quorum_needed(reporters_count, quorum_ratio)
    groups: dict[Digest, list] = {}
    for v in votes:
        groups.setdefault(v.candidate_hash, []).append(v)
    backed = [
        (group[0].distance, candidate_hash, group)
        for candidate_hash, group in groups.items()
        if len(group) >= needed
    ]
    if not backed:
        return None
    distance, candidate_hash, group = min(
        backed, key=lambda item: (item[0], bytes(item[1]))
    )
    supporters = tuple(sorted({v.reporter_id for v in group}, key=bytes))
    return LockCertificate(
        height=group[0].height,
        candidate_hash=candidate_hash,
        supporters=supporters,
        quorum_ratio=quorum_ratio,
    )


def anchor_finalize(
    locks: dict,
    certificate: LockCertificate,
    candidate: Block,
    chain: Chain,
) -> Block:
    """Anchor-side append of a locked candidate.

    locks maps height -> candidate hash and enforces one finalization per
    height; a second attempt raises LockHeld regardless of certificate.
    """
    if certificate.height in locks:
        raise LockHeld(f"height {certificate.height} already finalized")
    candidate_hash = header_hash(candidate.header)
    if certificate.candidate_hash != candidate_hash:
        raise CertificateMismatch(
            "certificate does not cover the presented candidate"
        )
    if certificate.height != candidate.header.height:
        raise CertificateMismatch("certificate height differs from candidate")
    head = chain.head_header
    expected = (head.height + 1) if head is not None else 0
    if candidate.header.height != expected:
        raise HeightMismatch(
            f"candidate height {candidate.header.height}, chain expects {expected}"
        )
    result = chain_append(chain, candidate)
    if not result:
        raise ConsensusError(f"append rejected: {result.reason}: {result.detail}")
    locks[certificate.height] = candidate_hash
    return candidate
