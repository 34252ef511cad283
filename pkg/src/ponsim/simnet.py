"""Seeded discrete-event simulator: mobility, channel oracle, wire, rounds.

One consensus round per height. All protocol traffic crosses a simulated wire
as JSON envelopes delivered after a fixed latency, in (time, sequence) order,
so two runs of the same scenario replay the exact same event interleaving.
The confirmation-time metric is the four-term model sum (t_b with the winning
proposer's control time, plus t_q, t_v, t_s); wire latency moves the event
clock but is not part of that metric.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from .consensus import (
    ConsensusError,
    LinkSnapshot,
    LockCertificate,
    NodeState,
    Vote,
    anchor_finalize,
    round_propose,
    tally_and_lock,
    verify_candidate,
    verify_qualification,
    vote,
)
from .crypto_chain import (
    CommitmentRegistry,
    Digest,
    chain_commitment,
    chain_generate,
    hash_bytes,
    keypair_from_seed,
)
from .eligibility import MAX_RETRIES
from .ledger import (
    Block,
    Chain,
    TrafficRecord,
    TxKind,
    chain_append,
    block_validate,
    genesis_block,
    header_hash,
    tx_build,
)
from .eligibility import retry_prev_hash, score_from_reveal
from .scenario import Scenario, VehicleSpec
from .secrecy import eve_radio, link_report, snr_db

log = logging.getLogger(__name__)

# Coincident entities are held apart by this much for the channel model.
MIN_DISTANCE_M = 0.1

# Rough meters-per-degree used to map simulation coordinates into BSM fields.
_METERS_PER_DEGREE = 111_320.0

ANCHOR_ID = hash_bytes(b"anchor")


class Stalled(Exception):
    """A height failed to finalize within the bounded retry window."""

    def __init__(self, height: int):
        super().__init__(f"height {height} stalled after {MAX_RETRIES} retries")
        self.height = height


@dataclass
class HeightRecord:
    height: int
    retries: int
    proposer_id: str
    capacity_milli: int
    t_b_ms: int
    t_q_ms: int
    t_v_ms: int
    t_s_ms: int
    confirmation_ms: int
    cluster_size: int
    control_iters: int

    def to_record(self) -> dict:
        return {
            "height": self.height,
            "retries": self.retries,
            "proposer_id": self.proposer_id,
            "capacity_milli": self.capacity_milli,
            "t_b_ms": self.t_b_ms,
            "t_q_ms": self.t_q_ms,
            "t_v_ms": self.t_v_ms,
            "t_s_ms": self.t_s_ms,
            "confirmation_ms": self.confirmation_ms,
            "cluster_size": self.cluster_size,
            "control_iters": self.control_iters,
        }


@dataclass
class Metrics:
    heights: list = field(default_factory=list)
    fork_count: int = 0
    gate_rejections: int = 0
    lottery_misses: int = 0
    total_control_iterations: int = 0
    total_control_time_ms: int = 0


def metrics_report(metrics: Metrics, pow_z: int, pow_t_ms: int) -> dict:
    """Flat summary: confirmation stats, decomposition means, PoW comparison."""
    n = len(metrics.heights)
    if n == 0:
        mean_conf = max_conf = 0.0
        means = {k: 0.0 for k in ("t_b_ms", "t_q_ms", "t_v_ms", "t_s_ms")}
    else:
        mean_conf = sum(h.confirmation_ms for h in metrics.heights) / n
        max_conf = max(h.confirmation_ms for h in metrics.heights)
        means = {
            k: sum(getattr(h, k) for h in metrics.heights) / n
            for k in ("t_b_ms", "t_q_ms", "t_v_ms", "t_s_ms")
        }
    return {
        "heights": n,
        "mean_confirmation_ms": mean_conf,
        "max_confirmation_ms": max_conf,
        "mean_t_b_ms": means["t_b_ms"],
        "mean_t_q_ms": means["t_q_ms"],
        "mean_t_v_ms": means["t_v_ms"],
        "mean_t_s_ms": means["t_s_ms"],
        "fork_count": metrics.fork_count,
        "gate_rejections": metrics.gate_rejections,
        "lottery_misses": metrics.lottery_misses,
        "total_control_iterations": metrics.total_control_iterations,
        "total_control_time_ms": metrics.total_control_time_ms,
        "pow_confirmation_ms": pow_z * pow_t_ms,
    }


def metrics_to_record(metrics: Metrics, pow_z: int, pow_t_ms: int) -> dict:
    return {
        "per_height": [h.to_record() for h in metrics.heights],
        "fork_count": metrics.fork_count,
        "gate_rejections": metrics.gate_rejections,
        "lottery_misses": metrics.lottery_misses,
        "total_control_iterations": metrics.total_control_iterations,
        "total_control_time_ms": metrics.total_control_time_ms,
        "summary": metrics_report(metrics, pow_z, pow_t_ms),
    }


@dataclass
class RunResult:
    chain: Chain
    metrics: Metrics
    node_chains: list
    registry: CommitmentRegistry
    scenario: Scenario


@dataclass
class _Mobile:
    x0: float
    y0: float
    vx: float
    vy: float

    def position(self, clock_ms: int) -> tuple:
        t = clock_ms / 1000.0
        return (self.x0 + self.vx * t, self.y0 + self.vy * t)


def _mobile(position, speed: float, heading_deg: float) -> _Mobile:
    rad = math.radians(heading_deg)
    return _Mobile(position[0], position[1],
                   speed * math.cos(rad), speed * math.sin(rad))


class _Vehicle:
    """One elite node: consensus state plus simulator bookkeeping."""

    def __init__(self, spec: VehicleSpec, scenario_seed: int, heights: int):
        material = scenario_seed.to_bytes(8, "big") + spec.seed.to_bytes(8, "big")
        key_seed = bytes(hash_bytes(b"vehicle-key" + material))
        master_key = bytes(hash_bytes(b"vehicle-master" + material))
        keypair = keypair_from_seed(key_seed)
        nonce_chain = chain_generate(master_key, m=heights, start_height=0)
        chain = Chain()
        chain_append(chain, genesis_block(0))
        self.spec = spec
        self.state = NodeState(keypair.node_id, keypair, nonce_chain,
                               spec.radio, chain)
        self.mobile = _mobile(spec.position, spec.speed, spec.heading)
        self.registry = CommitmentRegistry()
        self.reveal_cache: dict = {}
        self.candidates: dict = {}
        self.verified: dict = {}
        self.votes: dict = {}

    @property
    def node_id(self) -> Digest:
        return self.state.node_id


class _Anchor:
    """The RSU: registers commitments, buffers candidates, finalizes."""

    def __init__(self, position):
        self.chain = Chain()
        chain_append(self.chain, genesis_block(0))
        self.mobile = _mobile(position, 0.0, 0.0)
        self.registry = CommitmentRegistry()
        self.reveal_cache: dict = {}
        self.candidates: dict = {}
        self.verified: dict = {}
        self.votes: dict = {}
        self.locks: dict = {}
        self.certs_seen: dict = {}


class Simulation:
    """World state plus the deterministic event loop for one scenario."""

    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.clock_ms = 0
        self._seq = 0
        self._queue: list = []
        self.rng = random.Random(scenario.seed)
        self.vehicles = [
            _Vehicle(spec, scenario.seed, scenario.heights)
            for spec in scenario.vehicles
        ]
        self.anchor = _Anchor(scenario.anchor_position)
        self.eves = [
            _mobile(e.position, e.speed, e.heading)
            for e in scenario.eavesdroppers
        ]
        self._by_id = {v.node_id: v for v in self.vehicles}
        self._by_id[ANCHOR_ID] = self.anchor
        self.metrics = Metrics()
        self._snapshots: dict = {}
        self._height_control_iters: dict = {}
        self._cluster_size: dict = {}
        self._max_control_ms = max(
            v.spec.bounds.max_iters * v.spec.bounds.iter_cost_ms
            for v in self.vehicles
        )

    # ------------------------------------------------------------------
    # event machinery
    # ------------------------------------------------------------------

    def schedule(self, time_ms: int, fn: Callable[[], None],
                 deadline: bool = False) -> None:
        """Queue fn at time_ms.

        Ties break by (deadline, insertion order): deadline events such as the
        verification pass or the vote tally run after any wire delivery that
        lands on the same millisecond, so a message arriving exactly at its
        deadline still counts.
        """
        self._seq += 1
        heapq.heappush(self._queue, (time_ms, int(deadline), self._seq, fn))

    def _deliver(self, dst: Digest, envelope: dict) -> None:
        entity = self._by_id[dst]
        kind = envelope["kind"]
        if kind == "Announce":
            self._on_announce(entity, envelope)
        elif kind == "Candidate":
            self._on_candidate(entity, envelope)
        elif kind == "Vote":
            self._on_vote(entity, envelope)
        elif kind == "Lock":
            self._on_lock(entity, envelope)
        elif kind == "Final":
            self._on_final(entity, envelope)
        else:
            raise ConsensusError(f"unknown message kind {kind!r}")

    def send(self, dst: Digest, envelope: dict) -> None:
        """Serialize onto the wire; deliver after the scenario link latency."""
        wire = json.dumps(envelope, sort_keys=True)
        if self.sc.drop_rate > 0 and self.rng.random() < self.sc.drop_rate:
            return
        parsed = json.loads(wire)
        self.schedule(self.clock_ms + self.sc.link_latency_ms,
                      lambda: self._deliver(dst, parsed))

    def broadcast(self, envelope: dict) -> None:
        """Send to every node including the anchor and the sender itself."""
        wire = json.dumps(envelope, sort_keys=True)
        targets = [v.node_id for v in self.vehicles] + [ANCHOR_ID]
        if self.sc.drop_rate > 0:
            targets = [
                dst for dst in targets
                if self.rng.random() >= self.sc.drop_rate
            ]
        parsed = json.loads(wire)
        deliver_at = self.clock_ms + self.sc.link_latency_ms
        for dst in targets:
            self.schedule(deliver_at, lambda d=dst: self._deliver(d, parsed))

    # ------------------------------------------------------------------
    # world queries
    # ------------------------------------------------------------------

    def step(self, dt_ms: int) -> None:
        """Advance the simulated clock; positions follow their closed form."""
        if dt_ms <= 0:
            raise ValueError("dt_ms must be > 0")
        self.clock_ms += dt_ms

    def position_of(self, entity) -> tuple:
        return entity.mobile.position(self.clock_ms)

    def distance_between(self, a, b) -> float:
        ax, ay = self.position_of(a)
        bx, by = self.position_of(b)
        return max(MIN_DISTANCE_M, math.hypot(ax - bx, ay - by))

    def main_snr_db(self, vehicle: _Vehicle) -> float:
        return snr_db(vehicle.state.radio, self.sc.env,
                      self.distance_between(vehicle, self.anchor))

    def nearest_eve_distance(self, vehicle: _Vehicle) -> Optional[float]:
        """Distance to the eavesdropper with the strongest receive SNR.

        Monotone path loss makes that simply the nearest one.
        """
        if not self.eves:
            return None
        vx, vy = self.position_of(vehicle)
        best = None
        for eve in self.eves:
            ex, ey = eve.position(self.clock_ms)
            d = max(MIN_DISTANCE_M, math.hypot(vx - ex, vy - ey))
            if best is None or d < best:
                best = d
        return best

    def nearest_eavesdropper_snr(self, vehicle: _Vehicle) -> float:
        """-inf when no eavesdropper exists (capacity degenerates to main)."""
        d = self.nearest_eve_distance(vehicle)
        if d is None:
            return -math.inf
        return snr_db(eve_radio(vehicle.state.radio, self.sc.eve_receiver),
                      self.sc.env, d)

    def _snapshot(self, vehicle: _Vehicle) -> LinkSnapshot:
        return LinkSnapshot(
            env=self.sc.env,
            main_distance_m=self.distance_between(vehicle, self.anchor),
            eve_distance_m=self.nearest_eve_distance(vehicle),
            eve=self.sc.eve_receiver,
            radio=vehicle.state.radio,
        )

    # ------------------------------------------------------------------
    # consensus round flow
    # ------------------------------------------------------------------

    def _master_id(self, height: int) -> Digest:
        prev = self.anchor.chain.blocks[height - 1]
        if prev.header.height >= 1:
            return prev.header.proposer_id
        return ANCHOR_ID

    def _bsm(self, vehicle: _Vehicle, now_ms: int):
        x, y = self.position_of(vehicle)
        record = TrafficRecord(
            vehicle_id=vehicle.node_id.hex()[:16],
            latitude=y / _METERS_PER_DEGREE,
            longitude=x / _METERS_PER_DEGREE,
            speed=vehicle.spec.speed,
            heading=vehicle.spec.heading,
            timestamp_ms=now_ms,
        )
        return tx_build(TxKind.BSM, record)

    def _start_round(self, height: int, retry: int, start_ms: int) -> None:
        self.clock_ms = max(self.clock_ms, start_ms)
        key = (height, retry)
        snapshots: dict = {}
        self._snapshots[key] = snapshots
        if retry == 0:
            self._height_control_iters[height] = 0
            self._cluster_size[height] = sum(
                1 for v in self.vehicles
                if link_report(
                    v.state.radio, self.sc.env,
                    self.distance_between(v, self.anchor),
                    self.nearest_eve_distance(v), self.sc.eve_receiver,
                ).capacity_bits >= self.sc.c_ref
            )
        eligible = 0
        for vehicle in self.vehicles:
            geometry = self._snapshot(vehicle)
            stats: dict = {}
            result = round_propose(
                vehicle.state,
                vehicle.state.head_header,
                [self._bsm(vehicle, start_ms)],
                self.sc.threshold,
                self.sc.c_ref,
                lambda _nid, g=geometry: g,
                vehicle.spec.bounds,
                now_ms=start_ms,
                retry=retry,
                stats=stats,
            )
            if stats.get("eligible"):
                eligible += 1
            iters = stats.get("control_iters", 0)
            self.metrics.total_control_iterations += iters
            self.metrics.total_control_time_ms += (
                iters * vehicle.spec.bounds.iter_cost_ms
            )
            self._height_control_iters[height] += iters
            if stats.get("eligible") and not stats.get("feasible"):
                self.metrics.gate_rejections += 1
            # verifiers recompute capacity against the tuned radio
            snapshots[vehicle.node_id] = LinkSnapshot(
                env=geometry.env,
                main_distance_m=geometry.main_distance_m,
                eve_distance_m=geometry.eve_distance_m,
                eve=geometry.eve,
                radio=vehicle.state.radio,
            )
            if result is not None:
                block, control_ms = result
                ready_at = (
                    start_ms + self.sc.timing.base_generation_ms + control_ms
                )
                envelope = {
                    "kind": "Candidate",
                    "height": height,
                    "retry": retry,
                    "control_ms": control_ms,
                    "block": block.to_record(),
                }
                self.schedule(ready_at,
                              lambda e=envelope: self.broadcast(e))
        if eligible == 0:
            self.metrics.lottery_misses += 1
        candidates_due = (
            start_ms + self.sc.timing.base_generation_ms + self._max_control_ms
            + self.sc.link_latency_ms
        )
        for vehicle in self.vehicles:
            self.schedule(
                candidates_due,
                lambda v=vehicle: self._verify_and_vote(v, height, retry),
                deadline=True,
            )
        self.schedule(
            candidates_due,
            lambda: self._anchor_verify(height, retry),
            deadline=True,
        )
        votes_due = (
            candidates_due + self.sc.timing.t_q_ms + self.sc.timing.t_v_ms
            + self.sc.link_latency_ms
        )
        self.schedule(votes_due,
                      lambda: self._master_tally(height, retry),
                      deadline=True)
        # latest possible finalize instant for this attempt; the anchor
        # watchdog drives the redraw when nothing landed by then
        final_due = votes_due + self.sc.link_latency_ms + self.sc.timing.t_s_ms
        self.schedule(final_due,
                      lambda: self._watchdog(height, retry, final_due),
                      deadline=True)

    def _verify_buffer(self, entity, height: int, retry: int):
        """Run qualification plus block verification over buffered candidates.

        Accepted entries move into entity.verified so a later Final (or the
        anchor's own finalize) can trust them without re-validating.
        """
        key = (height, retry)
        received = entity.candidates.pop(key, {})
        snapshots = self._snapshots.get(key, {})
        oracle = lambda nid: snapshots[nid]
        prev = (entity.state.head_header if isinstance(entity, _Vehicle)
                else entity.chain.head_header)
        verified = []
        for hash_hex in sorted(received):
            entry = received[hash_hex]
            block = entry["block"]
            if not verify_qualification(block, prev, entity.registry,
                                        self.sc.threshold, retry,
                                        entity.reveal_cache):
                continue
            if not verify_candidate(block, prev, entity.registry,
                                    self.sc.threshold, self.sc.c_ref, oracle,
                                    retry, entity.reveal_cache):
                continue
            verified.append((block, entry["score"]))
            entity.verified.setdefault(key, {})[hash_hex] = entry
        return verified

    def _verify_and_vote(self, vehicle: _Vehicle, height: int,
                         retry: int) -> None:
        verified = self._verify_buffer(vehicle, height, retry)
        ballot = vote(vehicle.node_id, verified)
        if ballot is None:
            return
        send_at = (self.clock_ms + self.sc.timing.t_q_ms
                   + self.sc.timing.t_v_ms)
        master = self._master_id(height)
        envelope = {
            "kind": "Vote",
            "height": height,
            "retry": retry,
            "vote": ballot.to_record(),
        }
        self.schedule(send_at, lambda: self.send(master, envelope))

    def _anchor_verify(self, height: int, retry: int) -> None:
        self._verify_buffer(self.anchor, height, retry)

    def _master_tally(self, height: int, retry: int) -> None:
        """Group the buffered votes; forward a Lock when quorum is reached.

        The quorum denominator is the registered electorate, not the votes
        that happened to arrive, so lost votes count against the quorum. The
        tally itself needs no chain state, which lets a master that fell
        behind still serve the role.
        """
        master = self._by_id[self._master_id(height)]
        votes = master.votes.pop((height, retry), [])
        certificate = (
            tally_and_lock(votes, len(master.registry), self.sc.quorum_ratio)
            if votes else None
        )
        if certificate is None:
            log.debug("height %d retry %d: no quorum", height, retry)
            return
        envelope = {
            "kind": "Lock",
            "height": height,
            "retry": retry,
            "certificate": certificate.to_record(),
        }
        self.send(ANCHOR_ID, envelope)

    def _watchdog(self, height: int, retry: int, now_ms: int) -> None:
        head = self.anchor.chain.head_header
        if head is not None and head.height >= height:
            return
        self._snapshots.pop((height, retry), None)
        if retry >= MAX_RETRIES:
            raise Stalled(height)
        log.debug("height %d retry %d expired, redrawing", height, retry)
        self._start_round(height, retry + 1, now_ms)

    def _on_announce(self, entity, envelope: dict) -> None:
        entity.registry.register_record(envelope["record"])

    def _on_candidate(self, entity, envelope: dict) -> None:
        block = Block.from_record(envelope["block"])
        key = (envelope["height"], envelope["retry"])
        hash_hex = header_hash(block.header).hex()
        prev = (entity.state.head_header if isinstance(entity, _Vehicle)
                else entity.chain.head_header)
        basis = retry_prev_hash(header_hash(prev), envelope["retry"])
        entity.candidates.setdefault(key, {})[hash_hex] = {
            "block": block,
            "control_ms": envelope["control_ms"],
            "score": score_from_reveal(basis, block.header.reveal_element),
        }

    def _on_vote(self, entity, envelope: dict) -> None:
        ballot = Vote.from_record(envelope["vote"])
        key = (envelope["height"], envelope["retry"])
        entity.votes.setdefault(key, []).append(ballot)

    def _on_lock(self, entity: "_Anchor", envelope: dict) -> None:
        certificate = LockCertificate.from_record(envelope["certificate"])
        height, retry = envelope["height"], envelope["retry"]
        finalize_at = self.clock_ms + self.sc.timing.t_s_ms
        self.schedule(
            finalize_at,
            lambda: self._finalize(certificate, height, retry),
        )

    def _finalize(self, certificate: LockCertificate, height: int,
                  retry: int) -> None:
        anchor = self.anchor
        anchor.certs_seen.setdefault(height, set()).add(
            certificate.candidate_hash
        )
        key = (height, retry)
        hash_hex = certificate.candidate_hash.hex()
        entry = anchor.verified.get(key, {}).get(hash_hex)
        if entry is None:
            if self.sc.drop_rate > 0:
                # the candidate broadcast never reached the anchor; let the
                # round watchdog drive a redraw
                return
            raise ConsensusError(
                f"anchor never verified candidate {hash_hex[:8]} "
                f"at height {height}"
            )
        block = entry["block"]
        anchor_finalize(anchor.locks, certificate, block, anchor.chain)
        timing = self.sc.timing
        t_b = timing.base_generation_ms + entry["control_ms"]
        record = HeightRecord(
            height=height,
            retries=retry,
            proposer_id=block.header.proposer_id.hex(),
            capacity_milli=block.header.secrecy_capacity_milli,
            t_b_ms=t_b,
            t_q_ms=timing.t_q_ms,
            t_v_ms=timing.t_v_ms,
            t_s_ms=timing.t_s_ms,
            confirmation_ms=t_b + timing.t_q_ms + timing.t_v_ms
            + timing.t_s_ms,
            cluster_size=self._cluster_size.pop(height),
            control_iters=self._height_control_iters.pop(height),
        )
        self.metrics.heights.append(record)
        envelope = {
            "kind": "Final",
            "height": height,
            "retry": retry,
            "block": block.to_record(),
            "certificate": certificate.to_record(),
        }
        self.broadcast(envelope)
        self._snapshots.pop(key, None)
        self._drop_height_buffers(anchor, height)
        log.debug("height %d finalized by %s after %d retries",
                  height, block.header.proposer_id.hex()[:8], retry)
        if height < self.sc.heights:
            next_start = self.clock_ms + self.sc.link_latency_ms
            self.schedule(
                next_start,
                lambda: self._start_round(height + 1, 0, next_start),
                deadline=True,
            )

    def _on_final(self, entity, envelope: dict) -> None:
        if not isinstance(entity, _Vehicle):
            return
        block = Block.from_record(envelope["block"])
        key = (envelope["height"], envelope["retry"])
        hash_hex = header_hash(block.header).hex()
        chain = entity.state.chain
        if chain.head_header is not None and \
                chain.head_header.height >= block.header.height:
            return
        if header_hash(chain.head_header) != block.header.prev_hash:
            # this node missed an earlier Final (lossy wire) and cannot
            # adopt later blocks; it stays on its prefix
            return
        if hash_hex in entity.verified.get(key, {}):
            result = chain_append(chain, block)
        else:
            # this node missed or rejected the candidate earlier, so it
            # re-validates the finalized block before adopting it
            check = block_validate(
                block, chain.head_header, entity.registry, self.sc.threshold,
                self.sc.c_ref, retry=envelope["retry"],
                reveal_cache=entity.reveal_cache,
            )
            result = check if not check else chain_append(chain, block)
        if not result:
            if self.sc.drop_rate > 0:
                # a dropped Announce can leave this node unable to check
                # the proposer's candidacy; it stays on its prefix
                return
            raise ConsensusError(
                f"honest node rejected finalized block at height "
                f"{block.header.height}: {result.reason}"
            )
        self._drop_height_buffers(entity, envelope["height"])

    @staticmethod
    def _drop_height_buffers(entity, height: int) -> None:
        for store in (entity.candidates, entity.verified, entity.votes):
            for key in [k for k in store if k[0] <= height]:
                store.pop(key)

    # ------------------------------------------------------------------

    def run(self) -> RunResult:
        for vehicle in self.vehicles:
            entry = {
                "kind": "Announce",
                "record": {
                    "node_id": vehicle.node_id.hex(),
                    "commitment": chain_commitment(
                        vehicle.state.nonce_chain
                    ).hex(),
                    "start_height": 0,
                    "m": vehicle.state.nonce_chain.m,
                    "public_key": vehicle.state.keypair.public_key.hex(),
                },
            }
            self.broadcast(entry)
        first_round_at = self.sc.link_latency_ms
        self.schedule(first_round_at,
                      lambda: self._start_round(1, 0, first_round_at),
                      deadline=True)
        while self._queue:
            time_ms, _, _, fn = heapq.heappop(self._queue)
            self.clock_ms = max(self.clock_ms, time_ms)
            fn()
        finalized = len(self.anchor.chain) - 1
        if finalized != self.sc.heights:
            raise ConsensusError(
                f"run ended with {finalized} of {self.sc.heights} heights"
            )
        self.metrics.fork_count = sum(
            1 for certs in self.anchor.certs_seen.values() if len(certs) > 1
        )
        return RunResult(
            chain=self.anchor.chain,
            metrics=self.metrics,
            node_chains=[v.state.chain for v in self.vehicles],
            registry=self.anchor.registry,
            scenario=self.sc,
        )


def run(scenario: Scenario) -> RunResult:
    """Execute one scenario to completion; deterministic in the scenario."""
    return Simulation(scenario).run()
