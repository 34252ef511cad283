"""End-to-end acceptance checks for the consensus stack.

One test per protocol guarantee, each at full scale: fork freedom across a
seed sweep, nonce-chain soundness against direct hashing, lottery
statistics, secrecy gating under hostile geometry, the wiretap closed
form, confirmation-time additivity, tamper detection, and bit-level
determinism of run artifacts. Expected values come either from closed-form
targets stated up front or from independent re-implementations (hashlib
loops, raw link-budget math, mpmath) rather than from the code under test.
"""

import hashlib
import json
import math
import random
import struct
import time
from pathlib import Path

import mpmath
import pytest
from scipy import stats

from ponsim import simnet
from ponsim.cli import EXIT_INVALID, EXIT_OK, main as cli_main
from ponsim.consensus import (
    PowModel,
    TimingModel,
    confirmation_time,
    pow_confirmation_time,
)
from ponsim.crypto_chain import (
    HeightOutOfRange,
    chain_generate,
    chain_reveal,
    hash_bytes,
    reveal_verify,
)
from ponsim.eligibility import Threshold, score_from_reveal
from ponsim.ledger import header_hash
from ponsim.scenario import Scenario
from ponsim.secrecy import secrecy_capacity
from ponsim.simnet import Simulation

REPO_ROOT = Path(__file__).resolve().parents[1]

# Lottery sweep: 16 nodes at threshold 2^253 give a per-height eligible
# count with mean 16/8 = 2 and variance 16*(1/8)*(7/8) = 1.75. Over 10^4
# heights the sample mean then has standard error sqrt(1.75)/100, and we
# allow three of those.
LOTTERY_NODES = 16
LOTTERY_HEIGHTS = 10_000
LOTTERY_EXP = 253
MEAN_TARGET = 2.0
MEAN_TOLERANCE = 3 * math.sqrt(1.75) / 100
CHI_SQUARE_FLOOR = 0.001

CAPACITY_TOLERANCE = 1e-3

# Static cluster for the gate scenarios: four well-placed vehicles and one
# exposed one 50 m from the anchor. The eavesdropper sits either 5 m or
# 500 m from the exposed vehicle.
GATE_POSITIONS = [[-20, 0], [0, -25], [15, 20], [-10, 25], [50, 0]]
GATE_VICTIM = 4

TAMPER_SCENARIO = {
    "seed": 11,
    "heights": 50,
    "vehicles": [
        {"position": [20, 0]},
        {"position": [0, 25]},
        {"position": [-30, 5]},
        {"position": [10, -20]},
        {"position": [-15, -15]},
    ],
    "threshold_exp": 254,
}

_HEX_DIGITS = "0123456789abcdef"
_HEADER_HEX_FIELDS = ("prev_hash", "reveal_element", "tx_root", "proposer_id")
_HEADER_INT_FIELDS = (
    "version",
    "timestamp_ms",
    "d",
    "height",
    "secrecy_capacity_milli",
)


def _fleet_scenario(seed: int) -> Scenario:
    return Scenario.from_record({
        "seed": seed,
        "heights": 50,
        "vehicles": [{"position": [15 + 2 * i, -25 + (7 * i) % 51]}
                     for i in range(20)],
        "threshold_exp": 253,
    })


def _gate_scenario(eve_position) -> Scenario:
    return Scenario.from_record({
        "seed": 0,
        "heights": 12,
        "vehicles": [{"position": list(p)} for p in GATE_POSITIONS],
        "eavesdroppers": [{"position": list(eve_position)}],
        "threshold_exp": 255,
    })


def _oracle_capacity(tx, txg, rxg, nf, d_main, d_eve):
    """Link budget and wiretap difference written out from scratch.

    Default environment: exponent 2.7, 47 dB at 1 m, floor -95 dBm; the
    eavesdropper receives with no extra gain and a 6 dB noise figure.
    """
    pl_main = 47.0 + 27.0 * math.log10(d_main)
    pl_eve = 47.0 + 27.0 * math.log10(d_eve)
    snr_main = tx + txg + rxg - pl_main - (-95.0 + nf)
    snr_eve = tx + txg - pl_eve - (-95.0 + 6.0)
    cap = (math.log2(1.0 + 10.0 ** (snr_main / 10.0))
           - math.log2(1.0 + 10.0 ** (snr_eve / 10.0)))
    return max(0.0, cap)


def _reference_capacity(snr_main_db, snr_eve_db):
    """High precision wiretap value via mpmath, clamped at zero."""
    with mpmath.workdps(50):
        lin_m = mpmath.mpf(10) ** (mpmath.mpf(snr_main_db) / 10)
        lin_e = mpmath.mpf(10) ** (mpmath.mpf(snr_eve_db) / 10)
        cap = (mpmath.log(1 + lin_m, 2) - mpmath.log(1 + lin_e, 2))
        return float(max(mpmath.mpf(0), cap))


def test_fork_free_finalization_across_one_hundred_seeds():
    """20 vehicles, 50 heights, 100 seeds: one chain, no forks, under 60 s."""
    started = time.monotonic()
    for seed in range(100):
        result = simnet.run(_fleet_scenario(seed))
        assert result.metrics.fork_count == 0, f"fork at seed {seed}"
        assert len(result.chain.blocks) == 51
        anchor_hashes = [header_hash(b.header) for b in result.chain.blocks]
        for chain in result.node_chains:
            node_hashes = [header_hash(b.header) for b in chain.blocks]
            assert node_hashes == anchor_hashes, f"divergence at seed {seed}"
    elapsed = time.monotonic() - started
    assert elapsed < 60.0, f"sweep took {elapsed:.1f}s"


def test_nonce_chain_reveals_match_direct_hash_iteration():
    """Every reveal of an m=64 chain checks out against plain hashlib."""
    master = hash_bytes(b"acceptance-nonce-master")
    m = 64
    chain = chain_generate(master, m, 0)

    base = hashlib.sha256(bytes(master) + b"base").digest()
    for height in range(1, m + 1):
        expected = base
        for _ in range(m - height):
            expected = hashlib.sha256(expected).digest()
        element, d = chain_reveal(chain, height)
        assert d == height
        assert bytes(element) == expected
        walked = bytes(element)
        for _ in range(d):
            walked = hashlib.sha256(walked).digest()
        assert walked == bytes(chain.commitment)
        assert reveal_verify(element, d, chain.commitment)

    # A chain registered at height 10 reveals depth 2 at height 12: exactly
    # two hash applications separate that element from the commitment.
    late = chain_generate(hash_bytes(b"acceptance-nonce-late"), m, 10)
    element, d = chain_reveal(late, 12)
    assert d == 2
    twice = hashlib.sha256(
        hashlib.sha256(bytes(element)).digest()).digest()
    assert twice == bytes(late.commitment)
    with pytest.raises(HeightOutOfRange):
        chain_reveal(late, 10)
    with pytest.raises(HeightOutOfRange):
        chain_reveal(late, 10 + m + 1)


def test_lottery_hits_expected_rate_and_uniform_score_spread():
    """10^4 heights of 16-node draws: mean eligible near 2, scores uniform."""
    threshold = Threshold.from_exponent(LOTTERY_EXP)
    chains = [
        chain_generate(
            hash_bytes(b"lottery-node" + struct.pack(">Q", i)),
            LOTTERY_HEIGHTS, 0)
        for i in range(LOTTERY_NODES)
    ]
    eligible_total = 0
    top_bits = [0] * 16
    for height in range(1, LOTTERY_HEIGHTS + 1):
        prev = hash_bytes(b"lottery-prev" + struct.pack(">Q", height))
        for chain in chains:
            element, _ = chain_reveal(chain, height)
            score = score_from_reveal(prev, element)
            if score < threshold.value:
                eligible_total += 1
            top_bits[score >> 252] += 1

    mean = eligible_total / LOTTERY_HEIGHTS
    assert abs(mean - MEAN_TARGET) <= MEAN_TOLERANCE, f"mean {mean:.4f}"
    outcome = stats.chisquare(top_bits)
    assert outcome.pvalue >= CHI_SQUARE_FLOOR, f"p {outcome.pvalue:.5f}"


def test_gate_rejects_exposed_proposer_and_admits_it_once_eve_is_far():
    """Receiver 50 m out, eavesdropper 5 m away: no knob setting helps."""
    # Independent sweep of the whole capped knob lattice at that geometry.
    lattice_best = 0.0
    for tx in range(5, 31):
        for txg in range(0, 7):
            for rxg in range(0, 7):
                for nf in range(3, 13):
                    lattice_best = max(
                        lattice_best,
                        _oracle_capacity(tx, txg, rxg, nf, 50.0, 5.0))
    assert lattice_best < 1.0, f"lattice max {lattice_best:.4f}"

    victim = Simulation(
        _gate_scenario([55, 0])).vehicles[GATE_VICTIM].node_id.hex()

    near = simnet.run(_gate_scenario([55, 0]))
    near_proposers = [b.header.proposer_id.hex()
                      for b in near.chain.blocks[1:]]
    assert len(near_proposers) == 12
    assert victim not in near_proposers
    assert near.metrics.gate_rejections >= 1

    # Same fleet with the eavesdropper moved 500 m from the exposed node.
    far = simnet.run(_gate_scenario([550, 0]))
    far_proposers = [b.header.proposer_id.hex() for b in far.chain.blocks[1:]]
    assert len(far_proposers) == 12
    assert victim in far_proposers
    assert far.metrics.gate_rejections == 0
    assert far.metrics.total_control_iterations == 0

    # Every admitted capacity claim matches the static geometry, floored to
    # the millibit field.
    id_to_position = {
        sim_vehicle.node_id.hex(): GATE_POSITIONS[i]
        for i, sim_vehicle in enumerate(
            Simulation(_gate_scenario([550, 0])).vehicles)
    }
    for block in far.chain.blocks[1:]:
        x, y = id_to_position[block.header.proposer_id.hex()]
        capacity = _oracle_capacity(
            23, 3, 3, 9,
            math.hypot(x, y), math.hypot(x - 550, y))
        claimed = block.header.secrecy_capacity_milli / 1000.0
        assert capacity >= 1.0 - CAPACITY_TOLERANCE
        assert 0.0 <= capacity - claimed < 1e-3 + 1e-9


def test_wiretap_capacity_matches_reference_and_is_monotone():
    """Closed form against mpmath at 50 digits, then monotonicity."""
    assert abs(secrecy_capacity(15.0, 5.0)
               - _reference_capacity(15, 5)) <= CAPACITY_TOLERANCE
    for pair in ((30.0, 0.0), (0.0, 30.0), (12.5, 12.5), (-3.0, -11.0)):
        assert abs(secrecy_capacity(*pair)
                   - _reference_capacity(*pair)) <= CAPACITY_TOLERANCE

    rng = random.Random(4242)
    violations = 0
    for _ in range(10_000):
        snr_main = rng.uniform(-10.0, 40.0)
        snr_eve = rng.uniform(-10.0, 40.0)
        delta = rng.uniform(1e-6, 10.0)
        base = secrecy_capacity(snr_main, snr_eve)
        if secrecy_capacity(snr_main + delta, snr_eve) < base:
            violations += 1
        if secrecy_capacity(snr_main, snr_eve + delta) > base:
            violations += 1
    assert violations == 0


def test_confirmation_is_exact_sum_of_phases_and_beats_wait_chains(capsys):
    """t_b + t_q + t_v + t_s exactly, with a nonzero control term."""
    tuned = simnet.run(Scenario.from_record({
        "seed": 0,
        "heights": 6,
        "vehicles": [{"position": [50, 0]}],
        "eavesdroppers": [{"position": [50, -60]}],
        "threshold_exp": 255,
    }))
    for record in tuned.metrics.heights:
        assert record.confirmation_ms == (record.t_b_ms + record.t_q_ms
                                          + record.t_v_ms + record.t_s_ms)
        assert record.t_b_ms == 100 + record.control_iters * 1
    assert tuned.metrics.heights[0].control_iters >= 1

    code = cli_main(["compare", "--tb", "100", "--tq", "2", "--tv", "3",
                     "--ts", "5", "--z", "6", "--t", "600000", "--json"])
    assert code == EXIT_OK
    rows = {row["algorithm"]: row["value_ms"]
            for row in json.loads(capsys.readouterr().out)["rows"]}
    assert rows["PoN"] == 110
    assert rows["PoW"] == 3_600_000

    pon = confirmation_time(TimingModel(100, 2, 3, 5))
    for z in (2, 3, 6, 10):
        for t_ms in (110, 240, 600_000):
            assert pon < pow_confirmation_time(PowModel(z, t_ms))


# ---------------------------------------------------------------------------
# tamper detection
# ---------------------------------------------------------------------------

def _mutation_sites(record):
    """Enumerate single-character integrity-bearing positions of a block.

    Hex digits of the header's digest fields, decimal digits of its integer
    fields and hex digits of every transaction id. Float payload fields stay
    out: their shortest-repr round trip cannot guarantee a one-byte edit.
    """
    sites = []
    header = record["header"]
    for field in _HEADER_HEX_FIELDS:
        for pos in range(len(header[field])):
            sites.append(("hex", field, pos))
    for field in _HEADER_INT_FIELDS:
        for pos in range(len(str(header[field]))):
            sites.append(("int", field, pos))
    for index, tx in enumerate(record["transactions"]):
        for pos in range(len(tx["tx_id"])):
            sites.append(("tx", index, pos))
    return sites


def _apply_mutation(record, site, rng):
    kind, field, pos = site
    if kind == "hex":
        value = record["header"][field]
        new = rng.choice([c for c in _HEX_DIGITS if c != value[pos]])
        record["header"][field] = value[:pos] + new + value[pos + 1:]
    elif kind == "int":
        digits = str(record["header"][field])
        pool = "123456789" if pos == 0 and len(digits) > 1 else "0123456789"
        new = rng.choice([c for c in pool if c != digits[pos]])
        record["header"][field] = int(digits[:pos] + new + digits[pos + 1:])
    else:
        value = record["transactions"][field]["tx_id"]
        new = rng.choice([c for c in _HEX_DIGITS if c != value[pos]])
        record["transactions"][field]["tx_id"] = (
            value[:pos] + new + value[pos + 1:])
    return record


@pytest.fixture(scope="module")
def tamper_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("tamper")
    scenario_path = root / "scenario.json"
    scenario_path.write_text(json.dumps(TAMPER_SCENARIO))
    out = root / "run"
    assert cli_main(["run", "--scenario", str(scenario_path),
                     "--out", str(out)]) == EXIT_OK
    lines = (out / "chain.jsonl").read_text().splitlines()
    return out, lines


def test_any_single_byte_flip_is_reported_at_or_before_next_height(
        tamper_run, tmp_path, capsys):
    """100 random one-byte mutations, each caught no later than height k+1."""
    out, lines = tamper_run
    assert len(lines) == 51
    registry = out / "registry.json"
    work = tmp_path / "mutated.jsonl"
    rng = random.Random(2024)

    for trial in range(100):
        # The last block's unreferenced free fields have no successor to
        # bind them, so mutations target every line but that one.
        k = rng.randrange(0, len(lines) - 1)
        record = json.loads(lines[k])
        sites = _mutation_sites(record)
        site = sites[rng.randrange(len(sites))]
        mutated = json.dumps(_apply_mutation(record, site, rng),
                             sort_keys=True)
        assert len(mutated) == len(lines[k])
        assert sum(a != b for a, b in zip(mutated, lines[k])) == 1

        work.write_text(
            "\n".join(lines[:k] + [mutated] + lines[k + 1:]) + "\n")
        capsys.readouterr()
        code = cli_main(["validate", "--chain", str(work),
                         "--registry", str(registry),
                         "--threshold-exp", "254", "--json"])
        payload = json.loads(capsys.readouterr().out)
        context = f"trial {trial} line {k} site {site}: {payload}"
        assert code == EXIT_INVALID, context
        assert payload["status"] == "invalid", context
        assert payload["height"] <= k + 1, context


def test_same_scenario_and_seed_reproduce_artifacts_byte_for_byte(tmp_path):
    """Two full CLI runs of the shipped demo produce identical files."""
    scenario = REPO_ROOT / "scenarios" / "demo.json"
    first = tmp_path / "first"
    second = tmp_path / "second"
    for out in (first, second):
        assert cli_main(["run", "--scenario", str(scenario),
                         "--out", str(out)]) == EXIT_OK
    for name in ("chain.jsonl", "metrics.json", "registry.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes(), \
            name
