"""Scenario schema: defaults, validation, file loading, overrides."""

import dataclasses
import json

import pytest

from ponsim.scenario import (
    DEFAULT_LINK_LATENCY_MS,
    DEFAULT_QUORUM_RATIO,
    InvalidScenario,
    PowCompare,
    Scenario,
    ScenarioParseError,
    TimingSpec,
    apply_overrides,
    scenario_load,
)
from ponsim.secrecy import RadioParams


MINIMAL = {"heights": 5, "vehicles": [{"position": [10, 0]}]}


def make(record):
    return Scenario.from_record(json.loads(json.dumps(record)))


class TestDefaults:
    def test_minimal_record_fills_defaults(self):
        sc = make(MINIMAL)
        assert sc.seed == 0
        assert sc.heights == 5
        assert len(sc.vehicles) == 1
        assert sc.quorum_ratio == DEFAULT_QUORUM_RATIO
        assert sc.link_latency_ms == DEFAULT_LINK_LATENCY_MS
        assert sc.c_ref == 1.0
        assert sc.threshold.value == 1 << 253
        assert sc.timing == TimingSpec()
        assert sc.pow_compare == PowCompare()
        assert sc.eavesdroppers == ()
        assert sc.anchor_position == (0.0, 0.0)
        assert sc.drop_rate == 0.0

    def test_vehicle_defaults(self):
        sc = make({"heights": 1, "vehicles": [{"position": [1, 2]},
                                              {"position": [3, 4]}]})
        first, second = sc.vehicles
        assert first.seed == 0 and second.seed == 1
        assert first.position == (1.0, 2.0)
        assert first.speed == 0.0 and first.heading == 0.0
        assert first.radio == RadioParams(23.0, 3.0, 3.0, 9.0)
        assert first.bounds.max_iters == 32

    def test_bounds_inherit_timing_iter_cost(self):
        record = dict(MINIMAL, timing={"iter_cost_ms": 7})
        sc = make(record)
        assert sc.timing.iter_cost_ms == 7
        assert sc.vehicles[0].bounds.iter_cost_ms == 7

    def test_explicit_bounds_override(self):
        record = {
            "heights": 1,
            "vehicles": [{
                "position": [0, 0],
                "radio": {"tx_power_dbm": 10, "tx_gain_db": 0,
                          "rx_gain_db": 0, "noise_figure_db": 5},
                "bounds": {
                    "tx_power_dbm": {"lo": 0, "hi": 20, "step": 2},
                    "max_iters": 8,
                },
            }],
        }
        sc = make(record)
        bounds = sc.vehicles[0].bounds
        assert bounds.tx_power_dbm.lo == 0 and bounds.tx_power_dbm.hi == 20
        assert bounds.tx_power_dbm.step == 2
        assert bounds.max_iters == 8
        # unspecified knobs keep the defaults
        assert bounds.tx_gain_db.hi == 6.0


class TestValidation:
    def test_no_vehicles_rejected(self):
        with pytest.raises(InvalidScenario) as err:
            make({"heights": 3, "vehicles": []})
        assert err.value.field == "vehicles"

    def test_zero_heights_rejected(self):
        with pytest.raises(InvalidScenario) as err:
            make({"heights": 0, "vehicles": [{"position": [0, 0]}]})
        assert err.value.field == "heights"

    def test_radio_outside_bounds_rejected(self):
        record = {
            "heights": 1,
            "vehicles": [{
                "position": [0, 0],
                "radio": {"tx_power_dbm": 50, "tx_gain_db": 3,
                          "rx_gain_db": 3, "noise_figure_db": 9},
            }],
        }
        with pytest.raises(InvalidScenario) as err:
            make(record)
        assert err.value.field == "radio"

    def test_bad_quorum_rejected(self):
        for ratio in (0.5, 0.2, 1.5):
            with pytest.raises(InvalidScenario) as err:
                make(dict(MINIMAL, quorum_ratio=ratio))
            assert err.value.field == "quorum_ratio"

    def test_bad_heading_rejected(self):
        record = {"heights": 1,
                  "vehicles": [{"position": [0, 0], "heading": 360.0}]}
        with pytest.raises(InvalidScenario) as err:
            make(record)
        assert err.value.field == "heading"

    def test_negative_speed_rejected(self):
        record = {"heights": 1,
                  "vehicles": [{"position": [0, 0], "speed": -1}]}
        with pytest.raises(InvalidScenario) as err:
            make(record)
        assert err.value.field == "speed"

    def test_seed_must_fit_64_bits(self):
        with pytest.raises(InvalidScenario) as err:
            make(dict(MINIMAL, seed=1 << 64))
        assert err.value.field == "seed"

    def test_negative_c_ref_rejected(self):
        with pytest.raises(InvalidScenario) as err:
            make(dict(MINIMAL, c_ref=-0.5))
        assert err.value.field == "c_ref"

    def test_drop_rate_range(self):
        with pytest.raises(InvalidScenario):
            make(dict(MINIMAL, drop_rate=1.0))
        assert make(dict(MINIMAL, drop_rate=0.25)).drop_rate == 0.25

    def test_bad_position_shape(self):
        with pytest.raises(InvalidScenario) as err:
            make({"heights": 1, "vehicles": [{"position": [1]}]})
        assert err.value.field == "vehicles"


class TestThreshold:
    def test_threshold_exp(self):
        sc = make(dict(MINIMAL, threshold_exp=100))
        assert sc.threshold.value == 1 << 100

    def test_threshold_hex_wins_over_exp(self):
        record = dict(MINIMAL, threshold_exp=100, threshold_hex="ff")
        assert make(record).threshold.value == 0xFF

    def test_bad_exponent(self):
        with pytest.raises(InvalidScenario) as err:
            make(dict(MINIMAL, threshold_exp=256))
        assert err.value.field == "threshold_exp"


class TestRoundTrip:
    def test_to_record_round_trip(self):
        record = {
            "seed": 42,
            "heights": 9,
            "vehicles": [
                {"position": [25, 10], "speed": 13.9, "heading": 92.5},
                {"position": [-40, 5], "seed": 77},
            ],
            "eavesdroppers": [{"position": [100, 100], "speed": 5}],
            "anchor": {"position": [0, -3]},
            "threshold_exp": 250,
            "c_ref": 1.5,
            "quorum_ratio": 0.75,
            "link_latency_ms": 2,
            "drop_rate": 0.0,
        }
        first = make(record)
        second = Scenario.from_record(first.to_record())
        assert first == second

    def test_round_trip_is_json_stable(self):
        sc = make(MINIMAL)
        dumped = json.dumps(sc.to_record(), sort_keys=True)
        again = json.dumps(
            Scenario.from_record(json.loads(dumped)).to_record(),
            sort_keys=True,
        )
        assert dumped == again


class TestLoad:
    def test_load_file(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(MINIMAL))
        sc = scenario_load(path)
        assert sc.heights == 5

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioParseError):
            scenario_load(tmp_path / "nope.json")

    def test_bad_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{'not': json}")
        with pytest.raises(ScenarioParseError):
            scenario_load(path)

    def test_non_object_top_level(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]")
        with pytest.raises(ScenarioParseError):
            scenario_load(path)


class TestOverrides:
    def test_overrides_apply(self):
        sc = make(MINIMAL)
        out = apply_overrides(sc, seed=9, heights=20, c_ref=2.0,
                              threshold_exp=200, quorum_ratio=0.8)
        assert out.seed == 9
        assert out.heights == 20
        assert out.c_ref == 2.0
        assert out.threshold.value == 1 << 200
        assert out.quorum_ratio == 0.8
        # untouched fields carried over
        assert out.vehicles == sc.vehicles

    def test_no_overrides_returns_same(self):
        sc = make(MINIMAL)
        assert apply_overrides(sc) is sc

    def test_override_invariants_enforced(self):
        sc = make(MINIMAL)
        with pytest.raises(InvalidScenario):
            apply_overrides(sc, heights=0)
        with pytest.raises(InvalidScenario):
            apply_overrides(sc, quorum_ratio=0.5)
        with pytest.raises(InvalidScenario):
            apply_overrides(sc, threshold_exp=-1)
        with pytest.raises(InvalidScenario):
            apply_overrides(sc, seed=-1)

    def test_scenarios_hashable_and_frozen(self):
        sc = make(MINIMAL)
        with pytest.raises(dataclasses.FrozenInstanceError):
            sc.heights = 7
