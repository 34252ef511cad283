"""Scenario schema: the single JSON document that fully determines a run.

Everything a run needs lives here: world geometry, radios and their control
bounds, channel environment, lottery threshold, gate reference, quorum, timing
constants, and the PoW comparison inputs. Defaults fill any omitted field so a
minimal file is just heights plus vehicle positions.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional

from .eligibility import Threshold
from .secrecy import (
    ChannelEnv,
    ControlBounds,
    EveReceiver,
    KnobBound,
    RadioParams,
    default_bounds,
    within_bounds,
)

DEFAULT_THRESHOLD_EXP = 253
DEFAULT_C_REF = 1.0
DEFAULT_QUORUM_RATIO = 2 / 3
DEFAULT_LINK_LATENCY_MS = 1

_SEED_LIMIT = 1 << 64


class ScenarioParseError(Exception):
    """File or document that is not a well-formed scenario."""

    def __init__(self, path, detail: str):
        super().__init__(f"{path}: {detail}")
        self.path = path
        self.detail = detail


class InvalidScenario(Exception):
    """Well-formed document violating a scenario invariant."""

    def __init__(self, field_name: str, detail: str = ""):
        message = field_name if not detail else f"{field_name}: {detail}"
        super().__init__(message)
        self.field = field_name


@dataclass(frozen=True)
class TimingSpec:
    """Simulated-millisecond cost constants for the round phases."""

    t_q_ms: int = 2
    t_v_ms: int = 3
    t_s_ms: int = 5
    base_generation_ms: int = 100
    iter_cost_ms: int = 1

    def __post_init__(self) -> None:
        for name in ("t_q_ms", "t_v_ms", "t_s_ms", "base_generation_ms",
                     "iter_cost_ms"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def to_record(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class VehicleSpec:
    seed: int
    position: tuple
    speed: float = 0.0
    heading: float = 0.0
    radio: RadioParams = RadioParams(23.0, 3.0, 3.0, 9.0)
    bounds: ControlBounds = field(default_factory=default_bounds)

    def to_record(self) -> dict:
        return {
            "seed": self.seed,
            "position": list(self.position),
            "speed": self.speed,
            "heading": self.heading,
            "radio": dataclasses.asdict(self.radio),
            "bounds": _bounds_to_record(self.bounds),
        }


@dataclass(frozen=True)
class EavesdropperSpec:
    position: tuple
    speed: float = 0.0
    heading: float = 0.0

    def to_record(self) -> dict:
        return {
            "position": list(self.position),
            "speed": self.speed,
            "heading": self.heading,
        }


@dataclass(frozen=True)
class PowCompare:
    z: int = 6
    t_ms: int = 600_000

    def __post_init__(self) -> None:
        if self.z < 0 or self.t_ms < 0:
            raise ValueError("z and t_ms must be >= 0")

    def to_record(self) -> dict:
        return {"z": self.z, "t_ms": self.t_ms}


@dataclass(frozen=True)
class Scenario:
    seed: int
    heights: int
    vehicles: tuple
    eavesdroppers: tuple = ()
    anchor_position: tuple = (0.0, 0.0)
    env: ChannelEnv = ChannelEnv(2.7, 47.0, 1.0, -95.0)
    threshold: Threshold = Threshold.from_exponent(DEFAULT_THRESHOLD_EXP)
    c_ref: float = DEFAULT_C_REF
    quorum_ratio: float = DEFAULT_QUORUM_RATIO
    timing: TimingSpec = TimingSpec()
    link_latency_ms: int = DEFAULT_LINK_LATENCY_MS
    eve_receiver: EveReceiver = EveReceiver()
    pow_compare: PowCompare = PowCompare()
    drop_rate: float = 0.0

    def to_record(self) -> dict:
        return {
            "seed": self.seed,
            "heights": self.heights,
            "vehicles": [v.to_record() for v in self.vehicles],
            "eavesdroppers": [e.to_record() for e in self.eavesdroppers],
            "anchor": {"position": list(self.anchor_position)},
            "env": dataclasses.asdict(self.env),
            "threshold_hex": format(self.threshold.value, "x"),
            "c_ref": self.c_ref,
            "quorum_ratio": self.quorum_ratio,
            "timing": self.timing.to_record(),
            "link_latency_ms": self.link_latency_ms,
            "eve_receiver": dataclasses.asdict(self.eve_receiver),
            "pow_compare": self.pow_compare.to_record(),
            "drop_rate": self.drop_rate,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Scenario":
        return _scenario_from_record(record)


def _bounds_to_record(bounds: ControlBounds) -> dict:
    record = {}
    for knob in ("tx_power_dbm", "tx_gain_db", "rx_gain_db", "noise_figure_db"):
        kb: KnobBound = getattr(bounds, knob)
        record[knob] = {"lo": kb.lo, "hi": kb.hi, "step": kb.step}
    record["max_iters"] = bounds.max_iters
    record["iter_cost_ms"] = bounds.iter_cost_ms
    return record


def _knob_from_record(record, fallback: KnobBound) -> KnobBound:
    if record is None:
        return fallback
    return KnobBound(
        lo=float(record["lo"]), hi=float(record["hi"]),
        step=float(record["step"]),
    )


def _bounds_from_record(record: Optional[dict],
                        default_iter_cost: int) -> ControlBounds:
    base = default_bounds()
    if record is None:
        return dataclasses.replace(base, iter_cost_ms=default_iter_cost)
    return ControlBounds(
        tx_power_dbm=_knob_from_record(record.get("tx_power_dbm"),
                                       base.tx_power_dbm),
        tx_gain_db=_knob_from_record(record.get("tx_gain_db"), base.tx_gain_db),
        rx_gain_db=_knob_from_record(record.get("rx_gain_db"), base.rx_gain_db),
        noise_figure_db=_knob_from_record(record.get("noise_figure_db"),
                                          base.noise_figure_db),
        max_iters=int(record.get("max_iters", base.max_iters)),
        iter_cost_ms=int(record.get("iter_cost_ms", default_iter_cost)),
    )


def _position(value, field_name: str) -> tuple:
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(c, (int, float)) for c in value)):
        raise InvalidScenario(field_name, "position must be [x, y] meters")
    return (float(value[0]), float(value[1]))


def _radio_from_record(record: Optional[dict]) -> RadioParams:
    if record is None:
        return RadioParams(23.0, 3.0, 3.0, 9.0)
    try:
        return RadioParams(
            tx_power_dbm=float(record["tx_power_dbm"]),
            tx_gain_db=float(record["tx_gain_db"]),
            rx_gain_db=float(record["rx_gain_db"]),
            noise_figure_db=float(record["noise_figure_db"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScenario("radio", str(exc)) from exc


def _threshold_from_record(record: dict) -> Threshold:
    if "threshold_hex" in record:
        try:
            return Threshold(int(record["threshold_hex"], 16))
        except ValueError as exc:
            raise InvalidScenario("threshold_hex", str(exc)) from exc
    exp = record.get("threshold_exp", DEFAULT_THRESHOLD_EXP)
    try:
        return Threshold.from_exponent(int(exp))
    except (TypeError, ValueError) as exc:
        raise InvalidScenario("threshold_exp", str(exc)) from exc


def _scenario_from_record(record: dict) -> Scenario:
    if not isinstance(record, dict):
        raise InvalidScenario("document", "scenario must be a JSON object")
    seed = int(record.get("seed", 0))
    if not 0 <= seed < _SEED_LIMIT:
        raise InvalidScenario("seed", "must fit in 64 bits unsigned")
    heights = int(record.get("heights", 0))
    if heights < 1:
        raise InvalidScenario("heights", "must be >= 1")

    try:
        timing = TimingSpec(**record["timing"]) if "timing" in record \
            else TimingSpec()
    except (TypeError, ValueError) as exc:
        raise InvalidScenario("timing", str(exc)) from exc

    raw_vehicles = record.get("vehicles") or []
    if not raw_vehicles:
        raise InvalidScenario("vehicles", "at least one vehicle required")
    vehicles = []
    for index, raw in enumerate(raw_vehicles):
        radio = _radio_from_record(raw.get("radio"))
        try:
            bounds = _bounds_from_record(raw.get("bounds"), timing.iter_cost_ms)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidScenario("bounds", str(exc)) from exc
        if not within_bounds(radio, bounds):
            raise InvalidScenario(
                "radio", f"vehicle {index} radio outside its control bounds"
            )
        heading = float(raw.get("heading", 0.0))
        if not 0.0 <= heading < 360.0:
            raise InvalidScenario("heading", f"vehicle {index}")
        speed = float(raw.get("speed", 0.0))
        if speed < 0:
            raise InvalidScenario("speed", f"vehicle {index}")
        vehicles.append(
            VehicleSpec(
                seed=int(raw.get("seed", index)),
                position=_position(raw.get("position"), "vehicles"),
                speed=speed,
                heading=heading,
                radio=radio,
                bounds=bounds,
            )
        )

    eavesdroppers = []
    for raw in record.get("eavesdroppers") or []:
        eavesdroppers.append(
            EavesdropperSpec(
                position=_position(raw.get("position"), "eavesdroppers"),
                speed=float(raw.get("speed", 0.0)),
                heading=float(raw.get("heading", 0.0)),
            )
        )

    anchor_record = record.get("anchor") or {}
    anchor_position = _position(anchor_record.get("position", [0.0, 0.0]),
                                "anchor")

    try:
        env = ChannelEnv(**record["env"]) if "env" in record else \
            ChannelEnv(2.7, 47.0, 1.0, -95.0)
    except (TypeError, ValueError) as exc:
        raise InvalidScenario("env", str(exc)) from exc

    c_ref = float(record.get("c_ref", DEFAULT_C_REF))
    if c_ref < 0:
        raise InvalidScenario("c_ref", "must be >= 0")
    quorum_ratio = float(record.get("quorum_ratio", DEFAULT_QUORUM_RATIO))
    if not 0.5 < quorum_ratio <= 1.0:
        raise InvalidScenario("quorum_ratio", "must be in (0.5, 1]")
    link_latency_ms = int(record.get("link_latency_ms",
                                     DEFAULT_LINK_LATENCY_MS))
    if link_latency_ms < 0:
        raise InvalidScenario("link_latency_ms", "must be >= 0")
    drop_rate = float(record.get("drop_rate", 0.0))
    if not 0.0 <= drop_rate < 1.0:
        raise InvalidScenario("drop_rate", "must be in [0, 1)")

    try:
        eve_receiver = EveReceiver(**record["eve_receiver"]) \
            if "eve_receiver" in record else EveReceiver()
    except TypeError as exc:
        raise InvalidScenario("eve_receiver", str(exc)) from exc
    try:
        pow_compare = PowCompare(**record["pow_compare"]) \
            if "pow_compare" in record else PowCompare()
    except (TypeError, ValueError) as exc:
        raise InvalidScenario("pow_compare", str(exc)) from exc

    return Scenario(
        seed=seed,
        heights=heights,
        vehicles=tuple(vehicles),
        eavesdroppers=tuple(eavesdroppers),
        anchor_position=anchor_position,
        env=env,
        threshold=_threshold_from_record(record),
        c_ref=c_ref,
        quorum_ratio=quorum_ratio,
        timing=timing,
        link_latency_ms=link_latency_ms,
        eve_receiver=eve_receiver,
        pow_compare=pow_compare,
        drop_rate=drop_rate,
    )


def scenario_load(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            record = json.load(fh)
    except OSError as exc:
        raise ScenarioParseError(path, str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(path, f"invalid JSON: {exc}") from exc
    if not isinstance(record, dict):
        raise ScenarioParseError(path, "top level must be a JSON object")
    return _scenario_from_record(record)


def apply_overrides(
    scenario: Scenario,
    seed: Optional[int] = None,
    heights: Optional[int] = None,
    c_ref: Optional[float] = None,
    threshold_exp: Optional[int] = None,
    quorum_ratio: Optional[float] = None,
) -> Scenario:
    """CLI/service overrides; each checked against the same invariants."""
    changes: dict = {}
    if seed is not None:
        if not 0 <= seed < _SEED_LIMIT:
            raise InvalidScenario("seed", "must fit in 64 bits unsigned")
        changes["seed"] = seed
    if heights is not None:
        if heights < 1:
            raise InvalidScenario("heights", "must be >= 1")
        changes["heights"] = heights
    if c_ref is not None:
        if c_ref < 0:
            raise InvalidScenario("c_ref", "must be >= 0")
        changes["c_ref"] = c_ref
    if threshold_exp is not None:
        try:
            changes["threshold"] = Threshold.from_exponent(threshold_exp)
        except ValueError as exc:
            raise InvalidScenario("threshold_exp", str(exc)) from exc
    if quorum_ratio is not None:
        if not 0.5 < quorum_ratio <= 1.0:
            raise InvalidScenario("quorum_ratio", "must be in (0.5, 1]")
        changes["quorum_ratio"] = quorum_ratio
    if not changes:
        return scenario
    return dataclasses.replace(scenario, **changes)
