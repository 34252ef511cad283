"""Physical-layer model: path loss, link budget, wiretap secrecy capacity.

The secrecy capacity C_s of a main link against an eavesdropper link is the
nonnegative gap between their Shannon capacities. A proposer may only admit a
block when C_s clears a reference value; when it does not, a deterministic
greedy loop nudges the radio knobs one step at a time looking for a setting
that does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

_EPS = 1e-9

# Knob evaluation order for the control loop; fixed for determinism.
_KNOB_ORDER = ("tx_power_dbm", "tx_gain_db", "rx_gain_db", "noise_figure_db")


class NonPositiveDistance(ValueError):
    pass


class OutOfBounds(ValueError):
    pass


@dataclass(frozen=True)
class ChannelEnv:
    """Log-distance propagation environment."""

    path_loss_exponent: float
    ref_loss_db: float
    ref_distance_m: float
    noise_floor_dbm: float

    def __post_init__(self) -> None:
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be > 0")
        if self.ref_distance_m <= 0:
            raise ValueError("ref_distance_m must be > 0")


@dataclass(frozen=True)
class RadioParams:
    tx_power_dbm: float
    tx_gain_db: float
    rx_gain_db: float
    noise_figure_db: float

    def __post_init__(self) -> None:
        if self.noise_figure_db < 0:
            raise ValueError("noise_figure_db must be >= 0")


@dataclass(frozen=True)
class EveReceiver:
    """Receiver profile assumed for the eavesdropper's radio front end."""

    rx_gain_db: float = 0.0
    noise_figure_db: float = 6.0


@dataclass(frozen=True)
class SecrecyReport:
    snr_main_db: float
    snr_eve_db: float
    capacity_bits: float


@dataclass(frozen=True)
class KnobBound:
    lo: float
    hi: float
    step: float

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError("knob bound lo > hi")
        if self.step <= 0:
            raise ValueError("knob step must be > 0")

    def contains(self, value: float) -> bool:
        return self.lo - _EPS <= value <= self.hi + _EPS


@dataclass(frozen=True)
class ControlBounds:
    tx_power_dbm: KnobBound
    tx_gain_db: KnobBound
    rx_gain_db: KnobBound
    noise_figure_db: KnobBound
    max_iters: int = 32
    iter_cost_ms: int = 1

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.iter_cost_ms < 0:
            raise ValueError("iter_cost_ms must be >= 0")


def default_bounds() -> ControlBounds:
    return ControlBounds(
        tx_power_dbm=KnobBound(5.0, 30.0, 1.0),
        tx_gain_db=KnobBound(0.0, 6.0, 1.0),
        rx_gain_db=KnobBound(0.0, 6.0, 1.0),
        noise_figure_db=KnobBound(3.0, 12.0, 1.0),
    )


def path_loss_db(env: ChannelEnv, distance_m: float) -> float:
    """Log-distance path loss: ref loss plus 10·n·log10(d / d_ref)."""
    if distance_m <= 0:
        raise NonPositiveDistance(f"distance must be > 0, got {distance_m}")
    return env.ref_loss_db + 10.0 * env.path_loss_exponent * math.log10(
        distance_m / env.ref_distance_m
    )


def snr_db(radio: RadioParams, env: ChannelEnv, distance_m: float) -> float:
    """Link budget: powers and gains in, path loss and receiver noise out."""
    return (
        radio.tx_power_dbm
        + radio.tx_gain_db
        + radio.rx_gain_db
        - path_loss_db(env, distance_m)
        - (env.noise_floor_dbm + radio.noise_figure_db)
    )


def secrecy_capacity(snr_main_db: float, snr_eve_db: float) -> float:
    """Gaussian wiretap closed form, floored at zero bits/s/Hz."""
    main = math.log2(1.0 + 10.0 ** (snr_main_db / 10.0))
    eve = math.log2(1.0 + 10.0 ** (snr_eve_db / 10.0))
    return max(0.0, main - eve)


def discriminate(capacity_bits: float, c_ref: float) -> bool:
    """Block admission check; inclusive at the boundary."""
    if c_ref < 0:
        raise ValueError("c_ref must be >= 0")
    return capacity_bits >= c_ref


def eve_radio(radio: RadioParams, eve: EveReceiver) -> RadioParams:
    """The eavesdropper's link shares the transmitter but not the receiver."""
    return RadioParams(
        tx_power_dbm=radio.tx_power_dbm,
        tx_gain_db=radio.tx_gain_db,
        rx_gain_db=eve.rx_gain_db,
        noise_figure_db=eve.noise_figure_db,
    )


def link_report(
    radio: RadioParams,
    env: ChannelEnv,
    main_distance_m: float,
    eve_distance_m: Optional[float],
    eve: EveReceiver = EveReceiver(),
) -> SecrecyReport:
    """Evaluate both channels at current geometry. No eavesdropper: -inf SNR."""
    snr_main = snr_db(radio, env, main_distance_m)
    if eve_distance_m is None:
        snr_eve = -math.inf
    else:
        snr_eve = snr_db(eve_radio(radio, eve), env, eve_distance_m)
    return SecrecyReport(snr_main, snr_eve, secrecy_capacity(snr_main, snr_eve))


def within_bounds(radio: RadioParams, bounds: ControlBounds) -> bool:
    return all(
        getattr(bounds, knob).contains(getattr(radio, knob)) for knob in _KNOB_ORDER
    )


def control_step(
    radio: RadioParams,
    bounds: ControlBounds,
    env: ChannelEnv,
    main_distance_m: float,
    eve_distance_m: Optional[float],
    eve: EveReceiver = EveReceiver(),
) -> tuple[RadioParams, bool]:
    """One greedy coordinate-ascent move.

    Tries one +/- step on each knob in fixed order and applies the single move
    with the largest strict capacity gain; (radio, False) when no in-bounds
    move improves capacity.
    """
    if not within_bounds(radio, bounds):
        raise OutOfBounds(f"radio {radio} violates bounds")
    current = link_report(radio, env, main_distance_m, eve_distance_m, eve)
    best_radio = radio
    best_capacity = current.capacity_bits
    for knob in _KNOB_ORDER:
        bound: KnobBound = getattr(bounds, knob)
        value = getattr(radio, knob)
        for direction in (bound.step, -bound.step):
            moved = value + direction
            if not bound.contains(moved):
                continue
            candidate = replace(radio, **{knob: moved})
            report = link_report(candidate, env, main_distance_m, eve_distance_m, eve)
            if report.capacity_bits > best_capacity + _EPS:
                best_radio = candidate
                best_capacity = report.capacity_bits
    return best_radio, best_radio is not radio


def control_until(
    radio: RadioParams,
    bounds: ControlBounds,
    env: ChannelEnv,
    main_distance_m: float,
    eve_distance_m: Optional[float],
    c_ref: float,
    eve: EveReceiver = EveReceiver(),
) -> tuple[RadioParams, int, bool]:
    """Step the knobs until the gate passes, the surface saturates, or the
    iteration budget runs out. Returns (final radio, iterations, feasible);
    iterations are charged at bounds.iter_cost_ms each toward block time.
    """
    if not within_bounds(radio, bounds):
        raise OutOfBounds(f"radio {radio} violates bounds")
    iters = 0
    current = radio
    while True:
        report = link_report(current, env, main_distance_m, eve_distance_m, eve)
        if discriminate(report.capacity_bits, c_ref):
            return current, iters, True
        if iters >= bounds.max_iters:
            return current, iters, False
        stepped, improved = control_step(
            current, bounds, env, main_distance_m, eve_distance_m, eve
        )
        if not improved:
            return current, iters, False
        current = stepped
        iters += 1
