"""HTTP facade over the simulator, validator, and calculators.

Every operation is a pydantic request/response pair, handled by a plain
function so in-process callers (the CLI) share one code path with the HTTP
endpoints. Domain outcomes (a stalled run, an invalid chain) are regular
responses; only malformed requests become HTTP errors.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI
from pydantic import BaseModel, Field

from . import __version__
from .crypto_chain import CommitmentRegistry
from .eligibility import Threshold
from .ledger import ParseError, chain_from_lines, chain_validate
from .scenario import InvalidScenario, Scenario, apply_overrides
from .secrecy import ChannelEnv, RadioParams, discriminate, secrecy_capacity, snr_db
from .simnet import Stalled, metrics_to_record
from .simnet import run as run_scenario


class RunRequest(BaseModel):
    scenario: dict
    seed: Optional[int] = None
    heights: Optional[int] = None
    c_ref: Optional[float] = None
    threshold_exp: Optional[int] = None
    quorum_ratio: Optional[float] = None


class RunResponse(BaseModel):
    status: str
    detail: str = ""
    stalled_height: Optional[int] = None
    summary: Optional[dict] = None
    chain: Optional[list] = None
    metrics: Optional[dict] = None
    registry: Optional[list] = None


class ValidateRequest(BaseModel):
    chain_jsonl: str
    registry: list
    threshold_exp: int = 253
    threshold_hex: Optional[str] = None
    c_ref: float = 1.0


class ValidateResponse(BaseModel):
    status: str
    detail: str = ""
    blocks: int = 0
    height: Optional[int] = None
    reason: Optional[str] = None


class SecrecyRequest(BaseModel):
    tx_power_dbm: float
    tx_gain_db: float = 0.0
    rx_gain_db: float = 0.0
    noise_figure_db: float = Field(default=0.0, ge=0)
    path_loss_exponent: float = Field(gt=0)
    ref_loss_db: float
    ref_distance_m: float = Field(gt=0)
    noise_floor_dbm: float
    main_distance_m: float = Field(gt=0)
    eve_distance_m: float = Field(gt=0)
    c_ref: float = Field(default=1.0, ge=0)


class SecrecyResponse(BaseModel):
    snr_main_db: float
    snr_eve_db: float
    capacity_bits: float
    c_ref: float
    verdict: str


class CompareRequest(BaseModel):
    t_b_ms: int = Field(ge=0)
    t_q_ms: int = Field(ge=0)
    t_v_ms: int = Field(ge=0)
    t_s_ms: int = Field(ge=0)
    z: int = Field(ge=0)
    t_ms: int = Field(ge=0)


class CompareRow(BaseModel):
    algorithm: str
    formula: str
    value_ms: int


class CompareResponse(BaseModel):
    rows: list[CompareRow]


def service_run(request: RunRequest) -> RunResponse:
    try:
        scenario = Scenario.from_record(request.scenario)
        scenario = apply_overrides(
            scenario,
            seed=request.seed,
            heights=request.heights,
            c_ref=request.c_ref,
            threshold_exp=request.threshold_exp,
            quorum_ratio=request.quorum_ratio,
        )
    except InvalidScenario as exc:
        return RunResponse(status="config_error", detail=str(exc))
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        return RunResponse(status="config_error",
                           detail=f"malformed scenario: {exc}")
    try:
        result = run_scenario(scenario)
    except Stalled as stall:
        return RunResponse(
            status="stalled", stalled_height=stall.height, detail=str(stall)
        )
    metrics = metrics_to_record(
        result.metrics, scenario.pow_compare.z, scenario.pow_compare.t_ms
    )
    return RunResponse(
        status="ok",
        summary=metrics["summary"],
        chain=[block.to_record() for block in result.chain.blocks],
        metrics=metrics,
        registry=result.registry.to_records(),
    )


def service_validate(request: ValidateRequest) -> ValidateResponse:
    try:
        chain = chain_from_lines(request.chain_jsonl.splitlines())
    except ParseError as exc:
        return ValidateResponse(status="parse_error", detail=str(exc))
    try:
        registry = CommitmentRegistry.from_records(request.registry)
    except (KeyError, TypeError, ValueError) as exc:
        return ValidateResponse(status="parse_error",
                                detail=f"registry: {exc}")
    try:
        if request.threshold_hex is not None:
            threshold = Threshold(int(request.threshold_hex, 16))
        else:
            threshold = Threshold.from_exponent(request.threshold_exp)
    except ValueError as exc:
        return ValidateResponse(status="parse_error",
                                detail=f"threshold: {exc}")
    result = chain_validate(chain, registry, threshold, request.c_ref)
    if result:
        return ValidateResponse(status="valid", blocks=len(chain))
    return ValidateResponse(
        status="invalid",
        blocks=len(chain),
        height=result.height,
        reason=result.reason.value,
        detail=result.detail,
    )


def service_secrecy(request: SecrecyRequest) -> SecrecyResponse:
    radio = RadioParams(
        tx_power_dbm=request.tx_power_dbm,
        tx_gain_db=request.tx_gain_db,
        rx_gain_db=request.rx_gain_db,
        noise_figure_db=request.noise_figure_db,
    )
    env = ChannelEnv(
        path_loss_exponent=request.path_loss_exponent,
        ref_loss_db=request.ref_loss_db,
        ref_distance_m=request.ref_distance_m,
        noise_floor_dbm=request.noise_floor_dbm,
    )
    # both links use the same radio; only the distances differ
    snr_main = snr_db(radio, env, request.main_distance_m)
    snr_eve = snr_db(radio, env, request.eve_distance_m)
    capacity = secrecy_capacity(snr_main, snr_eve)
    passed = discriminate(capacity, request.c_ref)
    return SecrecyResponse(
        snr_main_db=snr_main,
        snr_eve_db=snr_eve,
        capacity_bits=capacity,
        c_ref=request.c_ref,
        verdict="PASS" if passed else "FAIL",
    )


def service_compare(request: CompareRequest) -> CompareResponse:
    pon = request.t_b_ms + request.t_q_ms + request.t_v_ms + request.t_s_ms
    wait = request.z * request.t_ms
    return CompareResponse(rows=[
        CompareRow(algorithm="PoW", formula="z x t", value_ms=wait),
        CompareRow(algorithm="PoS", formula="z x t", value_ms=wait),
        CompareRow(algorithm="PoN", formula="t_b + t_q + t_v + t_s",
                   value_ms=pon),
    ])


app = FastAPI(title="ponsim", version=__version__)


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/run", response_model=RunResponse)
def run_endpoint(request: RunRequest) -> RunResponse:
    return service_run(request)


@app.post("/validate", response_model=ValidateResponse)
def validate_endpoint(request: ValidateRequest) -> ValidateResponse:
    return service_validate(request)


@app.post("/secrecy", response_model=SecrecyResponse)
def secrecy_endpoint(request: SecrecyRequest) -> SecrecyResponse:
    return service_secrecy(request)


@app.post("/compare", response_model=CompareResponse)
def compare_endpoint(request: CompareRequest) -> CompareResponse:
    return service_compare(request)
