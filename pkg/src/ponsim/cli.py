"""Command-line front door: run, validate, secrecy, compare.

Each subcommand builds the matching service request and hands it to the
service layer, in process by default or over HTTP when --server is given.
The CLI itself only does file and terminal I/O.

Exit codes: 0 success; 1 bad input or configuration; 2 stalled run;
3 invalid chain.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

import pydantic

from .service import (
    CompareRequest,
    CompareResponse,
    RunRequest,
    RunResponse,
    SecrecyRequest,
    SecrecyResponse,
    ValidateRequest,
    ValidateResponse,
    service_compare,
    service_run,
    service_secrecy,
    service_validate,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_STALLED = 2
EXIT_INVALID = 3


class CliError(Exception):
    """Input problem mapped to exit code 1."""


def _fail(message: str) -> None:
    raise CliError(message)


def _dispatch(server: Optional[str], path: str, request, response_cls,
              local_fn):
    if server is None:
        return local_fn(request)
    import httpx

    url = server.rstrip("/") + path
    try:
        reply = httpx.post(url, json=request.model_dump(mode="json"),
                           timeout=600.0)
    except httpx.HTTPError as exc:
        _fail(f"server {url}: {exc}")
    if reply.status_code != 200:
        _fail(f"server {url}: HTTP {reply.status_code}: {reply.text}")
    return response_cls.model_validate(reply.json())


def _read_text(path: str, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        _fail(f"cannot read {what} {path}: {exc.strerror or exc}")


def _read_json(path: str, what: str):
    text = _read_text(path, what)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        _fail(f"{what} {path}: invalid JSON: {exc}")


def cmd_run(args) -> int:
    record = _read_json(args.scenario, "scenario")
    if not isinstance(record, dict):
        _fail(f"scenario {args.scenario}: top level must be a JSON object")
    if args.threshold_hex is not None:
        record["threshold_hex"] = args.threshold_hex
        record.pop("threshold_exp", None)
    request = RunRequest(
        scenario=record,
        seed=args.seed,
        heights=args.heights,
        c_ref=args.c_ref,
        threshold_exp=args.threshold_exp,
        quorum_ratio=args.quorum,
    )
    response: RunResponse = _dispatch(args.server, "/run", request,
                                      RunResponse, service_run)
    if response.status == "config_error":
        _fail(f"scenario {args.scenario}: {response.detail}")
    if response.status == "stalled":
        print(f"stalled: {response.detail}", file=sys.stderr)
        return EXIT_STALLED
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    chain_path = out_dir / "chain.jsonl"
    with open(chain_path, "w", encoding="utf-8") as fh:
        for block_record in response.chain:
            fh.write(json.dumps(block_record, sort_keys=True))
            fh.write("\n")
    with open(out_dir / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(response.metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out_dir / "registry.json", "w", encoding="utf-8") as fh:
        json.dump(response.registry, fh, indent=2)
        fh.write("\n")
    summary = response.summary
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        print(
            f"finalized {summary['heights']} heights, "
            f"mean confirmation {summary['mean_confirmation_ms']:.1f} ms "
            f"(PoW reference {summary['pow_confirmation_ms']} ms), "
            f"wrote {chain_path}"
        )
    return EXIT_OK


def cmd_validate(args) -> int:
    chain_text = _read_text(args.chain, "chain")
    registry_records = _read_json(args.registry, "registry")
    if not isinstance(registry_records, list):
        _fail(f"registry {args.registry}: top level must be a JSON array")
    request = ValidateRequest(
        chain_jsonl=chain_text,
        registry=registry_records,
        threshold_exp=args.threshold_exp,
        threshold_hex=args.threshold_hex,
        c_ref=args.c_ref,
    )
    response: ValidateResponse = _dispatch(args.server, "/validate", request,
                                           ValidateResponse, service_validate)
    if response.status == "parse_error":
        _fail(f"{args.chain}: {response.detail}")
    if args.json:
        print(json.dumps(response.model_dump(), sort_keys=True))
    elif response.status == "valid":
        print(f"chain valid ({response.blocks} blocks)")
    else:
        print(
            f"chain invalid at height {response.height}: {response.reason}"
            + (f" ({response.detail})" if response.detail else "")
        )
    return EXIT_OK if response.status == "valid" else EXIT_INVALID


def cmd_secrecy(args) -> int:
    request = SecrecyRequest(
        tx_power_dbm=args.tx_dbm,
        tx_gain_db=args.tx_gain,
        rx_gain_db=args.rx_gain,
        noise_figure_db=args.nf,
        path_loss_exponent=args.pl_exp,
        ref_loss_db=args.ref_loss,
        ref_distance_m=args.ref_dist,
        noise_floor_dbm=args.noise_floor,
        main_distance_m=args.main_dist,
        eve_distance_m=args.eve_dist,
        c_ref=args.c_ref,
    )
    response: SecrecyResponse = _dispatch(args.server, "/secrecy", request,
                                          SecrecyResponse, service_secrecy)
    if args.json:
        print(json.dumps(response.model_dump(), sort_keys=True))
    else:
        print(f"snr_main_db = {response.snr_main_db:.3f}")
        print(f"snr_eve_db = {response.snr_eve_db:.3f}")
        print(f"capacity_bits = {response.capacity_bits:.3f}")
        print(f"{response.verdict} (c_ref = {response.c_ref:.3f})")
    return EXIT_OK


def cmd_compare(args) -> int:
    request = CompareRequest(
        t_b_ms=args.tb, t_q_ms=args.tq, t_v_ms=args.tv, t_s_ms=args.ts,
        z=args.z, t_ms=args.t,
    )
    response: CompareResponse = _dispatch(args.server, "/compare", request,
                                          CompareResponse, service_compare)
    if args.json:
        print(json.dumps(response.model_dump(), sort_keys=True))
        return EXIT_OK
    width = max(len(row.formula) for row in response.rows)
    print(f"{'algorithm':<10} {'formula':<{width}} value_ms")
    for row in response.rows:
        print(f"{row.algorithm:<10} {row.formula:<{width}} {row.value_ms}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ponsim",
        description="Proof-of-Nonce V2V consensus simulator and tools",
    )
    parser.add_argument("--server", metavar="URL", default=None,
                        help="send the request to a running service instead "
                             "of computing in process")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    run_p = sub.add_parser("run", help="execute a scenario, write artifacts")
    run_p.add_argument("--scenario", required=True, help="scenario JSON path")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--heights", type=int, default=None)
    run_p.add_argument("--c-ref", type=float, default=None)
    threshold = run_p.add_mutually_exclusive_group()
    threshold.add_argument("--threshold-exp", type=int, default=None,
                           help="lottery threshold as 2^K")
    threshold.add_argument("--threshold-hex", default=None,
                           help="lottery threshold as a hex integer")
    run_p.add_argument("--quorum", type=float, default=None,
                       help="quorum ratio in (0.5, 1]")
    run_p.add_argument("--json", action="store_true")
    run_p.set_defaults(handler=cmd_run)

    val_p = sub.add_parser("validate", help="check a persisted chain")
    val_p.add_argument("--chain", required=True, help="chain.jsonl path")
    val_p.add_argument("--registry", required=True, help="registry.json path")
    thr = val_p.add_mutually_exclusive_group()
    thr.add_argument("--threshold-exp", type=int, default=253)
    thr.add_argument("--threshold-hex", default=None)
    val_p.add_argument("--c-ref", type=float, default=1.0)
    val_p.add_argument("--json", action="store_true")
    val_p.set_defaults(handler=cmd_validate)

    sec_p = sub.add_parser("secrecy",
                           help="evaluate one wiretap link budget")
    sec_p.add_argument("--tx-dbm", type=float, required=True)
    sec_p.add_argument("--tx-gain", type=float, default=0.0)
    sec_p.add_argument("--rx-gain", type=float, default=0.0)
    sec_p.add_argument("--nf", type=float, default=0.0,
                       help="receiver noise figure, dB")
    sec_p.add_argument("--pl-exp", type=float, required=True,
                       help="path loss exponent")
    sec_p.add_argument("--ref-loss", type=float, required=True,
                       help="path loss at the reference distance, dB")
    sec_p.add_argument("--ref-dist", type=float, default=1.0)
    sec_p.add_argument("--noise-floor", type=float, required=True,
                       help="thermal noise floor, dBm")
    sec_p.add_argument("--main-dist", type=float, required=True)
    sec_p.add_argument("--eve-dist", type=float, required=True)
    sec_p.add_argument("--c-ref", type=float, default=1.0)
    sec_p.add_argument("--json", action="store_true")
    sec_p.set_defaults(handler=cmd_secrecy)

    cmp_p = sub.add_parser("compare",
                           help="confirmation-time table: PoW, PoS, PoN")
    cmp_p.add_argument("--tb", type=int, required=True,
                       help="block generation time, ms")
    cmp_p.add_argument("--tq", type=int, required=True,
                       help="qualification verification time, ms")
    cmp_p.add_argument("--tv", type=int, required=True,
                       help="candidate verification time, ms")
    cmp_p.add_argument("--ts", type=int, required=True,
                       help="consensus settlement time, ms")
    cmp_p.add_argument("--z", type=int, required=True,
                       help="blocks to wait under PoW/PoS")
    cmp_p.add_argument("--t", type=int, required=True,
                       help="block interval under PoW/PoS, ms")
    cmp_p.add_argument("--json", action="store_true")
    cmp_p.set_defaults(handler=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except pydantic.ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first["loc"])
        print(f"error: {where}: {first['msg']}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
