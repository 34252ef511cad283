"""Proof-of-Nonce V2V consensus with secrecy-capacity-gated block admission."""

from ponsim.ledger import Block, BlockHeader, Chain, chain_load, chain_validate
from ponsim.scenario import InvalidScenario, Scenario, scenario_load
from ponsim.secrecy import secrecy_capacity, snr_db
from ponsim.simnet import RunResult, Simulation, Stalled, run

__version__ = "0.1.0"

__all__ = [
    "Block",
    "BlockHeader",
    "Chain",
    "InvalidScenario",
    "RunResult",
    "Scenario",
    "Simulation",
    "Stalled",
    "chain_load",
    "chain_validate",
    "run",
    "scenario_load",
    "secrecy_capacity",
    "snr_db",
    "__version__",
]
