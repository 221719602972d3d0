"""Deterministic simulator for per-trie-node storage rent on EVM-style state."""

from .trie import NodeKind, RentTrie
from .rent import HolidayMode, HolidayWindow, Reason, RentParams
from .executor import BlockContext, Transaction, TxOp, execute_tx
from .workload import WorkloadSpec, generate, setup_state
from .cache import TierPolicy
from .scenario import (
    ScenarioConfig,
    load_config,
    params_digest,
    parse_config,
    run_scenario,
    write_outputs,
)

__version__ = "0.1.0"

__all__ = [
    "BlockContext", "HolidayMode", "HolidayWindow", "NodeKind", "Reason",
    "RentParams", "RentTrie", "ScenarioConfig", "TierPolicy", "Transaction",
    "TxOp", "WorkloadSpec", "execute_tx", "generate", "load_config",
    "params_digest", "parse_config", "run_scenario", "setup_state",
    "write_outputs",
]
