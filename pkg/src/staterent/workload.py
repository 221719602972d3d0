"""Deterministic transaction stream generators.

All randomness comes from SplitMix64 (Steele, Lea, Flood: "Fast splittable
pseudorandom number generators", OOPSLA 2014), chosen because it is trivially
portable: 64-bit wrapping adds and multiplies with fixed constants, so any
implementation in any language reproduces the same stream bit for bit.  The
generator identity is recorded in metrics output as "splitmix64".

Genesis state is written directly into the trie at `genesis_timestamp`; the
transaction stream then starts `dormancy_seconds` later, and block i carries
timestamp genesis + dormancy + i * block_interval_seconds.  Every generated
key belongs to the population laid down by setup_state, except the
deliberately absent b"void/..." probes of the dos_missing_keys kind.

Zipf sampling uses a float64 cumulative table and bisection.  Replays with
one seed are bit-identical on a given platform; the table construction is
fixed here (1/k**skew, cumulative sum, divide by total, bisect_right) so
other implementations can match it.
"""

from __future__ import annotations

import io
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterator, TextIO

from .executor import BlockContext, Transaction, TxOp
from .trie import NodeKind, RentTrie

GENERATOR_NAME = "splitmix64"

WORKLOAD_KINDS = ("erc20", "uniform_random", "dormant_reader",
                  "selfdestruct_sweep", "dos_missing_keys")

_MASK64 = (1 << 64) - 1
EXEC_GAS = 21_000
GAS_LIMIT = 1_000_000  # rent headroom; out-of-gas is exercised in tests, not here

CODE_KEY = b"erc20/code"
CODE_VALUE = bytes(range(256)) * 39 + bytes(16)  # 10,000 bytes
PARAM_KEYS = (b"erc20/param/0", b"erc20/param/1")


class WorkloadError(Exception):
    pass


class SplitMix64:
    """64-bit SplitMix64; next_u64 is the reference mix function verbatim."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_below(self, n: int) -> int:
        # Lemire reduction; slightly biased for huge n, fine for sampling.
        return (self.next_u64() * n) >> 64

    def next_unit(self) -> float:
        # 53-bit mantissa in [0, 1).
        return (self.next_u64() >> 11) * 2.0 ** -53


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str
    seed: int = 42
    n_accounts: int = 1_000
    n_txs: int = 1_000
    txs_per_block: int = 100
    skew: float = 1.0
    block_interval_seconds: int = 30
    genesis_timestamp: int = 1_700_000_000
    dormancy_seconds: int = 31_536_000
    cells_per_contract: int = 16     # selfdestruct_sweep only
    missing_reads_per_tx: int = 3    # dos_missing_keys only

    def __post_init__(self):
        if self.kind not in WORKLOAD_KINDS:
            raise WorkloadError(f"unknown workload kind {self.kind!r}")
        if not (0 <= self.seed < 1 << 64):
            raise WorkloadError("seed must fit in 64 bits")
        for name in ("n_accounts", "n_txs", "txs_per_block",
                     "block_interval_seconds", "cells_per_contract",
                     "missing_reads_per_tx"):
            if getattr(self, name) < 1:
                raise WorkloadError(f"{name} must be positive")
        for name in ("genesis_timestamp", "dormancy_seconds"):
            if getattr(self, name) < 0:
                raise WorkloadError(f"{name} must be non-negative")
        if not self.skew > 0:
            raise WorkloadError("skew must be positive")


def account_key(i: int) -> bytes:
    return b"acct/%08d" % i

def balance_key(i: int) -> bytes:
    return b"erc20/bal/%08d" % i

def cell_key(i: int) -> bytes:
    return b"cell/%08d" % i

def contract_prefix(i: int) -> bytes:
    return b"con/%06d/" % i

def _account_value(i: int) -> bytes:
    return i.to_bytes(32, "big")


def setup_state(spec: WorkloadSpec) -> RentTrie:
    """Genesis population for the given workload, stamped at genesis time."""
    trie = RentTrie()
    ts = spec.genesis_timestamp
    for i in range(spec.n_accounts):
        trie.put(account_key(i), _account_value(i), ts, NodeKind.ACCOUNT)
    if spec.kind == "erc20":
        trie.put(CODE_KEY, CODE_VALUE, ts, NodeKind.CODE)
        for j, key in enumerate(PARAM_KEYS):
            trie.put(key, _account_value(j), ts, NodeKind.STORAGE_CELL)
        for i in range(spec.n_accounts):
            trie.put(balance_key(i), _account_value(i), ts,
                     NodeKind.STORAGE_CELL)
    elif spec.kind in ("uniform_random", "dormant_reader"):
        for i in range(spec.n_accounts):
            trie.put(cell_key(i), _account_value(i), ts, NodeKind.STORAGE_CELL)
    # selfdestruct_sweep and dos_missing_keys need only the accounts.
    return trie


def _zipf_cdf(n: int, skew: float) -> list[float]:
    total = 0.0
    weights = []
    for k in range(1, n + 1):
        w = 1.0 / k ** skew
        weights.append(w)
        total += w
    acc = 0.0
    cdf = []
    for w in weights:
        acc += w
        cdf.append(acc / total)
    return cdf


def generate(spec: WorkloadSpec) -> Iterator[tuple[BlockContext, Transaction]]:
    """The workload's transaction stream, txs_per_block per block."""
    build = _BUILDERS[spec.kind](spec)
    rng = SplitMix64(spec.seed)
    first_ts = spec.genesis_timestamp + spec.dormancy_seconds
    for j in range(spec.n_txs):
        number = j // spec.txs_per_block
        block = BlockContext(number, first_ts
                             + number * spec.block_interval_seconds)
        yield block, build(rng, j)


def _build_erc20(spec: WorkloadSpec):
    accounts = [account_key(i) for i in range(spec.n_accounts)]
    balances = [balance_key(i) for i in range(spec.n_accounts)]
    cdf = _zipf_cdf(spec.n_accounts, spec.skew)
    static_reads = (TxOp.read(CODE_KEY), TxOp.read(PARAM_KEYS[0]),
                    TxOp.read(PARAM_KEYS[1]))

    def build(rng: SplitMix64, j: int) -> Transaction:
        sender = rng.next_below(spec.n_accounts)
        receiver = bisect_right(cdf, rng.next_unit())
        while receiver == sender and spec.n_accounts > 1:
            receiver = bisect_right(cdf, rng.next_unit())
        value = j.to_bytes(32, "big")
        ops = static_reads + (TxOp.write(balances[sender], value),
                              TxOp.write(balances[receiver], value))
        return Transaction(accounts[sender], GAS_LIMIT, EXEC_GAS, ops)

    return build


def _build_uniform_random(spec: WorkloadSpec):
    accounts = [account_key(i) for i in range(spec.n_accounts)]
    cells = [cell_key(i) for i in range(spec.n_accounts)]

    def build(rng: SplitMix64, j: int) -> Transaction:
        sender = rng.next_below(spec.n_accounts)
        ops = []
        for _ in range(4):
            key = cells[rng.next_below(spec.n_accounts)]
            if rng.next_u64() & 1:
                ops.append(TxOp.write(key, j.to_bytes(32, "big")))
            else:
                ops.append(TxOp.read(key))
        return Transaction(accounts[sender], GAS_LIMIT, EXEC_GAS, tuple(ops))

    return build


def _build_dormant_reader(spec: WorkloadSpec):
    accounts = [account_key(i) for i in range(spec.n_accounts)]
    cells = [cell_key(i) for i in range(spec.n_accounts)]

    def build(rng: SplitMix64, j: int) -> Transaction:
        sender = rng.next_below(spec.n_accounts)
        ops = tuple(TxOp.read(cells[rng.next_below(spec.n_accounts)])
                    for _ in range(3))
        return Transaction(accounts[sender], GAS_LIMIT, EXEC_GAS, ops)

    return build


def _build_selfdestruct_sweep(spec: WorkloadSpec):
    # First half of the stream populates contracts, second half sweeps them
    # in creation order; an odd tx count leaves the last contract standing.
    accounts = [account_key(i) for i in range(spec.n_accounts)]
    creations = (spec.n_txs + 1) // 2

    def build(rng: SplitMix64, j: int) -> Transaction:
        sender = accounts[rng.next_below(spec.n_accounts)]
        if j < creations:
            prefix = contract_prefix(j)
            ops = tuple(TxOp.create(prefix + b"cell/%04d" % c,
                                    _account_value(c))
                        for c in range(spec.cells_per_contract))
        else:
            ops = (TxOp.delete_prefix(contract_prefix(j - creations)),)
        return Transaction(sender, GAS_LIMIT, EXEC_GAS, ops)

    return build


def _build_dos_missing_keys(spec: WorkloadSpec):
    accounts = [account_key(i) for i in range(spec.n_accounts)]

    def build(rng: SplitMix64, j: int) -> Transaction:
        sender = accounts[rng.next_below(spec.n_accounts)]
        ops = tuple(TxOp.read(b"void/%016x" % rng.next_u64())
                    for _ in range(spec.missing_reads_per_tx))
        return Transaction(sender, GAS_LIMIT, EXEC_GAS, ops)

    return build


_BUILDERS = {
    "erc20": _build_erc20,
    "uniform_random": _build_uniform_random,
    "dormant_reader": _build_dormant_reader,
    "selfdestruct_sweep": _build_selfdestruct_sweep,
    "dos_missing_keys": _build_dos_missing_keys,
}


# -- stream dump (for cross-implementation diffing) ---------------------------


def _render_op(op: TxOp) -> str:
    c = op.code.value
    if c == "read" or c == "delete" or c == "delete_prefix":
        return f"{c}:{op.key.hex()}"
    if c == "write":
        return f"write:{op.key.hex()}:{op.value.hex()}"
    if c == "create":
        return f"create:{op.key.hex()}:{op.value.hex()}:{op.node_kind.value}"
    if c == "frame_begin":
        return f"frame_begin:{op.gas_budget}"
    return f"frame_end:{1 if op.revert else 0}"


def dump_stream(spec: WorkloadSpec, out: TextIO) -> None:
    """One transaction per line in a fixed text form; see _render_op."""
    out.write(f"STATERENT-TXSTREAM v1 kind={spec.kind} seed={spec.seed} "
              f"prng={GENERATOR_NAME}\n")
    for block, tx in generate(spec):
        ops = "|".join(_render_op(op) for op in tx.ops)
        out.write(f"block={block.number} ts={block.timestamp} "
                  f"sender={tx.sender.hex()} gas_limit={tx.gas_limit} "
                  f"exec_gas={tx.exec_gas} ops={ops}\n")


def dump_stream_text(spec: WorkloadSpec) -> str:
    buf = io.StringIO()
    dump_stream(spec, buf)
    return buf.getvalue()
