"""Per-block and aggregate scenario measurements, with deterministic CSV and
JSON emission.

All numbers in the output are decimal integers except the rent-paying
fraction, printed both as an exact rational "a/b" and as a truncated
10-digit decimal approximation computed in integer arithmetic.  Files are
byte-for-byte reproducible for a given run.

CSV columns, in order:
    block_number, block_timestamp, txs, rent_gas, penalty_gas,
    rent_paying_txs, state_leaves, state_bytes_effective, cache_cost

JSON layout: {"aggregates": {...}, "blocks": [...]} with the same per-block
fields and the aggregate fields produced by finalize().
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .cache import CacheStats
from .executor import BlockContext, RentReceipt, TxOutcome
from .rent import Reason

CSV_COLUMNS = ("block_number", "block_timestamp", "txs", "rent_gas",
               "penalty_gas", "rent_paying_txs", "state_leaves",
               "state_bytes_effective", "cache_cost")


class MetricsError(Exception):
    pass


@dataclass(frozen=True)
class BlockRow:
    block_number: int
    block_timestamp: int
    txs: int
    rent_gas: int
    penalty_gas: int
    rent_paying_txs: int
    state_leaves: int
    state_bytes_effective: int
    cache_cost: int


def _fraction_strings(frac: Fraction) -> tuple[str, str]:
    digits = frac.numerator * 10 ** 10 // frac.denominator
    approx = f"{digits // 10 ** 10}.{digits % 10 ** 10:010d}"
    return str(frac), approx


@dataclass(frozen=True)
class ScenarioMetrics:
    blocks: tuple[BlockRow, ...]
    total_txs: int
    total_rent_gas: int
    total_penalty_gas: int
    rent_paying_txs: int
    collections_by_reason: tuple[tuple[str, int], ...]  # all reasons, fixed order
    final_root_hash: str
    params_digest: str
    generator: str
    cache: CacheStats

    @property
    def rent_paying_fraction(self) -> Fraction:
        if self.total_txs == 0:
            return Fraction(0)
        return Fraction(self.rent_paying_txs, self.total_txs)


class MetricsCollector:
    """Accumulates one scenario run; finalize() freezes it exactly once."""

    def __init__(self, params_digest: str, generator: str):
        self.params_digest = params_digest
        self.generator = generator
        self._blocks: list[BlockRow] = []
        self._current: BlockContext | None = None
        self._txs = self._rent = self._penalty = self._paying = 0
        self._total_txs = self._total_rent = self._total_penalty = 0
        self._total_paying = 0
        self._reasons = {reason: 0 for reason in Reason}
        self._finalized = False

    def begin_block(self, block: BlockContext) -> None:
        if self._current is not None:
            raise MetricsError("previous block still open")
        self._current = block
        self._txs = self._rent = self._penalty = self._paying = 0

    def record_tx(self, outcome: TxOutcome, receipt: RentReceipt) -> None:
        if self._current is None:
            raise MetricsError("record_tx outside a block")
        self._txs += 1
        self._rent += receipt.total_rent_gas
        self._penalty += receipt.total_penalty_gas
        if receipt.total_rent_gas > 0:
            self._paying += 1
        for _, comp in receipt.entries:
            self._reasons[comp.reason] += 1

    def end_block(self, state_leaves: int, state_bytes_effective: int,
                  cache_cost: int) -> None:
        if self._current is None:
            raise MetricsError("no open block")
        self._blocks.append(BlockRow(
            self._current.number, self._current.timestamp, self._txs,
            self._rent, self._penalty, self._paying, state_leaves,
            state_bytes_effective, cache_cost))
        self._total_txs += self._txs
        self._total_rent += self._rent
        self._total_penalty += self._penalty
        self._total_paying += self._paying
        self._current = None

    def finalize(self, final_root: bytes, cache: CacheStats) -> ScenarioMetrics:
        if self._finalized:
            raise MetricsError("finalize called twice")
        if self._current is not None:
            raise MetricsError("finalize with a block still open")
        self._finalized = True
        reasons = tuple((r.value, self._reasons[r]) for r in Reason)
        return ScenarioMetrics(
            blocks=tuple(self._blocks),
            total_txs=self._total_txs,
            total_rent_gas=self._total_rent,
            total_penalty_gas=self._total_penalty,
            rent_paying_txs=self._total_paying,
            collections_by_reason=reasons,
            final_root_hash=final_root.hex(),
            params_digest=self.params_digest,
            generator=self.generator,
            cache=cache,
        )


def _row_values(row: BlockRow) -> tuple[int, ...]:
    return (row.block_number, row.block_timestamp, row.txs, row.rent_gas,
            row.penalty_gas, row.rent_paying_txs, row.state_leaves,
            row.state_bytes_effective, row.cache_cost)


def render_csv(metrics: ScenarioMetrics) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in metrics.blocks:
        lines.append(",".join(str(v) for v in _row_values(row)))
    return "\n".join(lines) + "\n"


def render_json(metrics: ScenarioMetrics) -> str:
    exact, approx = _fraction_strings(metrics.rent_paying_fraction)
    doc = {
        "aggregates": {
            "total_txs": metrics.total_txs,
            "total_rent_gas": metrics.total_rent_gas,
            "total_penalty_gas": metrics.total_penalty_gas,
            "rent_paying_txs": metrics.rent_paying_txs,
            "rent_paying_fraction": exact,
            "rent_paying_fraction_approx": approx,
            "collections_by_reason": dict(metrics.collections_by_reason),
            "final_root_hash": metrics.final_root_hash,
            "params_digest": metrics.params_digest,
            "generator": metrics.generator,
            "cache": {
                "access_counts": list(metrics.cache.access_counts),
                "total_cost": metrics.cache.total_cost,
                "residency": list(metrics.cache.residency),
            },
        },
        "blocks": [dict(zip(CSV_COLUMNS, _row_values(row)))
                   for row in metrics.blocks],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


_RENDERERS = {"csv": render_csv, "json": render_json}


def emit(metrics: ScenarioMetrics, fmt: str, path: str) -> None:
    renderer = _RENDERERS.get(fmt)
    if renderer is None:
        raise MetricsError(f"unknown output format {fmt!r}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(renderer(metrics))


def render_summary(metrics: ScenarioMetrics) -> str:
    exact, approx = _fraction_strings(metrics.rent_paying_fraction)
    reasons = "  ".join(f"{name}={count}"
                        for name, count in metrics.collections_by_reason
                        if count)
    lines = [
        f"blocks {len(metrics.blocks)}  txs {metrics.total_txs}",
        f"rent {metrics.total_rent_gas} gas  "
        f"penalties {metrics.total_penalty_gas} gas",
        f"rent-paying txs {metrics.rent_paying_txs} ({exact} = {approx})",
        f"collections: {reasons or 'none'}",
        f"cache cost {metrics.cache.total_cost} units  "
        f"accesses {list(metrics.cache.access_counts)}  "
        f"residency {list(metrics.cache.residency)}",
        f"final root {metrics.final_root_hash}",
        f"params digest {metrics.params_digest}",
    ]
    return "\n".join(lines) + "\n"
