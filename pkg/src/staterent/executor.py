"""Transaction execution against the rent trie.

The transaction model is an access pattern plus gas arithmetic: no
signatures, no native-coin transfers, no bytecode.  Frames mirror call
nesting; a reverted frame unwinds its state changes, but its accesses stay
recorded because rent is still owed (at a fraction) for touched state.

Rent is settled once, at end of execution, from gas_limit - exec_gas, so
per-frame gas budgets never fail because of rent.  Settlement classifies
each touched key by comparing its pre-transaction state with the state the
transaction is about to commit; charges are computed first and applied
second, so an out-of-gas settlement leaves no timestamp half-written.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .rent import (
    Reason,
    RentComputation,
    RentParams,
    advance_timestamp,
    apply_cap,
    charged_duration,
    collection_decision,
    effective_size,
    holiday_adjust,
    missing_key_penalty,
    rent_due,
    revert_charge,
)
from .trie import NodeKind, RentTrie

TOP_FRAME = 0


class TxStructureError(Exception):
    """Transaction shape is invalid; raised before any state mutation."""


class TxStatus(enum.Enum):
    SUCCESS = "success"
    REVERTED = "reverted"
    OUT_OF_GAS = "out_of_gas"


class OpCode(enum.Enum):
    READ = "read"
    WRITE = "write"
    CREATE = "create"
    DELETE = "delete"
    DELETE_PREFIX = "delete_prefix"
    FRAME_BEGIN = "frame_begin"
    FRAME_END = "frame_end"


_KEYED_OPS = frozenset({OpCode.READ, OpCode.WRITE, OpCode.CREATE,
                        OpCode.DELETE, OpCode.DELETE_PREFIX})
_VALUED_OPS = frozenset({OpCode.WRITE, OpCode.CREATE})


@dataclass(frozen=True)
class TxOp:
    code: OpCode
    key: bytes | None = None
    value: bytes | None = None
    node_kind: NodeKind = NodeKind.STORAGE_CELL
    gas_budget: int = 0
    revert: bool = False

    @classmethod
    def read(cls, key: bytes) -> "TxOp":
        return cls(OpCode.READ, key=key)

    @classmethod
    def write(cls, key: bytes, value: bytes) -> "TxOp":
        return cls(OpCode.WRITE, key=key, value=value)

    @classmethod
    def create(cls, key: bytes, value: bytes,
               kind: NodeKind = NodeKind.STORAGE_CELL) -> "TxOp":
        return cls(OpCode.CREATE, key=key, value=value, node_kind=kind)

    @classmethod
    def delete(cls, key: bytes) -> "TxOp":
        return cls(OpCode.DELETE, key=key)

    @classmethod
    def delete_prefix(cls, prefix: bytes) -> "TxOp":
        return cls(OpCode.DELETE_PREFIX, key=prefix)

    @classmethod
    def frame_begin(cls, gas_budget: int) -> "TxOp":
        return cls(OpCode.FRAME_BEGIN, gas_budget=gas_budget)

    @classmethod
    def frame_end(cls, revert: bool = False) -> "TxOp":
        return cls(OpCode.FRAME_END, revert=revert)


@dataclass(frozen=True)
class Transaction:
    sender: bytes
    gas_limit: int
    exec_gas: int
    ops: tuple[TxOp, ...] = ()

    def __post_init__(self):
        if self.exec_gas < 0 or self.gas_limit < self.exec_gas:
            raise TxStructureError("need 0 <= exec_gas <= gas_limit")
        if not isinstance(self.ops, tuple):
            object.__setattr__(self, "ops", tuple(self.ops))


@dataclass(frozen=True)
class BlockContext:
    number: int
    timestamp: int


@dataclass(frozen=True)
class TxOutcome:
    status: TxStatus
    gas_used: int


@dataclass(frozen=True)
class RentReceipt:
    entries: tuple[tuple[bytes, RentComputation], ...]  # first-touch order
    total_rent_gas: int
    total_penalty_gas: int
    status: TxStatus

    def __post_init__(self):
        rent = penalty = 0
        for _, comp in self.entries:
            if comp.reason is Reason.PENALTY_MISSING_KEY:
                penalty += comp.collected
            else:
                rent += comp.collected
        if (rent, penalty) != (self.total_rent_gas, self.total_penalty_gas):
            raise TxStructureError("receipt totals disagree with entries")


# Access strength lattice: any mutation dominates a read; a key whose every
# touch found it absent stays at "missing".
_KIND_RANK = {"missing": 0, "read": 1, "write": 2, "create": 3, "delete": 4}
_RANK_KIND = ["missing", "read", "write", "create", "delete"]


class _Record:
    __slots__ = ("rank", "frames", "pre", "ever_present")

    def __init__(self, rank: int, frame: int, pre, ever_present: bool):
        self.rank = rank
        self.frames = {frame}
        self.pre = pre  # (value_len, rent_paid_ts) before this tx, or None
        self.ever_present = ever_present


@dataclass(frozen=True)
class AccessView:
    strongest_kind: str
    frames: frozenset[int]
    reverted_only: bool


class AccessSet:
    """Per-key access records for one transaction, in first-touch order."""

    def __init__(self):
        self._records: dict[bytes, _Record] = {}

    def record(self, key: bytes, kind: str, frame: int, leaf=None) -> None:
        rank = _KIND_RANK[kind]
        present = leaf is not None or kind == "create"
        rec = self._records.get(key)
        if rec is None:
            pre = None if leaf is None else (len(leaf.value), leaf.rent_paid_ts)
            self._records[key] = _Record(rank, frame, pre, present)
            return
        if rank > rec.rank:
            rec.rank = rank
        rec.frames.add(frame)
        rec.ever_present |= present

    def items(self):
        return self._records.items()

    def __len__(self):
        return len(self._records)

    def view(self, final_reverted: frozenset[int]) -> dict[bytes, AccessView]:
        return {
            key: AccessView(_RANK_KIND[rec.rank], frozenset(rec.frames),
                            rec.frames <= final_reverted)
            for key, rec in self._records.items()
        }


def record_access(access_set: AccessSet, key: bytes, kind: str, frame: int,
                  leaf=None) -> None:
    access_set.record(key, kind, frame, leaf)


def _validate_structure(tx: Transaction) -> None:
    """Frame nesting and budget checks; rejects before any mutation."""
    budgets = [tx.gas_limit - tx.exec_gas]
    top_closed = False
    for i, op in enumerate(tx.ops):
        if top_closed:
            raise TxStructureError(f"op {i} follows the top-level frame_end")
        if op.code is OpCode.FRAME_BEGIN:
            if op.gas_budget < 0 or op.gas_budget > budgets[-1]:
                raise TxStructureError(
                    f"op {i}: frame budget {op.gas_budget} exceeds "
                    f"enclosing budget {budgets[-1]}")
            budgets.append(op.gas_budget)
        elif op.code is OpCode.FRAME_END:
            budgets.pop()
            if not budgets:
                top_closed = True
        elif op.code in _KEYED_OPS:
            if op.key is None:
                raise TxStructureError(f"op {i}: missing key")
            if op.code in _VALUED_OPS and op.value is None:
                raise TxStructureError(f"op {i}: missing value")
        else:
            raise TxStructureError(f"op {i}: unknown op code")
    if len(budgets) > 1:
        raise TxStructureError(f"{len(budgets) - 1} unclosed frames")


def _undo(trie: RentTrie, journal: list, mark: int) -> None:
    while len(journal) > mark:
        entry = journal.pop()
        if entry[0] == "c":
            trie.delete(entry[1])
        else:  # overwrite and delete restore identically
            trie.put(entry[1], entry[2], entry[3], entry[4])


def execute_tx(tx: Transaction, trie: RentTrie, block: BlockContext,
               params: RentParams,
               on_leaf_access=None) -> tuple[TxOutcome, RentReceipt]:
    """Run one transaction and settle its rent.

    `on_leaf_access`, if given, is called once per distinct pre-existing
    leaf the transaction touched, with that leaf's pre-settlement rent
    timestamp; cache-tier accounting hangs off this hook.
    """
    _validate_structure(tx)
    now = block.timestamp
    if now < trie.max_ts_bound:
        raise TxStructureError("block timestamp precedes recorded state")
    sender_leaf = trie.get(tx.sender)
    if sender_leaf is None:
        raise TxStructureError("sender account does not exist")

    access = AccessSet()
    # Nonce/balance always change, so the sender is written by definition.
    access.record(tx.sender, "write", TOP_FRAME, sender_leaf)

    journal: list = []
    frames: list[tuple[int, int]] = [(TOP_FRAME, 0)]  # (frame id, journal mark)
    parent = {TOP_FRAME: -1}
    explicitly_reverted: set[int] = set()
    next_fid = 1
    top_reverted = False

    for op in tx.ops:
        code = op.code
        if code is OpCode.READ:
            leaf = trie.get(op.key)
            access.record(op.key, "read" if leaf else "missing",
                          frames[-1][0], leaf)
        elif code is OpCode.WRITE or code is OpCode.CREATE:
            leaf = trie.get(op.key)
            if leaf is not None:
                # Writes change the value now; the rent timestamp moves only
                # at settlement.
                access.record(op.key, "write", frames[-1][0], leaf)
                journal.append(("w", op.key, leaf.value, leaf.rent_paid_ts,
                                leaf.kind))
                trie.put(op.key, op.value, leaf.rent_paid_ts, leaf.kind)
            else:
                access.record(op.key, "create", frames[-1][0], None)
                journal.append(("c", op.key))
                trie.put(op.key, op.value, now, op.node_kind)
        elif code is OpCode.DELETE:
            leaf = trie.get(op.key)
            if leaf is not None:
                access.record(op.key, "delete", frames[-1][0], leaf)
                journal.append(("d", op.key, leaf.value, leaf.rent_paid_ts,
                                leaf.kind))
                trie.delete(op.key)
            else:
                access.record(op.key, "missing", frames[-1][0], None)
        elif code is OpCode.DELETE_PREFIX:
            for key in trie.logical_keys_with_prefix(op.key):
                leaf = trie.get(key)
                access.record(key, "delete", frames[-1][0], leaf)
                journal.append(("d", key, leaf.value, leaf.rent_paid_ts,
                                leaf.kind))
                trie.delete(key)
        elif code is OpCode.FRAME_BEGIN:
            parent[next_fid] = frames[-1][0]
            frames.append((next_fid, len(journal)))
            next_fid += 1
        else:  # FRAME_END
            fid, mark = frames.pop()
            if op.revert:
                explicitly_reverted.add(fid)
                _undo(trie, journal, mark)
                if not frames:
                    top_reverted = True

    status = TxStatus.REVERTED if top_reverted else TxStatus.SUCCESS

    # A frame's effects are void if it or any ancestor reverted.
    final_reverted: set[int] = set()
    if explicitly_reverted:
        for fid in parent:
            f = fid
            while f != -1:
                if f in explicitly_reverted:
                    final_reverted.add(fid)
                    break
                f = parent[f]

    entries: list[tuple[bytes, RentComputation]] = []
    pending_ts: list[tuple[bytes, int]] = []
    rent_total = penalty_total = 0

    for key, rec in access.items():
        kind = _RANK_KIND[rec.rank]
        if kind == "missing":
            pen = missing_key_penalty(params)
            entries.append((key, RentComputation(
                0, 0, 0, pen, 0, Reason.PENALTY_MISSING_KEY)))
            penalty_total += pen
            continue
        leaf = trie.get(key)
        if rec.pre is None:
            # Born this transaction (and possibly gone again); no history.
            size = effective_size(len(leaf.value), params) if leaf else 0
            entries.append((key, RentComputation(
                size, 0, 0, 0, now, Reason.CREATED_NO_RENT)))
            continue
        pre_len, pre_ts = rec.pre
        if on_leaf_access is not None:
            on_leaf_access(pre_ts)
        # Same rent lineage iff the surviving leaf kept its timestamp; a
        # delete-then-recreate yields a fresh leaf stamped with `now`.
        live = leaf is not None and leaf.rent_paid_ts == pre_ts
        size = effective_size(len(leaf.value) if live else pre_len, params)
        due = rent_due(size, pre_ts, now, params)
        duration = charged_duration(pre_ts, now, params)
        strength = "write" if rec.rank >= _KIND_RANK["write"] else "read"
        if not collection_decision(due, strength, params):
            entries.append((key, RentComputation(
                size, duration, due, 0, pre_ts,
                Reason.SKIPPED_BELOW_THRESHOLD)))
            continue
        capped, fully = apply_cap(due, params)
        adjusted, advance_ok = holiday_adjust(capped, now, params)
        if not advance_ok:
            entries.append((key, RentComputation(
                size, duration, due, 0, pre_ts, Reason.HOLIDAY_PAUSED)))
            continue
        if rec.frames <= final_reverted:
            collected = revert_charge(adjusted, params)
            entries.append((key, RentComputation(
                size, duration, due, collected, pre_ts,
                Reason.REVERTED_FRACTION)))
            rent_total += collected
            continue
        reason = Reason.COLLECTED_FULL if fully else Reason.COLLECTED_CAPPED
        if live:
            # The waived part of a discount is forgiven, so advancement runs
            # on the pre-discount amount.
            new_ts = advance_timestamp(pre_ts, now, capped, size, params, fully)
            pending_ts.append((key, new_ts))
        else:
            new_ts = pre_ts  # leaf is gone; the charge is final
        entries.append((key, RentComputation(
            size, duration, due, adjusted, new_ts, reason)))
        rent_total += adjusted

    if rent_total + penalty_total > tx.gas_limit - tx.exec_gas:
        _undo(trie, journal, 0)
        status = TxStatus.OUT_OF_GAS
        gas_used = tx.gas_limit
    else:
        for key, ts in pending_ts:
            trie.set_rent_timestamp(key, ts)
        gas_used = tx.exec_gas + rent_total + penalty_total

    receipt = RentReceipt(tuple(entries), rent_total, penalty_total, status)
    return TxOutcome(status, gas_used), receipt
