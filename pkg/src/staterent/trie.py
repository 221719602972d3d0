"""Authenticated binary radix trie over hashed keys, with rent timestamps.

Leaves live at the full 256-bit hash of their logical key; internal nodes
exist only at bit positions where two subtrees diverge (path compression),
so every internal node has exactly two children.  Leaf and internal digests
both commit to rent timestamps, making them consensus data.
"""

from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass
from typing import Callable, Iterator

ZERO32 = b"\x00" * 32
DEFAULT_MAX_VALUE_LEN = 1 << 24

SNAPSHOT_MAGIC = "STATERENT-SNAPSHOT"
SNAPSHOT_VERSION = "v1"

# 256-bit hash functions usable for key dispersion and commitments.
HASHES: dict[str, Callable[[bytes], bytes]] = {
    "sha256": lambda data: hashlib.sha256(data).digest(),
    "sha3-256": lambda data: hashlib.sha3_256(data).digest(),
    "blake2b-256": lambda data: hashlib.blake2b(data, digest_size=32).digest(),
}
DEFAULT_HASH = "sha256"


class TrieError(Exception):
    pass


class ValueTooLargeError(TrieError):
    pass


class SnapshotError(TrieError):
    """Raised on malformed snapshot input; message names the offending line."""


class NodeKind(enum.Enum):
    ACCOUNT = "A"
    CODE = "C"
    STORAGE_CELL = "S"


@dataclass(frozen=True)
class Key:
    logical_key: bytes
    hashed_key: bytes

    @classmethod
    def of(cls, logical_key: bytes, hash_name: str = DEFAULT_HASH) -> "Key":
        return cls(logical_key, HASHES[hash_name](logical_key))


class LeafNode:
    """Value-bearing node.  `logical_key` is None for leaves loaded from a
    snapshot (the hash is one-way); it is backfilled when the leaf is next
    addressed by its logical key."""

    __slots__ = ("hk", "logical_key", "value", "rent_paid_ts", "kind", "_digest")

    def __init__(self, hk: int, logical_key: bytes | None, value: bytes,
                 rent_paid_ts: int, kind: NodeKind):
        self.hk = hk
        self.logical_key = logical_key
        self.value = value
        self.rent_paid_ts = rent_paid_ts
        self.kind = kind
        self._digest: bytes | None = None

    @property
    def hashed_key(self) -> bytes:
        return self.hk.to_bytes(32, "big")

    def __repr__(self) -> str:
        return (f"LeafNode(hashed_key={self.hashed_key.hex()[:12]}.., "
                f"len={len(self.value)}, ts={self.rent_paid_ts}, kind={self.kind.name})")


class _Internal:
    """Branch at divergence bit `bit` (0 = most significant).  All leaves in
    the subtree agree on bits [0, bit); `skey` is any such leaf's hashed key,
    kept for prefix comparisons.  `_digest`/`_maxts` memoize the commitment
    and the subtree timestamp max; `_digest is None` marks them stale."""

    __slots__ = ("bit", "skey", "left", "right", "_digest", "_maxts")

    def __init__(self, bit: int, skey: int, left, right):
        self.bit = bit
        self.skey = skey
        self.left = left
        self.right = right
        self._digest: bytes | None = None
        self._maxts = 0


def _divergence_bit(a: int, b: int) -> int:
    # Index of the highest bit where a and b differ, counting from the MSB.
    return 256 - (a ^ b).bit_length()


class RentTrie:
    """Single-writer authenticated state trie with per-leaf rent timestamps."""

    def __init__(self, hash_name: str = DEFAULT_HASH,
                 max_value_len: int = DEFAULT_MAX_VALUE_LEN):
        if hash_name not in HASHES:
            raise TrieError(f"unknown hash function {hash_name!r}")
        self.hash_name = hash_name
        self._hash = HASHES[hash_name]
        self.max_value_len = max_value_len
        self._root: LeafNode | _Internal | None = None
        self._index: dict[bytes, int] = {}  # logical key -> hashed key int
        self.leaf_count = 0
        self.value_bytes_total = 0
        # Upper bound on every stored rent timestamp; monotone (deletions do
        # not lower it), so ordering checks against it stay O(1).
        self.max_ts_bound = 0

    # -- lookup ------------------------------------------------------------

    def _hashed(self, logical_key: bytes) -> int:
        hk = self._index.get(logical_key)
        if hk is None:
            hk = int.from_bytes(self._hash(logical_key), "big")
        return hk

    def get(self, logical_key: bytes) -> LeafNode | None:
        hk = self._hashed(logical_key)
        node = self._root
        while type(node) is _Internal:
            if (hk >> (255 - node.bit)) & 1:
                node = node.right
            else:
                node = node.left
        if node is None or node.hk != hk:
            return None
        if node.logical_key is None:
            node.logical_key = logical_key
            self._index[logical_key] = hk
        return node

    def contains(self, logical_key: bytes) -> bool:
        return self.get(logical_key) is not None

    # -- mutation ----------------------------------------------------------

    def put(self, logical_key: bytes, value: bytes, rent_paid_ts: int,
            kind: NodeKind = NodeKind.STORAGE_CELL) -> None:
        if len(value) > self.max_value_len:
            raise ValueTooLargeError(
                f"value length {len(value)} exceeds max {self.max_value_len}")
        if rent_paid_ts < 0:
            raise TrieError("rent_paid_ts must be non-negative")
        hk = self._hashed(logical_key)
        self._index[logical_key] = hk
        self._insert(hk, logical_key, value, rent_paid_ts, kind)

    def _insert(self, hk: int, logical_key: bytes | None, value: bytes,
                rent_paid_ts: int, kind: NodeKind) -> None:
        if rent_paid_ts > self.max_ts_bound:
            self.max_ts_bound = rent_paid_ts
        node = self._root
        if node is None:
            self._root = LeafNode(hk, logical_key, value, rent_paid_ts, kind)
            self.leaf_count += 1
            self.value_bytes_total += len(value)
            return
        parent: _Internal | None = None
        went_right = False
        while True:
            if type(node) is not _Internal:
                if node.hk == hk:
                    # Replace in place; node identity is stable across writes.
                    self.value_bytes_total += len(value) - len(node.value)
                    node.value = value
                    node.rent_paid_ts = rent_paid_ts
                    node.kind = kind
                    if logical_key is not None:
                        node.logical_key = logical_key
                    node._digest = None
                    return
                other = node.hk
                break
            if node.bit and (node.skey ^ hk) >> (256 - node.bit):
                other = node.skey
                break
            node._digest = None
            parent = node
            went_right = bool((hk >> (255 - node.bit)) & 1)
            node = node.right if went_right else node.left
        # Split: attach a new internal node at the first divergent bit.
        leaf = LeafNode(hk, logical_key, value, rent_paid_ts, kind)
        d = _divergence_bit(other, hk)
        if (hk >> (255 - d)) & 1:
            branch = _Internal(d, hk, node, leaf)
        else:
            branch = _Internal(d, hk, leaf, node)
        if parent is None:
            self._root = branch
        elif went_right:
            parent.right = branch
        else:
            parent.left = branch
        self.leaf_count += 1
        self.value_bytes_total += len(value)

    def delete(self, logical_key: bytes) -> bool:
        hk = self._hashed(logical_key)
        node = self._root
        if node is None:
            return False
        path: list[tuple[_Internal, bool]] = []
        while type(node) is _Internal:
            went_right = bool((hk >> (255 - node.bit)) & 1)
            path.append((node, went_right))
            node = node.right if went_right else node.left
        if node.hk != hk:
            return False
        self._detach(node, path)
        self._index.pop(logical_key, None)
        if node.logical_key is not None and node.logical_key != logical_key:
            self._index.pop(node.logical_key, None)
        return True

    def _detach(self, leaf: LeafNode, path: list[tuple[_Internal, bool]]) -> None:
        if not path:
            self._root = None
        else:
            parent, went_right = path[-1]
            sibling = parent.left if went_right else parent.right
            if len(path) == 1:
                self._root = sibling
            else:
                grand, g_right = path[-2]
                if g_right:
                    grand.right = sibling
                else:
                    grand.left = sibling
            for n, _ in path:
                n._digest = None
        self.leaf_count -= 1
        self.value_bytes_total -= len(leaf.value)

    def logical_keys_with_prefix(self, logical_prefix: bytes) -> list[bytes]:
        """Known logical keys starting with the prefix, sorted.  Leaves loaded
        from a snapshot are invisible here until re-addressed logically."""
        return sorted(k for k in self._index if k.startswith(logical_prefix))

    def delete_prefix(self, logical_prefix: bytes) -> int:
        removed = 0
        for key in self.logical_keys_with_prefix(logical_prefix):
            if self.delete(key):
                removed += 1
        return removed

    def set_rent_timestamp(self, logical_key: bytes, rent_paid_ts: int) -> None:
        """Settlement hook: advance a leaf's rent timestamp and re-dirty the
        commitments along its path."""
        hk = self._hashed(logical_key)
        node = self._root
        path: list[_Internal] = []
        while type(node) is _Internal:
            path.append(node)
            node = node.right if (hk >> (255 - node.bit)) & 1 else node.left
        if node is None or node.hk != hk:
            raise TrieError(f"set_rent_timestamp on absent key {logical_key!r}")
        if rent_paid_ts > self.max_ts_bound:
            self.max_ts_bound = rent_paid_ts
        node.rent_paid_ts = rent_paid_ts
        node._digest = None
        for n in path:
            n._digest = None

    # -- commitments ---------------------------------------------------------

    def _leaf_digest(self, leaf: LeafNode) -> bytes:
        d = leaf._digest
        if d is None:
            d = self._hash(
                b"\x01" + leaf.hk.to_bytes(32, "big")
                + leaf.rent_paid_ts.to_bytes(8, "big")
                + len(leaf.value).to_bytes(4, "big") + leaf.value)
            leaf._digest = d
        return d

    def _node_digest(self, node) -> tuple[bytes, int]:
        if type(node) is not _Internal:
            return self._leaf_digest(node), node.rent_paid_ts
        if node._digest is not None:
            return node._digest, node._maxts
        left, lts = self._node_digest(node.left)
        right, rts = self._node_digest(node.right)
        maxts = lts if lts >= rts else rts
        d = self._hash(b"\x00" + left + right + maxts.to_bytes(8, "big"))
        node._digest = d
        node._maxts = maxts
        return d, maxts

    def root_hash(self) -> bytes:
        if self._root is None:
            return ZERO32
        return self._node_digest(self._root)[0]

    def last_update_ts(self) -> int:
        """Subtree-max rent timestamp at the root (0 for an empty trie)."""
        if self._root is None:
            return 0
        return self._node_digest(self._root)[1]

    # -- traversal -----------------------------------------------------------

    def iter_leaves(self) -> Iterator[LeafNode]:
        """Leaves in ascending hashed-key order (trie in-order)."""
        stack = []
        node = self._root
        while node is not None or stack:
            while type(node) is _Internal:
                stack.append(node)
                node = node.left
            if node is not None:
                yield node
            node = stack.pop().right if stack else None

    # -- snapshots -------------------------------------------------------------

    def write_snapshot(self, path: str, params_digest: bytes = ZERO32) -> None:
        if len(params_digest) != 32:
            raise TrieError("params digest must be 32 bytes")
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(f"{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION} "
                     f"hash={self.hash_name} params={params_digest.hex()}\n")
            for leaf in self.iter_leaves():
                fh.write(f"{leaf.hk:064x} {leaf.kind.value} "
                         f"{leaf.rent_paid_ts} {leaf.value.hex()}\n")

    _HEADER_RE = re.compile(
        rf"^{SNAPSHOT_MAGIC} (\S+) hash=(\S+) params=([0-9a-f]{{64}})$")
    _RECORD_RE = re.compile(
        r"^([0-9a-f]{64}) ([ACS]) (0|[1-9][0-9]*) ((?:[0-9a-f][0-9a-f])*)$")

    @classmethod
    def read_snapshot(cls, path: str,
                      max_value_len: int = DEFAULT_MAX_VALUE_LEN
                      ) -> tuple["RentTrie", bytes]:
        """Rebuild a trie from a snapshot file.  Returns (trie, params_digest).
        Any malformed line aborts the load; no partial trie is exposed."""
        with open(path, "r", encoding="ascii", newline="\n") as fh:
            header = fh.readline()
            if not header.endswith("\n"):
                raise SnapshotError("line 1: missing or unterminated header")
            m = cls._HEADER_RE.match(header[:-1])
            if not m:
                raise SnapshotError("line 1: malformed header")
            version, hash_name, params_hex = m.groups()
            if version != SNAPSHOT_VERSION:
                raise SnapshotError(
                    f"line 1: unsupported snapshot version {version!r}")
            if hash_name not in HASHES:
                raise SnapshotError(f"line 1: unknown hash function {hash_name!r}")
            trie = cls(hash_name=hash_name, max_value_len=max_value_len)
            prev_hk = -1
            lineno = 1
            for line in fh:
                lineno += 1
                if not line.endswith("\n"):
                    raise SnapshotError(f"line {lineno}: truncated record")
                m = cls._RECORD_RE.match(line[:-1])
                if not m:
                    raise SnapshotError(f"line {lineno}: malformed record")
                hk_hex, kind_code, ts_str, value_hex = m.groups()
                hk = int(hk_hex, 16)
                if hk <= prev_hk:
                    raise SnapshotError(
                        f"line {lineno}: keys not strictly ascending "
                        f"(duplicate or out of order)")
                prev_hk = hk
                value = bytes.fromhex(value_hex)
                if len(value) > max_value_len:
                    raise SnapshotError(f"line {lineno}: value too large")
                trie._insert(hk, None, value, int(ts_str), NodeKind(kind_code))
        return trie, bytes.fromhex(params_hex)
