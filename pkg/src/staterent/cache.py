"""Timestamp-driven cache tier model.

Nodes with recent rent timestamps are assumed to sit in fast storage and old
ones in slow storage; each leaf access is billed the cost of the tier its
age puts it in.  Tiers are classified from the pre-settlement timestamp:
the node's location reflects its state before the transaction touches it.
Nothing is evicted or deleted here; this is pure cost accounting.

The default policy (30 days / 1 year boundaries, 1/10/100 costs) is an
invented illustration, labeled as such wherever it is printed.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

from .trie import RentTrie


class CacheError(Exception):
    pass


@dataclass(frozen=True)
class TierPolicy:
    boundaries: tuple[int, ...]  # ascending age thresholds, seconds
    costs: tuple[int, ...]       # per-tier cost units, one more than boundaries

    def __post_init__(self):
        if len(self.costs) != len(self.boundaries) + 1:
            raise CacheError("need exactly one more cost than boundaries")
        if any(b <= 0 for b in self.boundaries):
            raise CacheError("boundaries must be positive")
        if any(a >= b for a, b in zip(self.boundaries, self.boundaries[1:])):
            raise CacheError("boundaries must be strictly ascending")
        if any(c < 0 for c in self.costs):
            raise CacheError("costs must be non-negative")
        if any(a >= b for a, b in zip(self.costs, self.costs[1:])):
            raise CacheError("costs must be strictly increasing")

    @property
    def tiers(self) -> int:
        return len(self.costs)


DEFAULT_POLICY = TierPolicy(boundaries=(2_592_000, 31_536_000),
                            costs=(1, 10, 100))


def classify(rent_paid_ts: int, now: int, policy: TierPolicy) -> int:
    """Tier index for a node of the given timestamp: smallest i with
    age < boundaries[i], else the last (coldest) tier."""
    age = now - rent_paid_ts
    if age < 0:
        raise CacheError("node timestamp lies in the future")
    return bisect_right(policy.boundaries, age)


@dataclass(frozen=True)
class CacheStats:
    access_counts: tuple[int, ...]   # per tier
    total_cost: int
    residency: tuple[int, ...]       # live leaves per tier at scenario end

    @property
    def total_accesses(self) -> int:
        return sum(self.access_counts)


class CacheTracker:
    """Accumulates per-tier access counts for one scenario run."""

    def __init__(self, policy: TierPolicy = DEFAULT_POLICY):
        self.policy = policy
        self._counts = [0] * policy.tiers
        self._cost = 0

    def observe(self, tier: int) -> None:
        self._counts[tier] += 1
        self._cost += self.policy.costs[tier]

    def observe_leaf(self, rent_paid_ts: int, now: int) -> None:
        self.observe(classify(rent_paid_ts, now, self.policy))

    @property
    def total_cost(self) -> int:
        return self._cost

    def summarize(self, residency: tuple[int, ...] = ()) -> CacheStats:
        if not residency:
            residency = (0,) * self.policy.tiers
        return CacheStats(tuple(self._counts), self._cost, residency)


def residency_histogram(trie: RentTrie, now: int,
                        policy: TierPolicy) -> tuple[int, ...]:
    """How many live leaves currently sit in each tier."""
    counts = [0] * policy.tiers
    for leaf in trie.iter_leaves():
        counts[classify(leaf.rent_paid_ts, now, policy)] += 1
    return tuple(counts)
