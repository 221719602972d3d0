"""Cache tier model tests, including the rent/cache coupling end to end."""

import pytest

from staterent.cache import (
    DEFAULT_POLICY,
    CacheError,
    CacheTracker,
    TierPolicy,
    classify,
    residency_histogram,
)
from staterent.executor import execute_tx
from staterent.rent import RentParams
from staterent.trie import NodeKind, RentTrie
from staterent.workload import WorkloadSpec, generate, setup_state

NOW = 2_000_000_000


def test_default_policy_shape():
    assert DEFAULT_POLICY.boundaries == (2_592_000, 31_536_000)
    assert DEFAULT_POLICY.costs == (1, 10, 100)
    assert DEFAULT_POLICY.tiers == 3


@pytest.mark.parametrize("age,tier", [
    (0, 0),
    (2_591_999, 0),
    (2_592_000, 1),          # boundary ages belong to the colder tier
    (10_000_000, 1),
    (31_535_999, 1),
    (31_536_000, 2),
    (10 ** 12, 2),
])
def test_classify_default_boundaries(age, tier):
    assert classify(NOW - age, NOW, DEFAULT_POLICY) == tier


def test_classify_rejects_future_timestamps():
    with pytest.raises(CacheError):
        classify(NOW + 1, NOW, DEFAULT_POLICY)


def test_classify_single_tier_policy():
    flat = TierPolicy(boundaries=(), costs=(7,))
    assert classify(0, NOW, flat) == 0
    assert flat.tiers == 1


@pytest.mark.parametrize("boundaries,costs", [
    ((100,), (1,)),            # missing a cost
    ((100,), (1, 2, 3)),       # one cost too many
    ((0, 100), (1, 2, 3)),     # zero boundary
    ((-5,), (1, 2)),           # negative boundary
    ((100, 100), (1, 2, 3)),   # not strictly ascending
    ((200, 100), (1, 2, 3)),   # descending
    ((100,), (5, 5)),          # costs must strictly increase
    ((100,), (5, 2)),
    ((100,), (-1, 2)),         # negative cost
])
def test_policy_validation_rejects(boundaries, costs):
    with pytest.raises(CacheError):
        TierPolicy(boundaries=boundaries, costs=costs)


def test_tracker_accumulates_counts_and_cost():
    tracker = CacheTracker(DEFAULT_POLICY)
    for tier in (0, 0, 1, 2, 0, 2):
        tracker.observe(tier)
    stats = tracker.summarize()
    assert stats.access_counts == (3, 1, 2)
    assert stats.total_cost == 3 * 1 + 1 * 10 + 2 * 100
    assert stats.total_accesses == 6
    assert stats.residency == (0, 0, 0)


def test_observe_leaf_classifies_then_counts():
    tracker = CacheTracker(DEFAULT_POLICY)
    tracker.observe_leaf(NOW - 10, NOW)               # hot
    tracker.observe_leaf(NOW - 40_000_000, NOW)       # coldest
    assert tracker.summarize().access_counts == (1, 0, 1)
    assert tracker.total_cost == 101


def test_summarize_passes_residency_through():
    tracker = CacheTracker(DEFAULT_POLICY)
    stats = tracker.summarize(residency=(4, 5, 6))
    assert stats.residency == (4, 5, 6)


def test_residency_histogram_buckets_live_leaves():
    trie = RentTrie()
    trie.put(b"a", b"x", NOW - 100, NodeKind.STORAGE_CELL)
    trie.put(b"b", b"x", NOW - 3_000_000, NodeKind.STORAGE_CELL)
    trie.put(b"c", b"x", NOW - 40_000_000, NodeKind.STORAGE_CELL)
    trie.put(b"d", b"x", NOW, NodeKind.STORAGE_CELL)
    assert residency_histogram(trie, NOW, DEFAULT_POLICY) == (2, 1, 1)


def run_erc20(params):
    """Replay a small transfer workload, billing each pre-existing leaf
    access at the tier its pre-settlement age selects."""
    spec = WorkloadSpec(kind="erc20", n_accounts=50, n_txs=300,
                        txs_per_block=50)
    trie = setup_state(spec)
    tracker = CacheTracker(DEFAULT_POLICY)
    for block, tx in generate(spec):
        now = block.timestamp
        execute_tx(tx, trie, block, params,
                   on_leaf_access=lambda ts, _n=now: tracker.observe_leaf(ts, _n))
    return tracker.summarize()


def test_rent_collection_lowers_cache_cost():
    # A year of dormancy puts every genesis leaf in the coldest tier.  With
    # collection enabled, paid-up leaves carry fresh timestamps and drop to
    # the cheap tier on re-access; with thresholds too high to ever collect,
    # every access stays cold.  Same stream, same access count, cheaper run.
    on = run_erc20(RentParams())
    off = run_erc20(RentParams(read_threshold_gas=10 ** 18,
                               write_threshold_gas=10 ** 18,
                               cap_gas_per_node=10 ** 18))
    assert on.total_accesses == off.total_accesses
    assert off.access_counts[0] == 0
    assert off.total_cost == 100 * off.total_accesses
    assert on.access_counts[0] > 0
    assert on.total_cost < off.total_cost
