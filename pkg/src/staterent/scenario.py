"""Scenario configuration and the run loop tying the pieces together.

A scenario is declared in a TOML file with sections mirroring the domain
types: [rent] (RentParams fields), [[rent.holidays]], [workload]
(WorkloadSpec fields), [cache] (TierPolicy fields), [output], [snapshot].
Unknown keys are rejected so a typo cannot silently change an experiment.

A 256-bit digest over the canonicalized rent + workload + cache parameters
(the "params digest") is embedded in metrics output and snapshot headers,
identifying which parameterization produced a given artifact.  Output and
snapshot paths deliberately stay out of the digest.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, replace
from fractions import Fraction

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .cache import CacheError, CacheTracker, DEFAULT_POLICY, TierPolicy, \
    residency_histogram
from .executor import execute_tx
from .metrics import MetricsCollector, ScenarioMetrics, emit
from .rent import HolidayMode, HolidayWindow, RentError, RentParams
from .trie import RentTrie
from .workload import GENERATOR_NAME, WorkloadError, WorkloadSpec, generate, \
    setup_state

OUTPUT_FORMATS = ("csv", "json")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    rent: RentParams
    workload: WorkloadSpec
    cache: TierPolicy = DEFAULT_POLICY
    formats: tuple[str, ...] = ("csv", "json")
    output_dir: str = "."
    snapshot_in: str | None = None
    snapshot_out: str | None = None


def _check_keys(table: dict, allowed: tuple[str, ...], where: str) -> None:
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")


def _fraction(value, where: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise ConfigError(f"{where}: expected a rational like \"1/4\"")
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


_RENT_KEYS = ("rate_denominator_log2", "storage_overhead_bytes",
              "read_threshold_gas", "write_threshold_gas", "cap_gas_per_node",
              "missing_key_penalty_gas", "revert_fraction",
              "accrual_horizon_seconds", "seconds_per_year", "holidays")
_HOLIDAY_KEYS = ("start_ts", "end_ts", "mode", "discount")
_WORKLOAD_KEYS = ("kind", "seed", "n_accounts", "n_txs", "txs_per_block",
                  "skew", "block_interval_seconds", "genesis_timestamp",
                  "dormancy_seconds", "cells_per_contract",
                  "missing_reads_per_tx")
_CACHE_KEYS = ("boundaries", "costs")
_OUTPUT_KEYS = ("formats", "directory")
_SNAPSHOT_KEYS = ("in", "out")


def _parse_holiday(table: dict, where: str) -> HolidayWindow:
    _check_keys(table, _HOLIDAY_KEYS, where)
    kwargs = {}
    if "start_ts" not in table or "end_ts" not in table:
        raise ConfigError(f"{where}: start_ts and end_ts are required")
    kwargs["start_ts"] = table["start_ts"]
    kwargs["end_ts"] = table["end_ts"]
    mode = table.get("mode", "pause")
    try:
        kwargs["mode"] = HolidayMode(mode)
    except ValueError:
        raise ConfigError(f"{where}.mode: expected \"pause\" or \"discount\","
                          f" got {mode!r}") from None
    if "discount" in table:
        kwargs["discount"] = _fraction(table["discount"], f"{where}.discount")
    return HolidayWindow(**kwargs)


def _parse_rent(table: dict) -> RentParams:
    _check_keys(table, _RENT_KEYS, "rent")
    kwargs = dict(table)
    if "revert_fraction" in kwargs:
        kwargs["revert_fraction"] = _fraction(kwargs["revert_fraction"],
                                              "rent.revert_fraction")
    if kwargs.get("accrual_horizon_seconds") == 0:
        kwargs["accrual_horizon_seconds"] = None  # 0 disables the horizon
    holidays = kwargs.pop("holidays", [])
    kwargs["holidays"] = tuple(
        _parse_holiday(h, f"rent.holidays[{i}]")
        for i, h in enumerate(holidays))
    return RentParams(**kwargs)


def _parse_workload(table: dict) -> WorkloadSpec:
    _check_keys(table, _WORKLOAD_KEYS, "workload")
    if "kind" not in table:
        raise ConfigError("workload.kind is required")
    kwargs = dict(table)
    if "skew" in kwargs and isinstance(kwargs["skew"], int) \
            and not isinstance(kwargs["skew"], bool):
        kwargs["skew"] = float(kwargs["skew"])
    return WorkloadSpec(**kwargs)


def _parse_cache(table: dict) -> TierPolicy:
    _check_keys(table, _CACHE_KEYS, "cache")
    if set(table) != set(_CACHE_KEYS):
        raise ConfigError("cache needs both boundaries and costs")
    return TierPolicy(tuple(table["boundaries"]), tuple(table["costs"]))


def parse_config(text: str) -> ScenarioConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from None
    _check_keys(doc, ("rent", "workload", "cache", "output", "snapshot"),
                "top level")
    if "workload" not in doc:
        raise ConfigError("missing required section [workload]")
    try:
        rent = _parse_rent(doc.get("rent", {}))
        workload = _parse_workload(doc["workload"])
        cache = _parse_cache(doc["cache"]) if "cache" in doc else DEFAULT_POLICY
    except (RentError, WorkloadError, CacheError, TypeError) as exc:
        raise ConfigError(str(exc)) from None

    out = doc.get("output", {})
    _check_keys(out, _OUTPUT_KEYS, "output")
    formats = tuple(out.get("formats", list(OUTPUT_FORMATS)))
    for fmt in formats:
        if fmt not in OUTPUT_FORMATS:
            raise ConfigError(f"output.formats: unknown format {fmt!r}")
    snap = doc.get("snapshot", {})
    _check_keys(snap, _SNAPSHOT_KEYS, "snapshot")
    return ScenarioConfig(
        rent=rent, workload=workload, cache=cache, formats=formats,
        output_dir=out.get("directory", "."),
        snapshot_in=snap.get("in"), snapshot_out=snap.get("out"))


def load_config(path: str) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def with_overrides(config: ScenarioConfig, seed: int | None = None,
                   output_dir: str | None = None,
                   formats: tuple[str, ...] | None = None) -> ScenarioConfig:
    if seed is not None:
        config = replace(config, workload=replace(config.workload, seed=seed))
    if output_dir is not None:
        config = replace(config, output_dir=output_dir)
    if formats:
        config = replace(config, formats=tuple(formats))
    return config


def params_digest(rent: RentParams, workload: WorkloadSpec,
                  cache: TierPolicy) -> bytes:
    """Digest of everything that can change simulation results."""
    horizon = rent.accrual_horizon_seconds
    lines = [
        f"rent.rate_denominator_log2={rent.rate_denominator_log2}",
        f"rent.storage_overhead_bytes={rent.storage_overhead_bytes}",
        f"rent.read_threshold_gas={rent.read_threshold_gas}",
        f"rent.write_threshold_gas={rent.write_threshold_gas}",
        f"rent.cap_gas_per_node={rent.cap_gas_per_node}",
        f"rent.missing_key_penalty_gas={rent.missing_key_penalty_gas}",
        f"rent.revert_fraction={rent.revert_fraction}",
        f"rent.accrual_horizon_seconds="
        f"{'disabled' if horizon is None else horizon}",
        f"rent.seconds_per_year={rent.seconds_per_year}",
    ]
    for i, w in enumerate(rent.holidays):
        lines.append(f"rent.holidays.{i}.start_ts={w.start_ts}")
        lines.append(f"rent.holidays.{i}.end_ts={w.end_ts}")
        lines.append(f"rent.holidays.{i}.mode={w.mode.value}")
        lines.append(f"rent.holidays.{i}.discount={w.discount}")
    lines += [
        f"workload.kind={workload.kind}",
        f"workload.seed={workload.seed}",
        f"workload.n_accounts={workload.n_accounts}",
        f"workload.n_txs={workload.n_txs}",
        f"workload.txs_per_block={workload.txs_per_block}",
        f"workload.skew={workload.skew!r}",
        f"workload.block_interval_seconds={workload.block_interval_seconds}",
        f"workload.genesis_timestamp={workload.genesis_timestamp}",
        f"workload.dormancy_seconds={workload.dormancy_seconds}",
        f"workload.cells_per_contract={workload.cells_per_contract}",
        f"workload.missing_reads_per_tx={workload.missing_reads_per_tx}",
        f"cache.boundaries={','.join(map(str, cache.boundaries))}",
        f"cache.costs={','.join(map(str, cache.costs))}",
    ]
    return hashlib.sha256(("\n".join(lines) + "\n").encode("ascii")).digest()


def run_scenario(config: ScenarioConfig) -> tuple[ScenarioMetrics, RentTrie]:
    digest = params_digest(config.rent, config.workload, config.cache)
    if config.snapshot_in:
        trie, _ = RentTrie.read_snapshot(config.snapshot_in)
    else:
        trie = setup_state(config.workload)
    overhead = config.rent.storage_overhead_bytes
    collector = MetricsCollector(digest.hex(), GENERATOR_NAME)
    tracker = CacheTracker(config.cache)
    params = config.rent

    current_number = None
    cost_mark = 0
    last_ts = config.workload.genesis_timestamp + config.workload.dormancy_seconds
    observe = None

    def close_block():
        nonlocal cost_mark
        collector.end_block(
            trie.leaf_count,
            trie.value_bytes_total + trie.leaf_count * overhead,
            tracker.total_cost - cost_mark)
        cost_mark = tracker.total_cost

    for block, tx in generate(config.workload):
        if block.number != current_number:
            if current_number is not None:
                close_block()
            collector.begin_block(block)
            current_number = block.number
            last_ts = block.timestamp
            now = block.timestamp
            observe = lambda ts, _n=now: tracker.observe_leaf(ts, _n)
        outcome, receipt = execute_tx(tx, trie, block, params,
                                      on_leaf_access=observe)
        collector.record_tx(outcome, receipt)
    if current_number is not None:
        close_block()

    residency = residency_histogram(trie, last_ts, config.cache)
    metrics = collector.finalize(trie.root_hash(),
                                 tracker.summarize(residency))
    return metrics, trie


def write_outputs(config: ScenarioConfig, metrics: ScenarioMetrics,
                  trie: RentTrie) -> list[str]:
    """Emit the configured metrics files (and snapshot); returns the paths."""
    os.makedirs(config.output_dir, exist_ok=True)
    written = []
    for fmt in config.formats:
        path = os.path.join(config.output_dir, f"metrics.{fmt}")
        emit(metrics, fmt, path)
        written.append(path)
    if config.snapshot_out:
        digest = params_digest(config.rent, config.workload, config.cache)
        trie.write_snapshot(config.snapshot_out, digest)
        written.append(config.snapshot_out)
    return written
