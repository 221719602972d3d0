"""Command-line interface.

Subcommands:
    run <config.toml>   execute a scenario, write metrics/snapshot outputs
    oracle SIZE LAST NOW  print due, post-cap collected, new timestamp
    inspect <snapshot>  report leaf count, bytes, age histogram, root hash

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import sys

from .rent import (
    RentError,
    RentParams,
    advance_timestamp,
    apply_cap,
    rent_due,
)
from .scenario import (
    ConfigError,
    OUTPUT_FORMATS,
    load_config,
    run_scenario,
    with_overrides,
    write_outputs,
)
from .metrics import render_summary
from .trie import RentTrie, SnapshotError, TrieError

AGE_BUCKETS = (86_400, 2_592_000, 31_536_000, 94_608_000)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="staterent",
        description="Deterministic storage-rent simulator for EVM-style state")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario config")
    p_run.add_argument("config", help="path to a TOML scenario config")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the workload seed")
    p_run.add_argument("--output-dir", default=None,
                       help="override the output directory")
    p_run.add_argument("--format", action="append", choices=OUTPUT_FORMATS,
                       default=None, help="override output formats (repeatable)")

    p_oracle = sub.add_parser(
        "oracle", help="rent pipeline spot check for one node")
    p_oracle.add_argument("size", type=int, help="effective size in bytes")
    p_oracle.add_argument("last_ts", type=int, help="last rent payment, unix s")
    p_oracle.add_argument("now", type=int, help="settlement time, unix s")
    p_oracle.add_argument("--rate-log2", type=int, default=21)
    p_oracle.add_argument("--cap", type=int, default=10_000)
    p_oracle.add_argument("--horizon", type=int, default=94_608_000,
                          help="accrual horizon in seconds; 0 disables it")

    p_inspect = sub.add_parser("inspect", help="summarize a state snapshot")
    p_inspect.add_argument("snapshot", help="path to a snapshot file")
    p_inspect.add_argument("--overhead", type=int, default=64,
                           help="per-node overhead for effective sizes")
    return parser


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config)
        config = with_overrides(config, seed=args.seed,
                                output_dir=args.output_dir,
                                formats=tuple(dict.fromkeys(args.format or ())))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        metrics, trie = run_scenario(config)
        written = write_outputs(config, metrics, trie)
    except (OSError, SnapshotError, TrieError, RentError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(render_summary(metrics))
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_oracle(args) -> int:
    if args.size < 0 or args.last_ts < 0 or args.now < args.last_ts:
        print("oracle error: need size >= 0 and now >= last_ts >= 0",
              file=sys.stderr)
        return 2
    try:
        params = RentParams(
            rate_denominator_log2=args.rate_log2,
            cap_gas_per_node=args.cap,
            read_threshold_gas=0, write_threshold_gas=0,
            accrual_horizon_seconds=args.horizon if args.horizon else None)
    except RentError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return 2
    due = rent_due(args.size, args.last_ts, args.now, params)
    collected, fully = apply_cap(due, params)
    new_ts = advance_timestamp(args.last_ts, args.now, collected, args.size,
                               params, fully)
    print(due)
    print(collected)
    print(new_ts)
    return 0


def _cmd_inspect(args) -> int:
    try:
        trie, digest = RentTrie.read_snapshot(args.snapshot)
    except (OSError, SnapshotError) as exc:
        print(f"inspect failed: {exc}", file=sys.stderr)
        return 1
    newest = 0
    for leaf in trie.iter_leaves():
        if leaf.rent_paid_ts > newest:
            newest = leaf.rent_paid_ts
    counts = [0] * (len(AGE_BUCKETS) + 1)
    for leaf in trie.iter_leaves():
        age = newest - leaf.rent_paid_ts
        for i, bound in enumerate(AGE_BUCKETS):
            if age <= bound:
                counts[i] += 1
                break
        else:
            counts[-1] += 1
    print(f"leaves {trie.leaf_count}")
    print(f"effective_bytes "
          f"{trie.value_bytes_total + trie.leaf_count * args.overhead}")
    print(f"root {trie.root_hash().hex()}")
    print(f"params_digest {digest.hex()}")
    for bound, n in zip(AGE_BUCKETS, counts):
        print(f"age<={bound} {n}")
    print(f"age>{AGE_BUCKETS[-1]} {counts[-1]}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "oracle":
        return _cmd_oracle(args)
    return _cmd_inspect(args)


def entrypoint() -> None:
    sys.exit(main())
